"""Feature extraction, a small MLP classifier, and domain-adaptive training.

The classifier is a two-layer tanh trunk plus a linear softmax head; the
discriminator is a two-hidden-layer tanh network with a logistic output
that scores whether a latent came from the target domain. The adversarial
objective is

    L_adv = mean_t log D(f_T(x_t)) + mean_s log(1 - D(f_T(x_s)))

and training alternates a discriminator ascent step on L_adv with a model
descent step on L_cls + lambda_adv * L_adv. Everything is float64 numpy
with plain SGD, so runs are bit-reproducible in the seed.

Batch scheduling: single-domain strategies walk a fresh permutation each
epoch in batch-size slices (final short slice included). Two-domain
strategies draw batch_size//2 from each domain per step for
ceil(max(n_s, n_t) / (batch_size//2)) steps per epoch, extending the
shorter domain by further permutations as needed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_CLAMP_LO = 1e-7
_CLAMP_HI = 1.0 - 1e-7
WEIGHTS_MAGIC = b"SAWT\x01"

_MODEL_KEYS = ("W1", "b1", "W2", "b2", "W3", "b3")
_DISC_KEYS = ("V1", "c1", "V2", "c2", "v3", "c3")


@dataclass(frozen=True)
class FeatureConfig:
    t_frames: int = 8
    height: int = 12
    width: int = 16

    @property
    def dim(self) -> int:
        return self.t_frames * self.height * self.width


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Rows average the input intervals overlapping each output cell."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        lo, hi = o * scale, (o + 1) * scale
        i0, i1 = int(np.floor(lo)), int(np.ceil(hi))
        for i in range(i0, min(i1, n_in)):
            m[o, i] = min(hi, i + 1) - max(lo, i)
    return m / m.sum(axis=1, keepdims=True)


def extract_features(frames, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Grayscale T'xH'xW' cube from a clip, flattened and standardized.

    Accepts FrameBuffer objects or raw (H, W, 3) uint8/float arrays. A
    constant clip maps to the zero vector.
    """
    n = len(frames)
    if n < config.t_frames:
        raise ValueError(f"clip has {n} frames, need at least {config.t_frames}")
    picks = np.rint(np.linspace(0, n - 1, config.t_frames)).astype(int)
    planes = []
    row_m = col_m = None
    for k in picks:
        img = frames[k].rgb if hasattr(frames[k], "rgb") else frames[k]
        img = np.asarray(img, dtype=np.float64)
        if img.max() > 1.0:
            img = img / 255.0
        gray = img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
        if row_m is None:
            row_m = _area_matrix(gray.shape[0], config.height)
            col_m = _area_matrix(gray.shape[1], config.width)
        planes.append(row_m @ gray @ col_m.T)
    cube = np.stack(planes).ravel()
    std = cube.std()
    if std < 1e-12:
        return np.zeros_like(cube)
    return (cube - cube.mean()) / std


@dataclass
class DomainDataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) int class indices
    domain: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) == 0:
            raise ValueError("features must be a nonempty (N, d) array")
        if self.labels.shape != (len(self.features),):
            raise ValueError("labels must align with features")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative class indices")

    def __len__(self):
        return len(self.features)


@dataclass
class ClassifierModel:
    """tanh(W2 tanh(W1 x)) trunk -> linear softmax head."""

    params: dict
    classes: list

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[1]

    def copy(self) -> "ClassifierModel":
        return ClassifierModel({k: v.copy() for k, v in self.params.items()},
                               list(self.classes))


@dataclass
class DiscriminatorModel:
    params: dict

    def copy(self) -> "DiscriminatorModel":
        return DiscriminatorModel({k: v.copy() for k, v in self.params.items()})


def init_classifier(input_dim: int, classes: list, rng: np.random.Generator,
                    hidden1: int = 64, hidden2: int = 32) -> ClassifierModel:
    c = len(classes)
    p = {
        "W1": rng.normal(0.0, 1.0 / np.sqrt(input_dim), (hidden1, input_dim)),
        "b1": np.zeros(hidden1),
        "W2": rng.normal(0.0, 1.0 / np.sqrt(hidden1), (hidden2, hidden1)),
        "b2": np.zeros(hidden2),
        "W3": rng.normal(0.0, 1.0 / np.sqrt(hidden2), (c, hidden2)),
        "b3": np.zeros(c),
    }
    return ClassifierModel(p, list(classes))


def init_discriminator(latent_dim: int, rng: np.random.Generator,
                       hidden1: int = 32, hidden2: int = 16) -> DiscriminatorModel:
    p = {
        "V1": rng.normal(0.0, 1.0 / np.sqrt(latent_dim), (hidden1, latent_dim)),
        "c1": np.zeros(hidden1),
        "V2": rng.normal(0.0, 1.0 / np.sqrt(hidden1), (hidden2, hidden1)),
        "c2": np.zeros(hidden2),
        "v3": rng.normal(0.0, 1.0 / np.sqrt(hidden2), (1, hidden2)),
        "c3": np.zeros(1),
    }
    return DiscriminatorModel(p)


def _trunk_forward(p: dict, x: np.ndarray):
    a1 = x @ p["W1"].T + p["b1"]
    h1 = np.tanh(a1)
    a2 = h1 @ p["W2"].T + p["b2"]
    h2 = np.tanh(a2)
    return h1, h2


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def classifier_forward(model: ClassifierModel, x: np.ndarray):
    """(latent, class probabilities) for a batch; x is (N, d) or (d,)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match model input {model.input_dim}"
        )
    _, h2 = _trunk_forward(model.params, x)
    probs = _softmax(h2 @ model.params["W3"].T + model.params["b3"])
    return h2, probs


def predict_proba(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    return classifier_forward(model, x)[1]


def predict(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    # ties resolve to the lowest class index (np.argmax takes the first max)
    return np.argmax(predict_proba(model, x), axis=1)


def _disc_forward(p: dict, latent: np.ndarray):
    u1 = latent @ p["V1"].T + p["c1"]
    g1 = np.tanh(u1)
    u2 = g1 @ p["V2"].T + p["c2"]
    g2 = np.tanh(u2)
    z = (g2 @ p["v3"].T + p["c3"]).ravel()
    raw = 1.0 / (1.0 + np.exp(-z))
    prob = np.clip(raw, _CLAMP_LO, _CLAMP_HI)
    return g1, g2, raw, prob


def discriminator_forward(disc: DiscriminatorModel, latent: np.ndarray) -> np.ndarray:
    return _disc_forward(disc.params, np.atleast_2d(latent))[3]


def _disc_backward(p: dict, latent, g1, g2, dz):
    """Backprop dz (dL/dz per example) through the discriminator.

    Returns (param grads, dL/dlatent).
    """
    grads = {}
    grads["v3"] = dz[None, :] @ g2
    grads["c3"] = np.array([dz.sum()])
    dg2 = dz[:, None] @ p["v3"]
    du2 = dg2 * (1.0 - g2 * g2)
    grads["V2"] = du2.T @ g1
    grads["c2"] = du2.sum(axis=0)
    dg1 = du2 @ p["V2"]
    du1 = dg1 * (1.0 - g1 * g1)
    grads["V1"] = du1.T @ latent
    grads["c1"] = du1.sum(axis=0)
    return grads, du1 @ p["V1"]


def objective(model: ClassifierModel, disc: DiscriminatorModel | None,
              x_src: np.ndarray | None, y_src: np.ndarray | None,
              x_tgt: np.ndarray | None, y_tgt: np.ndarray | None,
              lam: float):
    """(J, L_cls, L_adv) with J = L_cls + lam * L_adv, no gradients."""
    j, l_cls, l_adv, _, _ = grad_objective(model, disc, x_src, y_src, x_tgt, y_tgt,
                                           lam, want_grads=False)
    return j, l_cls, l_adv


def grad_objective(model: ClassifierModel, disc: DiscriminatorModel | None,
                   x_src, y_src, x_tgt, y_tgt, lam: float, want_grads: bool = True):
    """Losses and analytic gradients of J = L_cls + lam * L_adv.

    L_cls is the mean cross-entropy over every labeled example of both
    domains; L_adv needs both domains and a discriminator. Returns
    (J, L_cls, L_adv, model grads, disc grads of L_adv); gradient dicts are
    None when want_grads is false, L_adv is 0.0 when not applicable.
    """
    parts = []
    if x_src is not None and len(x_src):
        parts.append((np.atleast_2d(x_src), None if y_src is None else np.asarray(y_src)))
    if x_tgt is not None and len(x_tgt):
        parts.append((np.atleast_2d(x_tgt), None if y_tgt is None else np.asarray(y_tgt)))
    if not parts:
        raise ValueError("no examples given")
    x = np.concatenate([p[0] for p in parts])
    n_src = len(parts[0][0]) if x_src is not None and len(x_src) else 0

    p = model.params
    h1, h2 = _trunk_forward(p, x)
    logits = h2 @ p["W3"].T + p["b3"]
    probs = _softmax(logits)

    labeled_idx, labeled_y, off = [], [], 0
    for part_x, part_y in parts:
        if part_y is not None:
            labeled_idx.append(np.arange(len(part_x)) + off)
            labeled_y.append(part_y)
        off += len(part_x)
    if not labeled_idx:
        raise ValueError("at least one domain must be labeled")
    labeled = np.concatenate(labeled_idx)
    ys = np.concatenate(labeled_y)
    l_cls = float(-np.mean(np.log(probs[labeled, ys])))

    use_adv = lam != 0.0 and disc is not None and n_src > 0 and n_src < len(x)
    adv_requested = disc is not None and n_src > 0 and n_src < len(x)
    l_adv = 0.0
    dh2_adv = None
    disc_grads = None
    if adv_requested:
        dp = disc.params
        lat_s, lat_t = h2[:n_src], h2[n_src:]
        g1s, g2s, raw_s, p_s = _disc_forward(dp, lat_s)
        g1t, g2t, raw_t, p_t = _disc_forward(dp, lat_t)
        l_adv = float(np.mean(np.log(p_t)) + np.mean(np.log1p(-p_s)))
        if want_grads:
            act_s = (raw_s > _CLAMP_LO) & (raw_s < _CLAMP_HI)
            act_t = (raw_t > _CLAMP_LO) & (raw_t < _CLAMP_HI)
            dz_t = (1.0 / p_t) * raw_t * (1.0 - raw_t) * act_t / len(lat_t)
            dz_s = (-1.0 / (1.0 - p_s)) * raw_s * (1.0 - raw_s) * act_s / len(lat_s)
            gs, dlat_s = _disc_backward(dp, lat_s, g1s, g2s, dz_s)
            gt, dlat_t = _disc_backward(dp, lat_t, g1t, g2t, dz_t)
            disc_grads = {k: gs[k] + gt[k] for k in gs}
            dh2_adv = np.concatenate([dlat_s, dlat_t])

    j = l_cls + lam * l_adv
    if not want_grads:
        return j, l_cls, l_adv, None, None

    dlogits = probs.copy()
    dlogits[labeled, ys] -= 1.0
    mask = np.zeros(len(x))
    mask[labeled] = 1.0 / len(labeled)
    dlogits *= mask[:, None]

    grads = {}
    grads["W3"] = dlogits.T @ h2
    grads["b3"] = dlogits.sum(axis=0)
    dh2 = dlogits @ p["W3"]
    if use_adv and dh2_adv is not None:
        dh2 = dh2 + lam * dh2_adv
    da2 = dh2 * (1.0 - h2 * h2)
    grads["W2"] = da2.T @ h1
    grads["b2"] = da2.sum(axis=0)
    dh1 = da2 @ p["W2"]
    da1 = dh1 * (1.0 - h1 * h1)
    grads["W1"] = da1.T @ x
    grads["b1"] = da1.sum(axis=0)

    return j, l_cls, l_adv, grads, disc_grads


def adversarial_losses(model: ClassifierModel, disc: DiscriminatorModel,
                       x_src, y_src, x_tgt, y_tgt) -> tuple[float, float]:
    """(L_cls, L_adv) on one pair of batches, no parameter updates."""
    _, l_cls, l_adv, _, _ = grad_objective(model, disc, x_src, y_src, x_tgt, y_tgt,
                                           lam=1.0, want_grads=False)
    return l_cls, l_adv


@dataclass
class TrainingStepLog:
    l_cls_before: float
    l_adv_before: float
    l_cls_after: float
    l_adv_after: float


@dataclass(frozen=True)
class TrainConfig:
    strategy: str
    lr: float = 0.05
    finetune_lr: float | None = None  # default: lr / 10
    disc_lr: float | None = None  # default: lr
    lambda_adv: float = 0.1
    batch_size: int = 32
    epochs: int = 40
    pretrain_epochs: int | None = None  # default: epochs
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; one of {sorted(STRATEGIES)}")
        if self.lr <= 0 or self.batch_size < 2 or self.epochs < 1:
            raise ValueError("lr must be positive, batch_size >= 2, epochs >= 1")
        ft = self.finetune_lr if self.finetune_lr is not None else self.lr / 10.0
        if ft >= self.lr:
            raise ValueError("finetune learning rate must be below the pretrain rate")
        if self.lambda_adv < 0:
            raise ValueError("lambda_adv must be >= 0")

    @property
    def ft_lr(self) -> float:
        return self.finetune_lr if self.finetune_lr is not None else self.lr / 10.0

    @property
    def d_lr(self) -> float:
        return self.disc_lr if self.disc_lr is not None else self.lr


STRATEGIES = ("real-only", "synthetic-only", "joint", "finetune", "adversarial")


def _apply(params: dict, grads: dict, scale: float) -> None:
    for k, g in grads.items():
        params[k] += scale * g


def alternating_step(model: ClassifierModel, disc: DiscriminatorModel,
                     x_src, y_src, x_tgt, y_tgt, config: TrainConfig) -> TrainingStepLog:
    """One adversarial round: discriminator ascent, then model descent."""
    _, cls0, adv0, _, dgrads = grad_objective(model, disc, x_src, y_src, x_tgt, y_tgt,
                                              config.lambda_adv)
    if dgrads is not None:
        _apply(disc.params, dgrads, +config.d_lr)
    _, _, _, mgrads, _ = grad_objective(model, disc, x_src, y_src, x_tgt, y_tgt,
                                        config.lambda_adv)
    _apply(model.params, mgrads, -config.lr)
    _, cls1, adv1, _, _ = grad_objective(model, disc, x_src, y_src, x_tgt, y_tgt,
                                         config.lambda_adv, want_grads=False)
    return TrainingStepLog(cls0, adv0, cls1, adv1)


def _epoch_slices(rng: np.random.Generator, n: int, batch: int):
    perm = rng.permutation(n)
    return [perm[i:i + batch] for i in range(0, n, batch)]


def _paired_slices(rng: np.random.Generator, n_src: int, n_tgt: int, batch: int):
    """Per-step (source idx, target idx) halves covering the larger domain."""
    half = batch // 2
    steps = int(np.ceil(max(n_src, n_tgt) / half))

    def stream(n):
        out = []
        while len(out) < steps * half:
            out.extend(rng.permutation(n).tolist())
        return np.array(out[: steps * half])

    src, tgt = stream(n_src), stream(n_tgt)
    return [(src[i * half:(i + 1) * half], tgt[i * half:(i + 1) * half])
            for i in range(steps)]


def _run_epochs_single(model, data: DomainDataset, lr: float, epochs: int, batch: int,
                       rng, curves: list, phase: str, step: int) -> int:
    for _ in range(epochs):
        for idx in _epoch_slices(rng, len(data), batch):
            _, l_cls, _, grads, _ = grad_objective(
                model, None, data.features[idx], data.labels[idx], None, None, 0.0)
            _apply(model.params, grads, -lr)
            curves.append((step, phase, l_cls, 0.0))
            step += 1
    return step


def train(datasets: dict, config: TrainConfig, classes: list,
          hidden1: int = 64, hidden2: int = 32) -> tuple[ClassifierModel, list]:
    """Run one strategy to completion; returns (model, loss-curve rows).

    datasets maps "synthetic" and/or "real" to DomainDatasets; synthetic is
    the adversarial source domain and real the target. Rows are
    (step, phase, L_cls, L_adv). Fully determined by config.seed.
    """
    needed = {"real-only": ("real",), "synthetic-only": ("synthetic",)}.get(
        config.strategy, ("synthetic", "real"))
    for key in needed:
        if key not in datasets or datasets[key] is None:
            raise ValueError(f"strategy {config.strategy!r} needs a {key!r} dataset")
    dims = {len(d.features[0]) for d in datasets.values() if d is not None}
    if len(dims) > 1:
        raise ValueError(f"feature dimensions disagree across domains: {sorted(dims)}")
    for d in datasets.values():
        if d is not None and d.labels.max() >= len(classes):
            raise ValueError(
                f"label {int(d.labels.max())} out of range for {len(classes)} classes")

    ss = np.random.SeedSequence(config.seed)
    model_ss, disc_ss, shuffle_ss = ss.spawn(3)
    model = init_classifier(dims.pop(), classes, np.random.default_rng(model_ss),
                            hidden1, hidden2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    curves: list = []
    step = 0

    if config.strategy in ("real-only", "synthetic-only"):
        key = "real" if config.strategy == "real-only" else "synthetic"
        _run_epochs_single(model, datasets[key], config.lr, config.epochs,
                           config.batch_size, shuffle_rng, curves, "train", step)
        return model, curves

    if config.strategy == "finetune":
        pre = config.pretrain_epochs if config.pretrain_epochs is not None else config.epochs
        step = _run_epochs_single(model, datasets["synthetic"], config.lr, pre,
                                  config.batch_size, shuffle_rng, curves, "pretrain", step)
        _run_epochs_single(model, datasets["real"], config.ft_lr, config.epochs,
                           config.batch_size, shuffle_rng, curves, "finetune", step)
        return model, curves

    # joint and adversarial share the batch schedule and the classifier
    # update; with lambda_adv = 0 their f-trajectories are bitwise equal
    src, tgt = datasets["synthetic"], datasets["real"]
    disc = None
    if config.strategy == "adversarial":
        disc = init_discriminator(hidden2, np.random.default_rng(disc_ss))
    lam = config.lambda_adv if config.strategy == "adversarial" else 0.0
    for _ in range(config.epochs):
        for si, ti in _paired_slices(shuffle_rng, len(src), len(tgt), config.batch_size):
            xs, ys = src.features[si], src.labels[si]
            xt, yt = tgt.features[ti], tgt.labels[ti]
            if disc is not None:
                _, _, _, _, dgrads = grad_objective(model, disc, xs, ys, xt, yt, lam)
                if dgrads is not None:
                    _apply(disc.params, dgrads, +config.d_lr)
            _, l_cls, l_adv, mgrads, _ = grad_objective(model, disc, xs, ys, xt, yt, lam)
            _apply(model.params, mgrads, -config.lr)
            curves.append((step, config.strategy, l_cls, l_adv))
            step += 1
    return model, curves


def save_curves(path: str, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,phase,L_cls,L_adv\n")
        for step, phase, l_cls, l_adv in rows:
            fh.write(f"{step},{phase},{l_cls!r},{l_adv!r}\n")


def save_weights(path: str, model: ClassifierModel) -> None:
    """Flat little-endian format: magic, class names, layer shapes, float64 data."""
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        names = [c.encode("utf-8") for c in model.classes]
        fh.write(struct.pack("<I", len(names)))
        for nm in names:
            fh.write(struct.pack("<I", len(nm)))
            fh.write(nm)
        fh.write(struct.pack("<I", len(_MODEL_KEYS)))
        for key in _MODEL_KEYS:
            arr = np.ascontiguousarray(model.params[key], dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_weights(path: str) -> ClassifierModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise ValueError(f"{path}: not a weights file (bad magic)")
    off = len(WEIGHTS_MAGIC)

    def u32():
        nonlocal off
        (v,) = struct.unpack_from("<I", blob, off)
        off += 4
        return v

    classes = []
    for _ in range(u32()):
        ln = u32()
        classes.append(blob[off:off + ln].decode("utf-8"))
        off += ln
    n_arrays = u32()
    if n_arrays != len(_MODEL_KEYS):
        raise ValueError(f"{path}: expected {len(_MODEL_KEYS)} arrays, found {n_arrays}")
    params = {}
    for key in _MODEL_KEYS:
        ndim = u32()
        shape = tuple(u32() for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        params[key] = np.frombuffer(blob, dtype="<f8", count=count, offset=off
                                    ).reshape(shape).copy()
        off += count * 8
    if off != len(blob):
        raise ValueError(f"{path}: {len(blob) - off} trailing bytes")
    return ClassifierModel(params, classes)
