"""Dataset generation and the exact-enumeration toy posterior.

Generation samples, per video: the motion (uniform within the action's
clips), then every nuisance factor, rescales the motion onto the sampled
body, renders, and appends one JSON line to the manifest. The per-video
stream id equals the video's global index, so any single video can be
regenerated byte-identically from its manifest record alone.

The toy generative model is fully discrete: explicit probability tables
over actions, motions, and nuisance values, and a deterministic
observation map. Its posterior is computed by brute enumeration and serves
as the Bayes reference that trained classifiers are compared against.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from .motion import MotionClip, parse_bvh, rescale_to_topology
from .motion.catalog import catalog_entries
from .randomize import (
    NuisanceConfig,
    NuisanceSample,
    Range,
    canonical_json,
    derive_topology,
    sample_nuisances,
)
from .render import SceneDescription, render_clip, write_frames, write_joints, write_masks
from .rng import RngStream, derive_stream
from .textures import TextureRef

MANIFEST_NAME = "manifest.jsonl"
RNG_ALGORITHM = "pcg32"


class MotionLibrary:
    """Action label -> nonempty list of (motion id, MotionClip)."""

    def __init__(self, clips: dict):
        if not clips:
            raise ValueError("motion library is empty")
        for action, entries in clips.items():
            if not entries:
                raise ValueError(f"action {action!r} has no motion clips")
        self._clips = clips

    @property
    def actions(self) -> list:
        return sorted(self._clips)

    def clips_for(self, action: str) -> list:
        if action not in self._clips:
            raise KeyError(
                f"unknown action {action!r}; library has {self.actions}"
            )
        return self._clips[action]

    def get(self, motion_id: str) -> MotionClip:
        for entries in self._clips.values():
            for mid, clip in entries:
                if mid == motion_id:
                    return clip
        raise KeyError(f"unknown motion id {motion_id!r}")


def builtin_library(actions: list | None = None) -> MotionLibrary:
    """Library of the built-in procedural motions, optionally restricted."""
    clips: dict = {}
    for motion_id, action, clip in catalog_entries():
        clips.setdefault(action, []).append((motion_id, clip))
    if actions is not None:
        missing = sorted(set(actions) - set(clips))
        if missing:
            raise ValueError(f"built-in catalog lacks actions {missing}")
        clips = {a: clips[a] for a in actions}
    return MotionLibrary(clips)


def load_library(root: str) -> MotionLibrary:
    """BVH library layout: <root>/<action>/<clip>.bvh."""
    clips: dict = {}
    for action in sorted(os.listdir(root)):
        adir = os.path.join(root, action)
        if not os.path.isdir(adir):
            continue
        for name in sorted(os.listdir(adir)):
            if not name.endswith(".bvh"):
                continue
            with open(os.path.join(adir, name), "r", encoding="utf-8") as fh:
                clip = parse_bvh(fh.read())
            clips.setdefault(action, []).append((f"{action}/{name}", clip))
    if not clips:
        raise ValueError(f"no BVH files under {root!r}")
    return MotionLibrary(clips)


def sample_motion(library: MotionLibrary, action: str, stream: RngStream):
    """Uniform draw of (motion id, clip) among the action's motions."""
    entries = library.clips_for(action)
    return entries[stream.randint(len(entries))]


# pinned procedural textures for the pseudo-real domain: the narrow domain
# always shows one of these exact four surfaces
_PSEUDO_REAL_POOL = (
    TextureRef("checker", "checker#0",
               {"colors": [[0.85, 0.3, 0.25], [0.9, 0.88, 0.82]], "cells": 8}),
    TextureRef("checker", "checker#1",
               {"colors": [[0.25, 0.35, 0.7], [0.55, 0.55, 0.6]], "cells": 6}),
    TextureRef("noise", "noise#2", {"seed": 11, "scale": 4,
                                    "palette": [[0.15, 0.2, 0.15], [0.45, 0.5, 0.4]]}),
    TextureRef("noise", "noise#3", {"seed": 99, "scale": 6,
                                    "palette": [[0.6, 0.55, 0.45], [0.9, 0.85, 0.75]]}),
)


def pseudo_real_config() -> NuisanceConfig:
    """Narrow, entangled stand-in for a real recording setup.

    One azimuth half-plane, tight distance and elevation, a fixed body, and
    four pinned textures.
    """
    return NuisanceConfig(
        camera_distance=Range(2.8, 3.2),
        azimuth=Range(0.0, 180.0),
        elevation=Range(10.0, 30.0),
        texture_pool=_PSEUDO_REAL_POOL,
        height=Range(1.7, 1.7),
        limb_ratio=Range(1.0, 1.0),
        limb_radius=Range(0.045, 0.045),
        torso_scale=Range(1.0, 1.0),
    )


def synthetic_config() -> NuisanceConfig:
    """Wide randomization: full azimuth circle, unpinned textures, random body."""
    return NuisanceConfig(
        texture_pool=(
            TextureRef("checker", "checker#0"),
            TextureRef("checker", "checker#1"),
            TextureRef("noise", "noise#2"),
            TextureRef("noise", "noise#3"),
        )
    )


@dataclass(frozen=True)
class GenerationConfig:
    master_seed: int
    videos_per_class: int
    classes: tuple
    nuisances: NuisanceConfig
    out_root: str
    n_frames: int = 32
    fps: float = 30.0
    width: int = 640
    height: int = 480
    domain: str = "synthetic"
    frame_format: str = "png"
    write_groundtruth: bool = True

    def __post_init__(self):
        if self.videos_per_class < 1:
            raise ValueError("videos_per_class must be >= 1")
        if not self.classes:
            raise ValueError("class list is empty")
        if self.domain not in ("synthetic", "real", "pseudo-real"):
            raise ValueError(f"unknown domain tag {self.domain!r}")


def scene_id_of(sample: NuisanceSample) -> str:
    """Environment identity: the (floor, sky) texture pool slots."""
    key = f"{sample.floor.pool_id}|{sample.sky.pool_id}"
    return hashlib.sha256(key.encode()).hexdigest()[:8]


def _sample_video(config: GenerationConfig, library: MotionLibrary,
                  action: str, video_index: int):
    """Everything random about one video, drawn in the documented order."""
    stream = derive_stream(config.master_seed, video_index)
    motion_id, base_clip = sample_motion(library, action, stream)
    nuis = sample_nuisances(config.nuisances, stream)
    topo = derive_topology(nuis.humanoid)
    clip = rescale_to_topology(base_clip, topo)
    scene = SceneDescription(
        action, clip, nuis,
        n_frames=config.n_frames, fps=config.fps,
        width=config.width, height=config.height,
    )
    return stream, motion_id, nuis, scene


def generate_dataset(config: GenerationConfig, library: MotionLibrary) -> list:
    """Render classes x videos_per_class clips; returns the manifest records.

    Writes frames (and groundtruth) under <out_root>/clips/<video_id>/ and
    the manifest to <out_root>/manifest.jsonl. Record paths are relative to
    the output root.
    """
    missing = sorted(set(config.classes) - set(library.actions))
    if missing:
        raise ValueError(f"classes {missing} not in the motion library")
    os.makedirs(config.out_root, exist_ok=True)
    records = []
    video_index = 0
    for action in config.classes:
        for _ in range(config.videos_per_class):
            _, motion_id, nuis, scene = _sample_video(config, library, action, video_index)
            video_id = f"{config.domain}-{video_index:05d}"
            rel_dir = os.path.join("clips", video_id)
            clip_dir = os.path.join(config.out_root, rel_dir)
            frames, gt = render_clip(scene)
            write_frames(clip_dir, frames, config.frame_format)
            if config.write_groundtruth:
                write_masks(clip_dir, gt)
                write_joints(clip_dir, gt)
            records.append({
                "video_id": video_id,
                "action": action,
                "domain": config.domain,
                "scene_id": scene_id_of(nuis),
                "motion_id": motion_id,
                "stream": {
                    "algorithm": RNG_ALGORITHM,
                    "master_seed": config.master_seed,
                    "video_index": video_index,
                },
                "nuisances": nuis.to_dict(),
                "frames_dir": rel_dir,
                "frame_format": config.frame_format,
                "n_frames": config.n_frames,
                "fps": config.fps,
                "width": config.width,
                "height": config.height,
            })
            video_index += 1
    write_manifest(os.path.join(config.out_root, MANIFEST_NAME), records)
    return records


def write_manifest(path: str, records: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(canonical_json(rec) + "\n")


def load_manifest(path: str) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest line: {exc}") from None
    seen = set()
    for rec in records:
        vid = rec["video_id"]
        if vid in seen:
            raise ValueError(f"duplicate video id {vid!r} in manifest")
        seen.add(vid)
    return records


def regenerate_video(record: dict, library: MotionLibrary, nuisances: NuisanceConfig):
    """Re-render one manifest record from its stream coordinates.

    Returns (frames, groundtruth); asserts the re-drawn motion and
    nuisances match the record, so any drift in sampling order is caught
    loudly rather than producing silently different pixels.
    """
    video_index = record["stream"]["video_index"]
    cfg = GenerationConfig(
        master_seed=record["stream"]["master_seed"],
        videos_per_class=1,
        classes=(record["action"],),
        nuisances=nuisances,
        out_root=".",
        n_frames=record["n_frames"],
        fps=record["fps"],
        width=record["width"],
        height=record["height"],
        domain=record["domain"],
        frame_format=record["frame_format"],
    )
    _, motion_id, nuis, scene = _sample_video(cfg, library, record["action"], video_index)
    if motion_id != record["motion_id"]:
        raise ValueError(
            f"regeneration drew motion {motion_id!r}, manifest says {record['motion_id']!r}"
        )
    if canonical_json(nuis.to_dict()) != canonical_json(record["nuisances"]):
        raise ValueError("regenerated nuisances differ from the manifest record")
    return render_clip(scene)


# --- discrete toy generative model -----------------------------------------


def _check_table(name: str, table: np.ndarray) -> np.ndarray:
    table = np.asarray(table, dtype=np.float64)
    if np.any(table < 0):
        raise ValueError(f"{name} has negative entries")
    sums = table.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=1e-12):
        raise ValueError(f"{name} rows must sum to 1, got {sums}")
    return table


@dataclass
class ToyGenerativeModel:
    """Finite (A, M, {N_i}) space with explicit tables and deterministic g."""

    actions: list
    p_action: np.ndarray  # (A,)
    p_motion_given_action: np.ndarray  # (A, M)
    nuisance_values: list  # per factor: list of values
    p_nuisances: list  # per factor: probability vector
    observe: object = None  # g(a_idx, m_idx, n_idx_tuple) -> hashable symbol

    def __post_init__(self):
        self.p_action = _check_table("P(A)", self.p_action)
        self.p_motion_given_action = _check_table("P(M|A)", self.p_motion_given_action)
        if len(self.p_action) != len(self.actions):
            raise ValueError("P(A) length disagrees with action list")
        if self.p_motion_given_action.shape[0] != len(self.actions):
            raise ValueError("P(M|A) rows disagree with action list")
        if len(self.nuisance_values) != len(self.p_nuisances):
            raise ValueError("nuisance values/tables disagree")
        self.p_nuisances = [
            _check_table(f"P(N_{i})", p) for i, p in enumerate(self.p_nuisances)
        ]
        for i, (vals, p) in enumerate(zip(self.nuisance_values, self.p_nuisances)):
            if len(vals) != len(p):
                raise ValueError(f"nuisance factor {i}: {len(vals)} values, {len(p)} probs")
        if self.observe is None:
            raise ValueError("observation function g is required")

    def tuple_iter(self):
        a_count = len(self.actions)
        m_count = self.p_motion_given_action.shape[1]
        n_axes = [range(len(v)) for v in self.nuisance_values]
        return itertools.product(range(a_count), range(m_count), *n_axes)

    def tuple_probability(self, a: int, m: int, ns: tuple) -> float:
        p = self.p_action[a] * self.p_motion_given_action[a, m]
        for i, n in enumerate(ns):
            p *= self.p_nuisances[i][n]
        return float(p)

    def observation_symbols(self) -> list:
        seen = {}
        for tup in self.tuple_iter():
            a, m, ns = tup[0], tup[1], tup[2:]
            sym = self.observe(a, m, ns)
            seen.setdefault(sym, 0.0)
            seen[sym] += self.tuple_probability(a, m, ns)
        return sorted((s for s, p in seen.items() if p > 0.0), key=repr)


def exact_posterior(model: ToyGenerativeModel, observation) -> np.ndarray:
    """P(A | x) by summing P(A)P(M|A)prod P(N_i) over tuples with g(...) = x."""
    weights = np.zeros(len(model.actions))
    for tup in model.tuple_iter():
        a, m, ns = tup[0], tup[1], tup[2:]
        if model.observe(a, m, ns) == observation:
            weights[a] += model.tuple_probability(a, m, ns)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError(f"observation {observation!r} has zero probability under the model")
    return weights / total


def observation_distribution(model: ToyGenerativeModel) -> dict:
    """P(x) for every reachable observation symbol."""
    dist: dict = {}
    for tup in model.tuple_iter():
        a, m, ns = tup[0], tup[1], tup[2:]
        sym = model.observe(a, m, ns)
        dist[sym] = dist.get(sym, 0.0) + model.tuple_probability(a, m, ns)
    return {s: p for s, p in dist.items() if p > 0.0}


def _draw_index(probs: np.ndarray, stream: RngStream) -> int:
    u = stream.uniform()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def sample_toy(model: ToyGenerativeModel, n: int, stream: RngStream):
    """n draws of (action index, observation symbol) from the joint law."""
    out = []
    for _ in range(n):
        a = _draw_index(model.p_action, stream)
        m = _draw_index(model.p_motion_given_action[a], stream)
        ns = tuple(_draw_index(p, stream) for p in model.p_nuisances)
        out.append((a, model.observe(a, m, ns)))
    return out


def random_toy_model(stream: RngStream, max_actions: int = 3, max_motions: int = 3,
                     max_nuisance_values: int = 4, n_factors: int = 2,
                     n_symbols: int = 6) -> ToyGenerativeModel:
    """Random tables plus a random observation map, for oracle comparisons."""

    def probs(k: int) -> np.ndarray:
        raw = np.array([stream.uniform(0.1, 1.0) for _ in range(k)])
        return raw / raw.sum()

    a = 2 + stream.randint(max_actions - 1)
    m = 1 + stream.randint(max_motions)
    sizes = [2 + stream.randint(max_nuisance_values - 1) for _ in range(n_factors)]
    table = {}
    for tup in itertools.product(range(a), range(m), *[range(s) for s in sizes]):
        table[(tup[0], tup[1], tup[2:])] = stream.randint(n_symbols)

    return ToyGenerativeModel(
        actions=[f"a{i}" for i in range(a)],
        p_action=probs(a),
        p_motion_given_action=np.stack([probs(m) for _ in range(a)]),
        nuisance_values=[list(range(s)) for s in sizes],
        p_nuisances=[probs(s) for s in sizes],
        observe=lambda ai, mi, ns: table[(ai, mi, ns)],
    )
