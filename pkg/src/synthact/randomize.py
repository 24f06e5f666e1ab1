"""Uniform nuisance-factor sampling with reproducible per-video streams.

Every scene factor that is *not* the action itself (camera pose, textures,
body shape) is drawn independently and uniformly from a configured range.
Draw order is part of the contract: for a fixed stream the sequence is

    distance, azimuth, elevation,
    sky texture (index, then parameters if unpinned),
    floor texture, body texture,
    height, limb ratios (arm L, arm R, leg L, leg R), torso scale, limb radius

so a (master_seed, video_index, config) triple determines the sample byte
for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .motion import SkeletonTopology, rest_positions
from .motion.topologies import (
    KINECT25_REFERENCE_LIMB_RADIUS,
    kinect25,
    kinect25_groups,
    kinect25_radii,
)
from .rng import RngStream
from .textures import TextureRef, default_pool, instantiate, parse_pool_tokens

_LIMB_ORDER = ("arm_left", "arm_right", "leg_left", "leg_right")
_ARM_PARTS = ("Elbow", "Wrist", "Hand", "Thumb")


def _limb_of(name: str) -> str | None:
    if kinect25_groups().get(name) != "limb":
        return None
    side = "left" if "Left" in name else "right"
    kind = "arm" if any(p in name for p in _ARM_PARTS) else "leg"
    return f"{kind}_{side}"


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"range min {self.lo} exceeds max {self.hi}")

    def draw(self, stream: RngStream) -> float:
        return self.lo if self.lo == self.hi else stream.uniform(self.lo, self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class NuisanceConfig:
    """Ranges for every randomized factor. Uniform within each range."""

    camera_distance: Range = Range(2.0, 6.0)
    azimuth: Range = Range(0.0, 360.0)
    elevation: Range = Range(0.0, 60.0)
    texture_pool: tuple[TextureRef, ...] = field(default_factory=lambda: tuple(default_pool()))
    height: Range = Range(1.5, 1.9)
    limb_ratio: Range = Range(0.85, 1.15)
    limb_radius: Range = Range(0.04, 0.09)
    torso_scale: Range = Range(0.9, 1.1)

    def __post_init__(self):
        if not self.texture_pool:
            raise ValueError("texture pool cannot be empty")
        if not (0.5 < self.height.lo and self.height.hi < 2.5):
            raise ValueError(
                f"height range [{self.height.lo}, {self.height.hi}] must lie inside (0.5, 2.5) m"
            )
        for label, r in (
            ("camera_distance", self.camera_distance),
            ("limb_ratio", self.limb_ratio),
            ("limb_radius", self.limb_radius),
            ("torso_scale", self.torso_scale),
        ):
            if r.lo <= 0:
                raise ValueError(f"{label} range must be positive, got min {r.lo}")


@dataclass(frozen=True)
class CameraParams:
    distance: float
    azimuth_deg: float
    elevation_deg: float

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraParams":
        return CameraParams(d["distance"], d["azimuth_deg"], d["elevation_deg"])


@dataclass(frozen=True)
class TextureDraw:
    """One realized pool pick: identity plus fully-pinned parameters."""

    kind: str
    pool_id: str
    params: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "pool_id": self.pool_id, "params": self.params}

    @staticmethod
    def from_dict(d: dict) -> "TextureDraw":
        return TextureDraw(d["kind"], d["pool_id"], dict(d["params"]))


@dataclass(frozen=True)
class HumanoidShape:
    height: float
    length_multipliers: dict  # joint name -> bone length multiplier
    radii: dict  # joint name -> capsule radius of the bone ending there, meters

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("height must be positive")
        bad = [k for k, v in self.length_multipliers.items() if v <= 0]
        bad += [k for k, v in self.radii.items() if v <= 0]
        if bad:
            raise ValueError(f"non-positive shape parameters for {sorted(set(bad))}")

    def shape_id(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "length_multipliers": dict(sorted(self.length_multipliers.items())),
            "radii": dict(sorted(self.radii.items())),
        }

    @staticmethod
    def from_dict(d: dict) -> "HumanoidShape":
        return HumanoidShape(d["height"], dict(d["length_multipliers"]), dict(d["radii"]))


@dataclass(frozen=True)
class NuisanceSample:
    camera: CameraParams
    sky: TextureDraw
    floor: TextureDraw
    body: TextureDraw
    humanoid: HumanoidShape

    def to_dict(self) -> dict:
        return {
            "camera": self.camera.to_dict(),
            "sky": self.sky.to_dict(),
            "floor": self.floor.to_dict(),
            "body": self.body.to_dict(),
            "humanoid": self.humanoid.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "NuisanceSample":
        return NuisanceSample(
            camera=CameraParams.from_dict(d["camera"]),
            sky=TextureDraw.from_dict(d["sky"]),
            floor=TextureDraw.from_dict(d["floor"]),
            body=TextureDraw.from_dict(d["body"]),
            humanoid=HumanoidShape.from_dict(d["humanoid"]),
        )


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _draw_texture(pool: tuple[TextureRef, ...], stream: RngStream) -> TextureDraw:
    ref = pool[stream.randint(len(pool))]
    return TextureDraw(ref.kind, ref.pool_id, instantiate(ref, stream))


def sample_humanoid(
    config: NuisanceConfig, stream: RngStream
) -> tuple[HumanoidShape, SkeletonTopology]:
    """Draw a body shape and build its skeleton, normalized to the drawn height."""
    template = kinect25()
    height = config.height.draw(stream)
    limb_mult = {limb: config.limb_ratio.draw(stream) for limb in _LIMB_ORDER}
    torso = config.torso_scale.draw(stream)
    radius = config.limb_radius.draw(stream)

    mults = {}
    for name in template.names[1:]:
        limb = _limb_of(name)
        mults[name] = limb_mult[limb] if limb else torso
    rscale = radius / KINECT25_REFERENCE_LIMB_RADIUS
    radii = {name: r * rscale for name, r in kinect25_radii().items()}
    shape = HumanoidShape(height=height, length_multipliers=mults, radii=radii)
    return shape, derive_topology(shape)


def derive_topology(shape: HumanoidShape, template: SkeletonTopology | None = None) -> SkeletonTopology:
    """Template offsets scaled per bone, then uniformly rescaled to shape.height."""
    topo = template if template is not None else kinect25()
    offsets = topo.offsets.copy()
    for j, name in enumerate(topo.names):
        if j == 0:
            continue
        offsets[j] *= shape.length_multipliers.get(name, 1.0)
    scaled = SkeletonTopology(
        names=list(topo.names),
        parents=topo.parents.copy(),
        offsets=offsets,
        end_site=list(topo.end_site),
    )
    pos = rest_positions(scaled)
    h = float(pos[:, 1].max() - pos[:, 1].min())
    if h <= 1e-9:
        raise ValueError("scaled template has zero height")
    scaled.offsets *= shape.height / h
    return scaled


def sample_nuisances(config: NuisanceConfig, stream: RngStream) -> NuisanceSample:
    """One independent uniform draw per factor, in the documented order."""
    camera = CameraParams(
        distance=config.camera_distance.draw(stream),
        azimuth_deg=config.azimuth.draw(stream),
        elevation_deg=config.elevation.draw(stream),
    )
    sky = _draw_texture(config.texture_pool, stream)
    floor = _draw_texture(config.texture_pool, stream)
    body = _draw_texture(config.texture_pool, stream)
    humanoid, _ = sample_humanoid(config, stream)
    return NuisanceSample(camera=camera, sky=sky, floor=floor, body=body, humanoid=humanoid)


_RANGE_KEYS = {
    "distance": "camera_distance",
    "azimuth": "azimuth",
    "elevation": "elevation",
    "height": "height",
    "limb_ratio": "limb_ratio",
    "limb_radius": "limb_radius",
    "torso_scale": "torso_scale",
}


def parse_config(text: str) -> NuisanceConfig:
    """key = value grammar, one setting per line.

    Range keys (distance, azimuth, elevation, height, limb_ratio,
    limb_radius, torso_scale) take "min max"; `textures` takes
    space-separated pool tokens. '#' starts a comment. Unset keys keep
    their defaults.
    """
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _RANGE_KEYS:
            parts = value.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: {key} needs two numbers, got {value!r}")
            try:
                lo, hi = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric range for {key}: {value!r}") from None
            try:
                kwargs[_RANGE_KEYS[key]] = Range(lo, hi)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        elif key == "textures":
            try:
                kwargs["texture_pool"] = tuple(parse_pool_tokens(value.split()))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
    try:
        return NuisanceConfig(**kwargs)
    except ValueError as exc:
        raise ValueError(f"invalid config: {exc}") from None


def load_config(path: str) -> NuisanceConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
