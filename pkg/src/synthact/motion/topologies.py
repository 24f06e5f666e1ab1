"""Built-in named topologies.

``kinect25`` is the stock humanoid: a Kinect-style 25-joint body in a
T-pose, about 1.69 m tall at rest, hips (SpineBase) as root. Offsets are
meters, Y up. Capsule radii and coarse bone groups for shape randomization
live here too so the humanoid sampler and renderer agree on them.
"""

from __future__ import annotations

import numpy as np

from .skeleton import SkeletonTopology

# name, parent name (None = root), offset (m), capsule radius (m), group
_KINECT25 = [
    ("SpineBase", None, (0.0, 0.0, 0.0), 0.13, "torso"),
    ("SpineMid", "SpineBase", (0.0, 0.28, 0.0), 0.13, "torso"),
    ("SpineShoulder", "SpineMid", (0.0, 0.25, 0.0), 0.11, "torso"),
    ("Neck", "SpineShoulder", (0.0, 0.09, 0.0), 0.05, "torso"),
    ("Head", "Neck", (0.0, 0.16, 0.0), 0.10, "torso"),
    ("ShoulderLeft", "SpineShoulder", (-0.18, -0.02, 0.0), 0.05, "torso"),
    ("ElbowLeft", "ShoulderLeft", (-0.26, 0.0, 0.0), 0.045, "limb"),
    ("WristLeft", "ElbowLeft", (-0.24, 0.0, 0.0), 0.04, "limb"),
    ("HandLeft", "WristLeft", (-0.08, 0.0, 0.0), 0.035, "limb"),
    ("HandTipLeft", "HandLeft", (-0.08, 0.0, 0.0), 0.02, "limb"),
    ("ThumbLeft", "HandLeft", (-0.03, 0.0, 0.04), 0.018, "limb"),
    ("ShoulderRight", "SpineShoulder", (0.18, -0.02, 0.0), 0.05, "torso"),
    ("ElbowRight", "ShoulderRight", (0.26, 0.0, 0.0), 0.045, "limb"),
    ("WristRight", "ElbowRight", (0.24, 0.0, 0.0), 0.04, "limb"),
    ("HandRight", "WristRight", (0.08, 0.0, 0.0), 0.035, "limb"),
    ("HandTipRight", "HandRight", (0.08, 0.0, 0.0), 0.02, "limb"),
    ("ThumbRight", "HandRight", (0.03, 0.0, 0.04), 0.018, "limb"),
    ("HipLeft", "SpineBase", (-0.09, -0.04, 0.0), 0.07, "torso"),
    ("KneeLeft", "HipLeft", (0.0, -0.42, 0.0), 0.065, "limb"),
    ("AnkleLeft", "KneeLeft", (0.0, -0.40, 0.0), 0.05, "limb"),
    ("FootLeft", "AnkleLeft", (0.0, -0.05, 0.12), 0.035, "limb"),
    ("HipRight", "SpineBase", (0.09, -0.04, 0.0), 0.07, "torso"),
    ("KneeRight", "HipRight", (0.0, -0.42, 0.0), 0.065, "limb"),
    ("AnkleRight", "KneeRight", (0.0, -0.40, 0.0), 0.05, "limb"),
    ("FootRight", "AnkleRight", (0.0, -0.05, 0.12), 0.035, "limb"),
]

KINECT25_NAMES = [row[0] for row in _KINECT25]
# reference radius used to normalize the sampled "limb radius" nuisance
KINECT25_REFERENCE_LIMB_RADIUS = 0.045
# rest height of the hips above the feet; motion authors place the root here
KINECT25_ROOT_REST_HEIGHT = 0.91


def kinect25() -> SkeletonTopology:
    names = KINECT25_NAMES
    index = {n: i for i, n in enumerate(names)}
    parents = [-1 if row[1] is None else index[row[1]] for row in _KINECT25]
    offsets = np.array([row[2] for row in _KINECT25])
    return SkeletonTopology(
        names=list(names),
        parents=np.array(parents),
        offsets=offsets,
        end_site=np.zeros(len(names), dtype=bool),
    )


def kinect25_radii() -> dict[str, float]:
    """Capsule radius per joint name (radius of the bone ending at it)."""
    return {row[0]: row[3] for row in _KINECT25}


def kinect25_groups() -> dict[str, str]:
    return {row[0]: row[4] for row in _KINECT25}


def chain(n: int, spacing: float = 0.25) -> SkeletonTopology:
    """Simple n-joint vertical chain, handy for tests and converters."""
    if n < 2:
        raise ValueError("chain needs at least 2 joints")
    return SkeletonTopology(
        names=[f"j{i}" for i in range(n)],
        parents=np.arange(-1, n - 1),
        offsets=np.array([[0.0, 0.0, 0.0]] + [[0.0, spacing, 0.0]] * (n - 1)),
        end_site=np.zeros(n, dtype=bool),
    )


_REGISTRY = {"kinect25": kinect25}


def named_topology(name: str) -> SkeletonTopology:
    if name.startswith("chain"):
        try:
            return chain(int(name[len("chain"):]))
        except ValueError:
            pass
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown topology {name!r}; known: {sorted(_REGISTRY)} or chainN") from None
