"""Deterministic procedural motion catalog on the kinect25 body.

Eight gross-movement action families, each with a few amplitude/speed
variants, authored as smooth joint-angle tracks. These ship with the
package so dataset generation works out of the box without external
capture data; directory-based motion libraries remain supported.
"""

from __future__ import annotations

import numpy as np

from . import quat
from .skeleton import MotionClip
from .topologies import KINECT25_ROOT_REST_HEIGHT, kinect25

ACTIONS = ["wave", "squat", "kick", "spin", "bow", "jump", "march", "clap"]
VARIANTS_PER_ACTION = 4

_FRAMES = 64
_FPS = 30.0

_AXIS = {"X": np.array([1.0, 0.0, 0.0]), "Y": np.array([0.0, 1.0, 0.0]), "Z": np.array([0.0, 0.0, 1.0])}

# (amplitude scale, speed scale, phase offset in cycles)
_VARIANTS = [(1.0, 1.0, 0.0), (0.8, 1.15, 0.1), (1.2, 0.9, 0.0), (0.9, 1.05, 0.2)]


class _Rig:
    """Accumulates per-joint rotations; first applied call is outermost."""

    def __init__(self, frames: int):
        self.topo = kinect25()
        self.index = {n: i for i, n in enumerate(self.topo.names)}
        self.rot = quat.identity((frames, self.topo.joint_count))
        self.root_y = np.full(frames, KINECT25_ROOT_REST_HEIGHT)
        self.root_xz = np.zeros((frames, 2))

    def turn(self, joint: str, axis: str, degrees: np.ndarray):
        q = quat.from_axis_angle(_AXIS[axis], np.deg2rad(np.asarray(degrees, dtype=np.float64)))
        i = self.index[joint]
        self.rot[:, i] = quat.mul(self.rot[:, i], q)

    def clip(self) -> MotionClip:
        root = np.column_stack([self.root_xz[:, 0], self.root_y, self.root_xz[:, 1]])
        return MotionClip(self.topo, self.rot, root, 1.0 / _FPS)


def _arms_down(r: _Rig, frames: int, degrees: float = 70.0):
    hold = np.full(frames, degrees)
    r.turn("ShoulderLeft", "Z", hold)
    r.turn("ShoulderRight", "Z", -hold)


def _cycles(frames: int, hz: float, phase: float) -> np.ndarray:
    t = np.arange(frames) / _FPS
    return 2.0 * np.pi * (hz * t + phase)


def builtin_clip(action: str, variant: int) -> MotionClip:
    """One catalog clip; deterministic in (action, variant)."""
    if action not in ACTIONS:
        raise ValueError(f"unknown catalog action {action!r}; known: {ACTIONS}")
    if not 0 <= variant < VARIANTS_PER_ACTION:
        raise ValueError(f"variant must be in [0, {VARIANTS_PER_ACTION})")
    amp, speed, phase = _VARIANTS[variant]
    f = _FRAMES
    r = _Rig(f)

    if action == "wave":
        _arms_down(r, f)
        r.turn("ShoulderLeft", "Z", np.zeros(f))  # left stays down
        w = _cycles(f, 1.2 * speed, phase)
        # right arm raised, forearm oscillating
        r.turn("ShoulderRight", "Z", np.full(f, 140.0 * amp))
        r.turn("ElbowRight", "Z", -30.0 * amp * np.sin(w))
        r.turn("Neck", "Z", 6.0 * amp * np.sin(w))
    elif action == "squat":
        _arms_down(r, f, 30.0)
        w = _cycles(f, 0.6 * speed, phase)
        dip = 0.5 - 0.5 * np.cos(w)  # 0..1
        bend = 65.0 * amp * dip
        for side in ("Left", "Right"):
            r.turn(f"Hip{side}", "X", bend)
            r.turn(f"Knee{side}", "X", -2.0 * bend)
            r.turn(f"Ankle{side}", "X", bend)
        r.root_y = KINECT25_ROOT_REST_HEIGHT - 0.26 * amp * dip
        r.turn("ShoulderRight", "Y", -50.0 * dip)
        r.turn("ShoulderLeft", "Y", 50.0 * dip)
    elif action == "kick":
        _arms_down(r, f)
        w = _cycles(f, 0.8 * speed, phase)
        swing = np.clip(np.sin(w), -0.25, 1.0)
        r.turn("HipRight", "X", 75.0 * amp * swing)
        r.turn("KneeRight", "X", -25.0 * amp * np.clip(-np.sin(w), 0.0, 1.0))
        r.turn("HipLeft", "X", -10.0 * amp * swing)
        r.turn("SpineMid", "X", -12.0 * amp * swing)
    elif action == "spin":
        _arms_down(r, f, 55.0)
        t = np.arange(f) / (f - 1)
        r.turn("SpineBase", "Y", 360.0 * speed * t + 360.0 * phase)
        w = _cycles(f, 0.7 * speed, phase)
        r.turn("SpineMid", "Z", 8.0 * amp * np.sin(w))
    elif action == "bow":
        _arms_down(r, f)
        w = _cycles(f, 0.5 * speed, phase)
        lean = 55.0 * amp * (0.5 - 0.5 * np.cos(w))
        r.turn("SpineMid", "X", lean * 0.6)
        r.turn("SpineShoulder", "X", lean * 0.4)
        r.turn("Neck", "X", lean * 0.25)
        r.root_y = KINECT25_ROOT_REST_HEIGHT - 0.03 * amp * (0.5 - 0.5 * np.cos(w))
    elif action == "jump":
        w = _cycles(f, 1.0 * speed, phase)
        updown = np.abs(np.sin(w))
        r.root_y = KINECT25_ROOT_REST_HEIGHT + 0.16 * amp * updown
        raise_arm = 30.0 + 110.0 * amp * updown
        r.turn("ShoulderLeft", "Z", 70.0 - raise_arm)
        r.turn("ShoulderRight", "Z", -(70.0 - raise_arm))
        r.turn("HipLeft", "Z", -14.0 * amp * updown)
        r.turn("HipRight", "Z", 14.0 * amp * updown)
    elif action == "march":
        _arms_down(r, f)
        w = _cycles(f, 1.1 * speed, phase)
        s = np.sin(w)
        r.turn("HipLeft", "X", 40.0 * amp * np.clip(s, 0.0, 1.0))
        r.turn("HipRight", "X", 40.0 * amp * np.clip(-s, 0.0, 1.0))
        r.turn("KneeLeft", "X", -50.0 * amp * np.clip(s, 0.0, 1.0))
        r.turn("KneeRight", "X", -50.0 * amp * np.clip(-s, 0.0, 1.0))
        r.turn("ElbowLeft", "X", -20.0 * amp * s - 20.0)
        r.turn("ElbowRight", "X", 20.0 * amp * s - 20.0)
        r.root_y = KINECT25_ROOT_REST_HEIGHT - 0.02 * amp * np.abs(s)
    else:  # clap
        w = _cycles(f, 1.3 * speed, phase)
        meet = 0.5 + 0.5 * np.sin(w)
        r.turn("ShoulderLeft", "Y", 70.0 * meet)
        r.turn("ShoulderRight", "Y", -70.0 * meet)
        r.turn("ShoulderLeft", "Z", 25.0)
        r.turn("ShoulderRight", "Z", -25.0)
        r.turn("ElbowLeft", "Y", 30.0 * meet)
        r.turn("ElbowRight", "Y", -30.0 * meet)

    return r.clip()


def catalog_entries(actions=None) -> list[tuple[str, str, MotionClip]]:
    """(motion_id, action, clip) triples for the requested actions."""
    chosen = list(actions) if actions is not None else list(ACTIONS)
    out = []
    for action in chosen:
        for v in range(VARIANTS_PER_ACTION):
            out.append((f"builtin:{action}/{v}", action, builtin_clip(action, v)))
    return out
