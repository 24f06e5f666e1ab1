"""Recover local joint rotations from world joint positions.

This is the bridge from position-only capture (one 3D point per joint per
frame) to a rotation-based clip that can be retargeted and serialized.

Solve strategy, per joint in topological order, vectorized over frames:

* one non-end-site child: the minimal (zero twist about the bone axis)
  rotation aligning the child's rest direction with its observed direction,
  expressed in the parent's solved frame;
* several children: the orthogonal Procrustes fit over all child
  directions, which pins the twist and is exact on data produced by
  forward kinematics;
* no children (leaves, or only end sites): identity, since positions
  carry no information about such a joint's rotation.

Bone lengths of the output are the topology's rest lengths; observed
directions are matched exactly, observed lengths are not preserved.
"""

from __future__ import annotations

import math

import numpy as np

from . import quat
from .skeleton import MotionClip, SkeletonTopology

_MIN_BONE = 1e-8


def positions_to_local_rotations(
    positions: np.ndarray, topology: SkeletonTopology, frame_time: float
) -> MotionClip:
    """Build a MotionClip whose FK reproduces observed bone directions.

    Args:
        positions: (F, J, 3) world joint positions, joints in topology order.
        topology: target skeleton; end-site joints are ignored by the solve.
        frame_time: seconds per frame for the resulting clip.

    Raises:
        ValueError: on shape mismatch, or a zero-length observed bone for
            any non-end-site joint (the message names frame and joint).
    """
    positions = np.asarray(positions, dtype=np.float64)
    j = topology.joint_count
    if positions.ndim != 3 or positions.shape[1:] != (j, 3):
        raise ValueError(f"positions must have shape (frames, {j}, 3), got {positions.shape}")
    f = positions.shape[0]

    for idx in range(1, j):
        if topology.end_site[idx]:
            continue
        d = positions[:, idx] - positions[:, topology.parents[idx]]
        lengths = np.linalg.norm(d, axis=1)
        short = np.where(lengths < _MIN_BONE)[0]
        if short.size:
            raise ValueError(
                f"zero-length observed bone at frame {int(short[0])}, "
                f"joint {topology.names[idx]!r}"
            )

    rotations = quat.identity((f, j))
    world = quat.identity((f, j))
    for idx in range(j):
        parent = topology.parents[idx]
        parent_world = world[:, parent] if parent >= 0 else quat.identity((f,))
        kids = [c for c in topology.children(idx) if not topology.end_site[c]]
        if kids:
            rest = topology.offsets[kids]
            rest = rest / np.linalg.norm(rest, axis=1, keepdims=True)
            obs = positions[:, kids] - positions[:, idx : idx + 1]
            obs = obs / np.linalg.norm(obs, axis=2, keepdims=True)
            local_obs = quat.rotate(quat.conjugate(parent_world)[:, None, :], obs)
            if len(kids) == 1:
                local = quat.shortest_arc(np.broadcast_to(rest[0], (f, 3)), local_obs[:, 0])
            else:
                local = np.empty((f, 4))
                for fr in range(f):
                    local[fr] = quat.from_matrix(_procrustes(rest, local_obs[fr]))
            rotations[:, idx] = local
        world[:, idx] = quat.mul(parent_world, rotations[:, idx])

    return MotionClip(topology, rotations, positions[:, 0].copy(), frame_time)


def _procrustes(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Proper rotation R minimizing sum |R s_i - d_i|^2 (Kabsch)."""
    h = src.T @ dst
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def parse_positions(text: str) -> tuple[np.ndarray, float]:
    """Parse the positional text format.

    One header line ``frame_time <seconds>``, then one line per
    (frame, joint) pair: ``frame_index joint_index x y z``. Every pair in
    the dense grid [0, frames) x [0, joints) must appear exactly once.

    Returns:
        (positions (F, J, 3), frame_time).
    """
    entries: dict[tuple[int, int], np.ndarray] = {}
    frame_time = None
    max_f = max_j = -1
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if frame_time is None:
            if toks[0] != "frame_time" or len(toks) != 2:
                raise ValueError(f"line {no}: expected 'frame_time <seconds>' header")
            try:
                frame_time = float(toks[1])
            except ValueError:
                raise ValueError(f"line {no}: bad frame_time {toks[1]!r}") from None
            if not math.isfinite(frame_time) or frame_time <= 0:
                raise ValueError(f"line {no}: frame_time must be positive")
            continue
        if len(toks) != 5:
            raise ValueError(f"line {no}: expected 'frame joint x y z', found {len(toks)} fields")
        try:
            fi, ji = int(toks[0]), int(toks[1])
            xyz = np.array([float(v) for v in toks[2:]])
        except ValueError:
            raise ValueError(f"line {no}: non-numeric field") from None
        if fi < 0 or ji < 0:
            raise ValueError(f"line {no}: negative frame or joint index")
        if not np.isfinite(xyz).all():
            raise ValueError(f"line {no}: non-finite coordinate")
        if (fi, ji) in entries:
            raise ValueError(f"line {no}: duplicate entry for frame {fi}, joint {ji}")
        entries[(fi, ji)] = xyz
        max_f, max_j = max(max_f, fi), max(max_j, ji)
    if frame_time is None:
        raise ValueError("missing frame_time header")
    if not entries:
        raise ValueError("no position rows found")
    frames, joints = max_f + 1, max_j + 1
    if len(entries) != frames * joints:
        for fi in range(frames):
            for ji in range(joints):
                if (fi, ji) not in entries:
                    raise ValueError(f"missing entry for frame {fi}, joint {ji}")
    out = np.empty((frames, joints, 3))
    for (fi, ji), xyz in entries.items():
        out[fi, ji] = xyz
    return out, frame_time


def format_positions(positions: np.ndarray, frame_time: float) -> str:
    positions = np.asarray(positions, dtype=np.float64)
    lines = [f"frame_time {frame_time:.6f}"]
    for fi in range(positions.shape[0]):
        for ji in range(positions.shape[1]):
            x, y, z = positions[fi, ji]
            lines.append(f"{fi} {ji} {x:.6f} {y:.6f} {z:.6f}")
    return "\n".join(lines) + "\n"
