"""Skeleton topology, poses, motion clips, and forward kinematics.

Coordinate system is right-handed, Y up, meters everywhere. Local joint
rotations are unit quaternions; euler angles only exist at file boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat


@dataclass
class SkeletonTopology:
    """Joint hierarchy with rest offsets.

    Attributes:
        names: joint names, unique, root first.
        parents: parent index per joint, -1 for the root only.
        offsets: (J, 3) rest offset of each joint in its parent frame.
            The root's offset is always (0, 0, 0); world placement of the
            root comes from the per-frame root translation.
        end_site: bool flags; end sites carry no channels and are excluded
            from rotation solving.
    """

    names: list[str]
    parents: np.ndarray
    offsets: np.ndarray
    end_site: np.ndarray

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=np.int64)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        self.end_site = np.asarray(self.end_site, dtype=bool)
        j = len(self.names)
        if self.parents.shape != (j,) or self.offsets.shape != (j, 3) or self.end_site.shape != (j,):
            raise ValueError("topology arrays disagree on joint count")
        if len(set(self.names)) != j:
            raise ValueError("joint names must be unique")
        if j == 0 or self.parents[0] != -1 or np.any(self.parents[1:] < 0):
            raise ValueError("exactly one root joint, at index 0")
        if np.any(self.parents[1:] >= np.arange(1, j)):
            raise ValueError("parents must precede children (topological order)")
        norms = np.linalg.norm(self.offsets[1:], axis=1)
        bad = np.where((norms <= 0) & ~self.end_site[1:])[0]
        if bad.size:
            raise ValueError(f"zero-length rest offset at joint {self.names[bad[0] + 1]!r}")

    @property
    def joint_count(self) -> int:
        return len(self.names)

    def children(self, index: int) -> list[int]:
        return [int(c) for c in np.where(self.parents == index)[0]]

    def same_structure(self, other: "SkeletonTopology") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.parents, other.parents)
            and np.array_equal(self.end_site, other.end_site)
        )


@dataclass
class Pose:
    """Local rotations per joint plus the root world translation."""

    rotations: np.ndarray  # (J, 4) unit quaternions
    root_translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64)


@dataclass
class MotionClip:
    """A fixed-rate sequence of poses over one topology."""

    topology: SkeletonTopology
    rotations: np.ndarray  # (F, J, 4)
    root_positions: np.ndarray  # (F, 3)
    frame_time: float

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.root_positions = np.asarray(self.root_positions, dtype=np.float64)
        if self.frame_time <= 0:
            raise ValueError("frame_time must be positive")
        f = self.rotations.shape[0]
        if self.rotations.shape != (f, self.topology.joint_count, 4):
            raise ValueError("rotation array shape disagrees with topology")
        if self.root_positions.shape != (f, 3):
            raise ValueError("root position array shape disagrees with frame count")

    @property
    def frame_count(self) -> int:
        return int(self.rotations.shape[0])

    def pose(self, frame: int) -> Pose:
        return Pose(self.rotations[frame], self.root_positions[frame])


def fk_world(
    topology: SkeletonTopology, rotations: np.ndarray, root_positions: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """World rotations and positions for whole pose tracks.

    Args:
        rotations: (F, J, 4) local unit quaternions.
        root_positions: (F, 3) root world translations.

    Returns:
        (world_rot (F, J, 4), world_pos (F, J, 3)). The root transform is
        exactly (rotations[:, 0], root_positions); each child sits at its
        parent's world transform applied to its rest offset.
    """
    rotations = np.asarray(rotations, dtype=np.float64)
    root_positions = np.asarray(root_positions, dtype=np.float64)
    f, j = rotations.shape[0], topology.joint_count
    world_rot = np.empty((f, j, 4))
    world_pos = np.empty((f, j, 3))
    world_rot[:, 0] = rotations[:, 0]
    world_pos[:, 0] = root_positions
    for idx in range(1, j):
        p = topology.parents[idx]
        world_rot[:, idx] = quat.mul(world_rot[:, p], rotations[:, idx])
        world_pos[:, idx] = world_pos[:, p] + quat.rotate(world_rot[:, p], topology.offsets[idx])
    return world_rot, world_pos


def forward_kinematics(pose: Pose, topology: SkeletonTopology) -> np.ndarray:
    """World joint positions (J, 3) for a single pose."""
    _, pos = fk_world(topology, pose.rotations[None], pose.root_translation[None])
    return pos[0]


def clip_positions(clip: MotionClip) -> np.ndarray:
    """World joint positions (F, J, 3) for every frame of a clip."""
    _, pos = fk_world(clip.topology, clip.rotations, clip.root_positions)
    return pos


def rest_positions(topology: SkeletonTopology) -> np.ndarray:
    """Joint positions of the rest pose (identity rotations, root at origin)."""
    j = topology.joint_count
    pos = np.zeros((j, 3))
    for idx in range(1, j):
        pos[idx] = pos[topology.parents[idx]] + topology.offsets[idx]
    return pos


def skeleton_height(topology: SkeletonTopology) -> float:
    """Vertical extent (max y - min y) of the rest pose, end sites included."""
    ys = rest_positions(topology)[:, 1]
    return float(ys.max() - ys.min())


def rescale_to_topology(clip: MotionClip, target: SkeletonTopology) -> MotionClip:
    """Retarget a clip onto a same-structure topology with different offsets.

    Local rotations are copied; the root trajectory is scaled by the ratio
    of skeleton heights so ground contact and travel distances stay
    proportionate. Bone lengths of the output are the target's by
    construction.
    """
    if not clip.topology.same_structure(target):
        raise ValueError("target topology structure (names/parents/end sites) must match")
    src_h = skeleton_height(clip.topology)
    if src_h <= 1e-9:
        raise ValueError("source skeleton has zero height; cannot derive scale")
    scale = skeleton_height(target) / src_h
    return MotionClip(
        topology=target,
        rotations=clip.rotations.copy(),
        root_positions=clip.root_positions * scale,
        frame_time=clip.frame_time,
    )
