from .bvh import BvhParseError, parse_bvh, write_bvh
from .skeleton import (
    MotionClip,
    Pose,
    SkeletonTopology,
    clip_positions,
    fk_world,
    forward_kinematics,
    rescale_to_topology,
    rest_positions,
    skeleton_height,
)
from .solve import format_positions, parse_positions, positions_to_local_rotations
from .topologies import chain, kinect25, kinect25_groups, kinect25_radii, named_topology

__all__ = [
    "BvhParseError",
    "MotionClip",
    "Pose",
    "SkeletonTopology",
    "chain",
    "clip_positions",
    "fk_world",
    "format_positions",
    "forward_kinematics",
    "kinect25",
    "kinect25_groups",
    "kinect25_radii",
    "named_topology",
    "parse_bvh",
    "parse_positions",
    "positions_to_local_rotations",
    "rescale_to_topology",
    "rest_positions",
    "skeleton_height",
    "write_bvh",
]
