from .camera import CameraModel, build_camera, pixel_rays, project, project_points
from .clip import (
    DEFAULT_CLIP_FRAMES,
    FrameBuffer,
    Groundtruth,
    GroundtruthFrame,
    SceneDescription,
    pingpong_index,
    render_clip,
    source_frame,
    write_frames,
    write_joints,
    write_masks,
)
from .raster import capsules_of_pose, rasterize_capsules, render_background

__all__ = [
    "CameraModel",
    "DEFAULT_CLIP_FRAMES",
    "FrameBuffer",
    "Groundtruth",
    "GroundtruthFrame",
    "SceneDescription",
    "build_camera",
    "capsules_of_pose",
    "pingpong_index",
    "pixel_rays",
    "project",
    "project_points",
    "rasterize_capsules",
    "render_background",
    "render_clip",
    "source_frame",
    "write_frames",
    "write_joints",
    "write_masks",
]
