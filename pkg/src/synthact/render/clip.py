"""Scene description, whole-clip rendering, and frame/groundtruth writers."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ..motion import MotionClip, clip_positions
from ..randomize import NuisanceSample
from ..textures import realize
from .camera import CameraModel, build_camera, pixel_rays, project_points
from .raster import capsules_of_pose, rasterize_capsules, render_background

DEFAULT_CLIP_FRAMES = 32


@dataclass(frozen=True)
class SceneDescription:
    action: str
    motion: MotionClip
    nuisances: NuisanceSample
    n_frames: int = DEFAULT_CLIP_FRAMES
    fps: float = 30.0
    width: int = 640
    height: int = 480
    fov_deg: float = 90.0

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("clip needs at least one frame")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass
class FrameBuffer:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64, +inf where only sky


@dataclass
class GroundtruthFrame:
    mask: np.ndarray  # (H, W) bool
    joints_uv: np.ndarray  # (J, 2) pixel coordinates
    joints_depth: np.ndarray  # (J,) forward-axis depth
    visible: np.ndarray  # (J,) bool


@dataclass
class Groundtruth:
    action: str
    joint_names: list
    frames: list = field(default_factory=list)


def pingpong_index(frame: int, length: int) -> int:
    """Fold an unbounded frame index into [0, length) with reflection."""
    if length == 1:
        return 0
    period = 2 * length - 2
    m = frame % period
    return m if m < length else period - m


def source_frame(k: int, fps: float, motion: MotionClip) -> int:
    """Nearest motion pose for output frame k, ping-pong looped."""
    raw = int(round((k / fps) / motion.frame_time))
    return pingpong_index(raw, motion.frame_count)


def _quantize(color: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)


def render_clip(scene: SceneDescription) -> tuple[list, Groundtruth]:
    """All frames of one video: fixed camera, per-frame capsule pass.

    Deterministic in the scene description; background is rendered once
    and reused because the camera never moves within a clip.
    """
    motion = scene.motion
    nuis = scene.nuisances
    anchor = motion.root_positions[0]
    camera = build_camera(
        nuis.camera.distance,
        nuis.camera.azimuth_deg,
        nuis.camera.elevation_deg,
        anchor,
        width=scene.width,
        height=scene.height,
        fov_deg=scene.fov_deg,
    )
    body_tex = realize(nuis.body.kind, nuis.body.params)
    floor_tex = realize(nuis.floor.kind, nuis.floor.params)
    sky_tex = realize(nuis.sky.kind, nuis.sky.params)

    bg_color, bg_depth = render_background(camera, floor_tex, sky_tex)
    rays = pixel_rays(camera)
    all_positions = clip_positions(motion)
    radii = nuis.humanoid.radii
    topo = motion.topology

    # a joint is visible when the surface at its pixel belongs to one of its
    # incident capsules (the bone ending at it or a bone leaving it); depth
    # comparisons against its own near-vertical bone would misfire at steep
    # elevations, ownership does not
    incident = []
    for j in range(topo.joint_count):
        own = {j} if j > 0 and not topo.end_site[j] else set()
        own.update(c for c in topo.children(j) if not topo.end_site[c])
        incident.append(own)

    frames: list[FrameBuffer] = []
    gt = Groundtruth(action=scene.action, joint_names=list(topo.names))
    for k in range(scene.n_frames):
        positions = all_positions[source_frame(k, scene.fps, motion)]
        color = bg_color.copy()
        depth = bg_depth.copy()
        owner = np.full(depth.shape, -1, dtype=np.int32)
        rasterize_capsules(
            camera, capsules_of_pose(topo, positions, radii), body_tex, color, depth, owner, rays
        )

        uv, jdepth, in_front = project_points(camera, positions)
        ui = np.clip(np.floor(uv[:, 0]).astype(int), 0, scene.width - 1)
        vi = np.clip(np.floor(uv[:, 1]).astype(int), 0, scene.height - 1)
        inside = (
            in_front
            & (uv[:, 0] >= 0)
            & (uv[:, 0] < scene.width)
            & (uv[:, 1] >= 0)
            & (uv[:, 1] < scene.height)
        )
        owner_at = owner[vi, ui]
        unoccluded = np.array(
            [owner_at[j] in incident[j] for j in range(topo.joint_count)]
        )
        visible = inside & unoccluded

        frames.append(FrameBuffer(rgb=_quantize(color), depth=depth))
        gt.frames.append(
            GroundtruthFrame(
                mask=owner >= 0, joints_uv=uv, joints_depth=jdepth, visible=visible
            )
        )
    return frames, gt


def write_frames(out_dir: str, frames: list, fmt: str = "png") -> list:
    if fmt not in ("png", "ppm"):
        raise ValueError(f"unsupported frame format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, fb in enumerate(frames):
        path = os.path.join(out_dir, f"frame_{i:05d}.{fmt}")
        Image.fromarray(fb.rgb).save(path)
        paths.append(path)
    return paths


def write_masks(out_dir: str, groundtruth: Groundtruth) -> list:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, g in enumerate(groundtruth.frames):
        path = os.path.join(out_dir, f"mask_{i:05d}.png")
        Image.fromarray(g.mask.astype(np.uint8) * 255, mode="L").save(path)
        paths.append(path)
    return paths


def write_joints(out_dir: str, groundtruth: Groundtruth) -> str:
    """One line per frame and joint: `frame joint u v visible`."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "joints.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for i, g in enumerate(groundtruth.frames):
            for j, name in enumerate(groundtruth.joint_names):
                u, v = g.joints_uv[j]
                fh.write(f"{i} {name} {u:.3f} {v:.3f} {int(g.visible[j])}\n")
    return path
