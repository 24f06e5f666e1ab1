"""Pinhole camera: placement on a sphere around the subject, projection.

Spherical placement convention (angles in degrees):

    position = anchor + distance * (cos(el)*sin(az), sin(el), cos(el)*cos(az))

so azimuth 0, elevation 0 puts the camera on the +Z side at the anchor's
height, looking along -Z. The camera always looks at the anchor; world +Y
resolves roll. Screen x grows right, screen y grows down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_FOV_DEG = 90.0
NEAR_PLANE = 0.1


@dataclass(frozen=True)
class CameraModel:
    position: np.ndarray  # (3,) meters
    right: np.ndarray  # unit, screen x
    down: np.ndarray  # unit, screen y
    forward: np.ndarray  # unit, optical axis
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    fov_deg: float = DEFAULT_FOV_DEG

    @property
    def focal(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


def build_camera(
    distance: float,
    azimuth_deg: float,
    elevation_deg: float,
    anchor: np.ndarray,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> CameraModel:
    if distance <= 0:
        raise ValueError(f"camera distance must be positive, got {distance}")
    el = math.radians(elevation_deg)
    if abs(math.cos(el)) < 1e-9:
        raise ValueError("elevation of +-90 degrees leaves the up vector undefined")
    az = math.radians(azimuth_deg)
    anchor = np.asarray(anchor, dtype=np.float64)
    offset = np.array(
        [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
    )
    position = anchor + distance * offset
    forward = anchor - position
    forward = forward / np.linalg.norm(forward)
    world_up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, world_up)
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return CameraModel(
        position=position,
        right=right,
        down=-up,
        forward=forward,
        width=width,
        height=height,
        fov_deg=fov_deg,
    )


def project(camera: CameraModel, point: np.ndarray) -> tuple[tuple[float, float], float] | None:
    """Pixel coordinates and forward-axis depth, or None behind the near plane."""
    rel = np.asarray(point, dtype=np.float64) - camera.position
    z = float(rel @ camera.forward)
    if z <= NEAR_PLANE:
        return None
    cx, cy = camera.center
    u = cx + camera.focal * float(rel @ camera.right) / z
    v = cy + camera.focal * float(rel @ camera.down) / z
    return (u, v), z


def project_points(camera: CameraModel, points: np.ndarray):
    """Vectorized projection: (N,3) -> uv (N,2), depth (N,), valid (N,) bool."""
    rel = np.asarray(points, dtype=np.float64) - camera.position
    z = rel @ camera.forward
    valid = z > NEAR_PLANE
    zs = np.where(valid, z, 1.0)
    cx, cy = camera.center
    uv = np.stack(
        [
            cx + camera.focal * (rel @ camera.right) / zs,
            cy + camera.focal * (rel @ camera.down) / zs,
        ],
        axis=-1,
    )
    return uv, z, valid


def pixel_rays(camera: CameraModel) -> np.ndarray:
    """(H, W, 3) world-space ray directions through pixel centers.

    Directions are scaled so the forward component is exactly 1: the ray
    parameter t of origin + t*dir is then the forward-axis depth directly.
    """
    cx, cy = camera.center
    xs = (np.arange(camera.width) + 0.5 - cx) / camera.focal
    ys = (np.arange(camera.height) + 0.5 - cy) / camera.focal
    return (
        camera.forward[None, None, :]
        + xs[None, :, None] * camera.right[None, None, :]
        + ys[:, None, None] * camera.down[None, None, :]
    )
