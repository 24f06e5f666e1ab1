"""Capsule rasterization with a z-buffer, plus the static background pass.

Rays are cast through pixel centers with the forward component scaled to 1,
so the ray parameter is the forward-axis depth that the z-buffer stores.
All intersections are analytic (quadratics); no sampling, no anti-aliasing,
hence byte-determinism.
"""

from __future__ import annotations

import numpy as np

from ..textures import sample_texture
from .camera import NEAR_PLANE, CameraModel, pixel_rays, project

AMBIENT = 0.35
_LIGHT_UP = np.array([0.0, 1.0, 0.0])  # single directional light, straight down
_BBOX_PAD = 2.0  # pixels; covers center-vs-edge rounding of silhouettes


def _shade(normals: np.ndarray) -> np.ndarray:
    lambert = np.maximum(0.0, normals @ _LIGHT_UP)
    return AMBIENT + (1.0 - AMBIENT) * lambert


def _perp_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair perpendicular to a unit axis."""
    helper = np.array([0.0, 1.0, 0.0]) if abs(axis[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def render_background(
    camera: CameraModel, floor_tex: np.ndarray, sky_tex: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Floor plane y=0 plus sky sphere. Returns (color (H,W,3), depth (H,W))."""
    rays = pixel_rays(camera)
    o = camera.position
    dy = rays[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -o[1] / dy
    floor_hit = np.isfinite(t) & (t > NEAR_PLANE)

    color = np.empty(rays.shape, dtype=np.float64)
    depth = np.full(rays.shape[:2], np.inf)

    # sky everywhere first; spherical UV from the ray direction
    norms = np.linalg.norm(rays, axis=-1)
    d = rays / norms[..., None]
    az = np.arctan2(d[..., 0], d[..., 2])
    el = np.arcsin(np.clip(d[..., 1], -1.0, 1.0))
    color[:] = sample_texture(sky_tex, az / (2 * np.pi) + 0.5, 0.5 - el / np.pi)

    # floor overwrites where hit; 1m tiles, full brightness (normal faces the light)
    px = o[0] + t[floor_hit] * rays[..., 0][floor_hit]
    pz = o[2] + t[floor_hit] * rays[..., 2][floor_hit]
    color[floor_hit] = sample_texture(floor_tex, px, pz)
    depth[floor_hit] = t[floor_hit]
    return color, depth


def capsules_of_pose(topology, positions: np.ndarray, radii: dict) -> list:
    """(A, B, r, joint_index) per bone; bone j runs parent(j) -> j."""
    out = []
    fallback = max(radii.values()) if radii else 0.05
    for j in range(1, topology.joint_count):
        if topology.end_site[j]:
            continue
        p = topology.parents[j]
        out.append(
            (positions[p], positions[j], radii.get(topology.names[j], fallback), j)
        )
    return out


def _capsule_bbox(camera: CameraModel, a, b, r) -> tuple[int, int, int, int] | None:
    """Conservative pixel bbox of a capsule, or None if fully behind the camera."""
    za = float((a - camera.position) @ camera.forward)
    zb = float((b - camera.position) @ camera.forward)
    if max(za, zb) + r <= NEAR_PLANE:
        return None
    pts, pads = [], []
    for p, z in ((a, za), (b, zb)):
        pr = project(camera, p)
        if pr is None:
            return (0, 0, camera.width, camera.height)  # straddles near plane
        pts.append(pr[0])
        pads.append(camera.focal * r / z + _BBOX_PAD)
    u0 = int(np.floor(min(pts[0][0] - pads[0], pts[1][0] - pads[1])))
    u1 = int(np.ceil(max(pts[0][0] + pads[0], pts[1][0] + pads[1]))) + 1
    v0 = int(np.floor(min(pts[0][1] - pads[0], pts[1][1] - pads[1])))
    v1 = int(np.ceil(max(pts[0][1] + pads[0], pts[1][1] + pads[1]))) + 1
    u0, v0 = max(u0, 0), max(v0, 0)
    u1, v1 = min(u1, camera.width), min(v1, camera.height)
    if u0 >= u1 or v0 >= v1:
        return None
    return u0, v0, u1, v1


def _intersect_capsule(o, d, a, b, r):
    """Nearest t > near plane for rays o + t*d against one capsule.

    d is (N,3) and need not be unit length; t is in units of d. Returns
    (t, hit mask); t is +inf where missed.
    """
    n = d.shape[0]
    t_best = np.full(n, np.inf)

    ba = b - a
    baba = float(ba @ ba)
    oa = o - a

    if baba > 1e-16:
        bard = d @ ba
        baoa = float(oa @ ba)
        dd = np.einsum("ij,ij->i", d, d)
        oad = d @ oa
        oaoa = float(oa @ oa)
        k2 = baba * dd - bard * bard
        k1 = baba * oad - baoa * bard
        k0 = baba * oaoa - baoa * baoa - r * r * baba
        disc = k1 * k1 - k2 * k0
        body = (disc >= 0.0) & (k2 > 1e-12)
        if body.any():
            sq = np.sqrt(np.where(body, disc, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(body, (-k1 - sq) / k2, np.inf)
            y = baoa + t * bard
            ok = body & (t > NEAR_PLANE) & (y >= 0.0) & (y <= baba)
            t_best = np.where(ok & (t < t_best), t, t_best)

    for c in (a, b) if baba > 1e-16 else (a,):
        oc = o - c
        dd = np.einsum("ij,ij->i", d, d)
        pb = d @ oc
        pc = float(oc @ oc) - r * r
        disc = pb * pb - dd * pc
        has = disc >= 0.0
        if not has.any():
            continue
        sq = np.sqrt(np.where(has, disc, 0.0))
        t = np.where(has, (-pb - sq) / dd, np.inf)
        ok = has & (t > NEAR_PLANE)
        t_best = np.where(ok & (t < t_best), t, t_best)

    return t_best, np.isfinite(t_best)


def rasterize_capsules(
    camera: CameraModel,
    capsules: list,
    body_tex: np.ndarray,
    color: np.ndarray,
    depth: np.ndarray,
    owner: np.ndarray,
    rays: np.ndarray | None = None,
) -> None:
    """Depth-tested capsule pass over buffers primed with the background.

    owner is (H,W) int, -1 for background; set to the capsule's joint index
    where its surface is nearest.
    """
    if rays is None:
        rays = pixel_rays(camera)
    o = camera.position
    for a, b, r, joint in capsules:
        box = _capsule_bbox(camera, a, b, r)
        if box is None:
            continue
        u0, v0, u1, v1 = box
        d = rays[v0:v1, u0:u1].reshape(-1, 3)
        t, hit = _intersect_capsule(o, d, a, b, r)
        if not hit.any():
            continue
        sub_depth = depth[v0:v1, u0:u1].reshape(-1)
        win = hit & (t < sub_depth)
        if not win.any():
            continue

        p = o + t[win, None] * d[win]
        ba = b - a
        baba = float(ba @ ba)
        if baba > 1e-16:
            axis = ba / np.sqrt(baba)
            h = np.clip((p - a) @ axis, 0.0, np.sqrt(baba))
            closest = a + h[:, None] * axis
            vfrac = h / np.sqrt(baba)
        else:
            axis = np.array([0.0, 1.0, 0.0])
            closest = np.broadcast_to(a, p.shape)
            vfrac = np.zeros(len(p))
        normal = (p - closest) / r
        e1, e2 = _perp_frame(axis)
        ang = np.arctan2(normal @ e2, normal @ e1)
        texel = sample_texture(body_tex, ang / (2 * np.pi) + 0.5, vfrac)
        shaded = texel * _shade(normal)[:, None]

        idx = np.flatnonzero(win)
        vv, uu = np.divmod(idx, u1 - u0)
        depth[v0 + vv, u0 + uu] = t[win]
        color[v0 + vv, u0 + uu] = shaded
        owner[v0 + vv, u0 + uu] = joint
