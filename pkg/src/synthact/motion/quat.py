"""Unit quaternion helpers.

Quaternions are stored as ``(w, x, y, z)`` float64 arrays. All public
functions broadcast over leading dimensions, so a pose track of shape
``(frames, joints, 4)`` works the same as a single quaternion.

Euler angles follow the skeletal-animation convention used by hierarchical
motion files: an order string like ``"ZXY"`` means the matrix product
``Rz @ Rx @ Ry`` (first letter is the outermost rotation).
"""

from __future__ import annotations

import numpy as np

_AXES = {"X": 0, "Y": 1, "Z": 2}

# Even permutations of (0, 1, 2); odd ones flip a sign in euler extraction.
_EVEN = {(0, 1, 2), (1, 2, 0), (2, 0, 1)}


def identity(shape=()) -> np.ndarray:
    q = np.zeros(shape + (4,), dtype=np.float64)
    q[..., 0] = 1.0
    return q


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-12):
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (apply b first, then a, as rotations)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors v by quaternions q (broadcasting)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def from_axis_angle(axis: np.ndarray, angle_rad) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle_rad, dtype=np.float64)
    half = 0.5 * angle
    q = np.empty(np.broadcast(axis[..., 0], angle).shape + (4,))
    q[..., 0] = np.cos(half)
    q[..., 1:] = axis * np.sin(half)[..., None]
    return q


def _axis_quat(axis_index: int, angle_rad: np.ndarray) -> np.ndarray:
    half = 0.5 * np.asarray(angle_rad, dtype=np.float64)
    q = np.zeros(half.shape + (4,))
    q[..., 0] = np.cos(half)
    q[..., 1 + axis_index] = np.sin(half)
    return q


def from_euler_deg(order: str, angles_deg: np.ndarray) -> np.ndarray:
    """Quaternion for intrinsic euler angles in degrees.

    ``angles_deg[..., i]`` pairs with ``order[i]``; the first letter is the
    outermost rotation, i.e. R = R(order[0]) @ R(order[1]) @ R(order[2]).
    """
    order = order.upper()
    if sorted(order) != ["X", "Y", "Z"]:
        raise ValueError(f"bad euler order {order!r}")
    ang = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    q = _axis_quat(_AXES[order[0]], ang[..., 0])
    for i in (1, 2):
        q = mul(q, _axis_quat(_AXES[order[i]], ang[..., i]))
    return q


def to_matrix(q: np.ndarray) -> np.ndarray:
    q = normalize(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Quaternion from a proper rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError("from_matrix takes a single 3x3 matrix")
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return normalize(q)


def to_euler_deg(order: str, q: np.ndarray) -> np.ndarray:
    """Euler angles (degrees) whose from_euler_deg recomposes to +-q.

    At gimbal lock (middle angle +-90 deg) the third angle is set to zero;
    the recomposed rotation is still exact.
    """
    order = order.upper()
    if sorted(order) != ["X", "Y", "Z"]:
        raise ValueError(f"bad euler order {order!r}")
    i, j, k = (_AXES[c] for c in order)
    sgn = 1.0 if (i, j, k) in _EVEN else -1.0
    q = np.asarray(q, dtype=np.float64)
    flat = q.reshape(-1, 4)
    out = np.empty((flat.shape[0], 3))
    for n, qq in enumerate(flat):
        m = to_matrix(qq)
        sb = np.clip(sgn * m[i, k], -1.0, 1.0)
        cb = np.hypot(m[i, i], m[i, j])  # |cos b|, exact where it matters
        if cb < 1e-9:
            b = np.copysign(np.pi / 2.0, sb)
            t = np.arctan2(m[j, i], m[j, j])
            a = t if sb > 0 else -t
            c = 0.0
        else:
            b = np.arctan2(sb, cb)
            a = np.arctan2(-sgn * m[j, k], m[k, k])
            c = np.arctan2(-sgn * m[i, j], m[i, i])
        out[n] = (a, b, c)
    return np.rad2deg(out.reshape(q.shape[:-1] + (3,)))


def shortest_arc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vector a onto unit vector b.

    Zero twist about the source direction by construction. Antiparallel
    inputs get a 180-degree turn about a deterministic perpendicular axis.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b / np.linalg.norm(b, axis=-1, keepdims=True)
    w = 1.0 + np.sum(a * b, axis=-1)
    xyz = np.cross(a, b)
    q = np.concatenate([w[..., None], xyz], axis=-1)
    flat = q.reshape(-1, 4)
    aflat = a.reshape(-1, 3)
    for n in range(flat.shape[0]):
        if flat[n, 0] < 1e-9 and np.linalg.norm(flat[n, 1:]) < 1e-9:
            # antiparallel: any perpendicular axis works, pick a stable one
            ax = np.cross(aflat[n], [1.0, 0.0, 0.0])
            if np.linalg.norm(ax) < 1e-6:
                ax = np.cross(aflat[n], [0.0, 1.0, 0.0])
            ax /= np.linalg.norm(ax)
            flat[n] = (0.0, *ax)
    return normalize(flat.reshape(q.shape))
