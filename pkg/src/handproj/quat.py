"""Small vectorized quaternion toolbox (xyzw order, matching scipy).

All functions broadcast over leading axes so a whole joint set can be
transformed in one call. Rotations are unit quaternions; nothing here
normalizes its inputs except `normalize` itself.
"""

import numpy as np

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def multiply(a, b):
    """Hamilton product a*b, both xyzw."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ],
        axis=-1,
    )


def conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    out = q.copy()
    out[..., :3] *= -1.0
    return out


def rotate(q, v):
    """Rotate vectors v (..,3) by quaternions q (..,4)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = q[..., :3]
    w = q[..., 3:4]
    uv = np.cross(u, v)
    uuv = np.cross(u, uv)
    return v + 2.0 * (w * uv + uuv)


def from_axis_angle(axis, angle):
    """axis (..,3) unit, angle (..,) radians -> quaternion."""
    axis = np.asarray(axis, dtype=np.float64)
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    s = np.sin(half)
    xyz = axis * s[..., None]
    w = np.cos(half)[..., None]
    return np.concatenate([xyz, w], axis=-1)


def to_matrix(q):
    """Unit quaternion -> 3x3 rotation matrix, batched."""
    q = np.asarray(q, dtype=np.float64)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - z * w)
    m[..., 0, 2] = 2 * (x * z + y * w)
    m[..., 1, 0] = 2 * (x * y + z * w)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - x * w)
    m[..., 2, 0] = 2 * (x * z - y * w)
    m[..., 2, 1] = 2 * (y * z + x * w)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def power(q, s):
    """q**s along the shortest arc (slerp from identity), batched.

    s > 1 extrapolates past q, s in [0, 1] interpolates.
    """
    q = np.asarray(q, dtype=np.float64)
    # flip to the w >= 0 hemisphere so the arc is the short one
    sign = np.where(q[..., 3:4] < 0.0, -1.0, 1.0)
    q = q * sign
    vec = q[..., :3]
    norm = np.linalg.norm(vec, axis=-1)
    angle = 2.0 * np.arctan2(norm, q[..., 3])
    safe = np.where(norm > 1e-12, norm, 1.0)
    axis = vec / safe[..., None]
    out = from_axis_angle(axis, np.asarray(s) * angle)
    # near-identity rotations: the axis is meaningless, return identity
    tiny = norm <= 1e-12
    if np.any(tiny):
        out = np.where(tiny[..., None], IDENTITY, out)
    return out
