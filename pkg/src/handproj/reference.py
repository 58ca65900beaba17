"""Straightforward reference implementations used as independent oracles.

Everything here favors clarity over speed: scalar loops, textbook matrix
forms, brute-force searches. The production code must agree with these within
the tolerances declared by the oracle suites (see cli `oracle`), which keeps
the fast paths honest.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def mls_affine_point(p, q, v, alpha=1.0):
    """Affine MLS at one query point, written directly from the normal equations."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = len(p)
    for i in range(n):
        if np.hypot(p[i, 0] - v[0], p[i, 1] - v[1]) < 1e-9:
            return q[i].copy()
    w = np.empty(n)
    for i in range(n):
        d2 = (p[i, 0] - v[0]) ** 2 + (p[i, 1] - v[1]) ** 2
        w[i] = 1.0 / d2**alpha
    pstar = (w[:, None] * p).sum(axis=0) / w.sum()
    qstar = (w[:, None] * q).sum(axis=0) / w.sum()
    a = np.zeros((2, 2))
    b = np.zeros((2, 2))
    for i in range(n):
        ph = (p[i] - pstar)[:, None]  # column
        qh = (q[i] - qstar)[:, None]
        a += w[i] * (ph @ ph.T)
        b += w[i] * (ph @ qh.T)
    m = np.linalg.inv(a) @ b
    return qstar + (v - pstar) @ m


def nearest_seed_distances(seed_mask: np.ndarray) -> np.ndarray:
    """Exact per-pixel squared distance to the nearest seed pixel (kd-tree)."""
    h, w = seed_mask.shape
    ys, xs = np.nonzero(seed_mask)
    tree = cKDTree(np.stack([ys, xs], axis=1))
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    pts = np.stack([yy.ravel(), xx.ravel()], axis=1)
    d, _ = tree.query(pts)
    return (d**2).reshape(h, w)


def kalman_cv_reference(z_sequence, dts, q, r, x0, p0, predict_dts=None):
    """Textbook constant-velocity Kalman recursion for one 2D track.

    z_sequence: (K, 2) measurements (rows of nan mean predict-only step).
    dts: (K,) time deltas before each step. Returns the list of post-step
    states (x, P) and, if predict_dts is given, the predicted positions that
    far ahead of each step.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    p = np.asarray(p0, dtype=np.float64).copy()
    h = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    states = []
    preds = []
    for k in range(len(z_sequence)):
        dt = dts[k]
        f = np.array(
            [[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=np.float64
        )
        qk = q * np.array(
            [
                [dt**4 / 4, 0, dt**3 / 2, 0],
                [0, dt**4 / 4, 0, dt**3 / 2],
                [dt**3 / 2, 0, dt**2, 0],
                [0, dt**3 / 2, 0, dt**2],
            ]
        )
        x = f @ x
        p = f @ p @ f.T + qk
        z = np.asarray(z_sequence[k], dtype=np.float64)
        if not np.any(np.isnan(z)):
            s = h @ p @ h.T + r * np.eye(2)
            kgain = p @ h.T @ np.linalg.inv(s)
            x = x + kgain @ (z - h @ x)
            p = (np.eye(4) - kgain @ h) @ p
            p = 0.5 * (p + p.T)
        states.append((x.copy(), p.copy()))
        if predict_dts is not None:
            pd = predict_dts[k]
            fp = np.array(
                [[1, 0, pd, 0], [0, 1, 0, pd], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=np.float64
            )
            preds.append((fp @ x)[:2].copy())
    return (states, preds) if predict_dts is not None else states


def fill_reference(camera_mask, render_mask, uv_plane, color_plane, depth_plane, texture_image):
    """Per-pixel scalar re-derivation of the boundary fill.

    Brute-force nearest overlap pixel (unique-nearest scenes only), reflected
    UV extrapolation, bilinear texture sampling in float32 like the kernel.
    Returns (mask, uv, color, depth) planes.
    """
    h, w = camera_mask.shape
    cam = np.asarray(camera_mask) != 0
    ren = np.asarray(render_mask) != 0
    overlap = cam & ren
    oy, ox = np.nonzero(overlap)
    out_mask = np.zeros((h, w), dtype=np.uint8)
    out_uv = np.full((h, w, 2), -1.0, dtype=np.float32)
    out_color = np.zeros((h, w, 3), dtype=np.float32)
    out_depth = np.full((h, w), np.inf, dtype=np.float32)
    for y in range(h):
        for x in range(w):
            if overlap[y, x]:
                out_mask[y, x] = 1
                out_uv[y, x] = uv_plane[y, x]
                out_color[y, x] = color_plane[y, x]
                out_depth[y, x] = depth_plane[y, x]
            elif cam[y, x]:
                if len(oy) == 0:
                    continue
                d2 = (oy - y) ** 2 + (ox - x) ** 2
                i = int(np.argmin(d2))
                sy, sx = int(oy[i]), int(ox[i])
                u0 = np.float32(uv_plane[sy, sx, 0])
                v0 = np.float32(uv_plane[sy, sx, 1])
                du = np.float32(0.0)
                dv = np.float32(0.0)
                ry, rx = 2 * sy - y, 2 * sx - x
                if 0 <= ry < h and 0 <= rx < w and overlap[ry, rx]:
                    du = u0 - np.float32(uv_plane[ry, rx, 0])
                    dv = v0 - np.float32(uv_plane[ry, rx, 1])
                u = min(max(u0 + du, np.float32(0.0)), np.float32(1.0))
                v = min(max(v0 + dv, np.float32(0.0)), np.float32(1.0))
                out_mask[y, x] = 1
                out_uv[y, x] = (u, v)
                out_color[y, x] = _bilinear(texture_image, float(u), float(v))
                out_depth[y, x] = depth_plane[sy, sx]
    return out_mask, out_uv, out_color, out_depth


def _bilinear(tex, u, v):
    th, tw = tex.shape[:2]
    x = u * tw - 0.5
    y = v * th - 0.5
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    xs = [min(max(x0, 0), tw - 1), min(max(x0 + 1, 0), tw - 1)]
    ys = [min(max(y0, 0), th - 1), min(max(y0 + 1, 0), th - 1)]
    out = np.empty(3, dtype=np.float32)
    for c in range(3):
        top = tex[ys[0], xs[0], c] * (1 - fx) + tex[ys[0], xs[1], c] * fx
        bot = tex[ys[1], xs[0], c] * (1 - fx) + tex[ys[1], xs[1], c] * fx
        out[c] = top * (1 - fy) + bot * fy
    return out
