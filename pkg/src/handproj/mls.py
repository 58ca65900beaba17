"""Moving least squares screen-space deformation.

Control pairs (sources P, targets Q) define a smooth map f with f(p_i) = q_i
exactly; a uniform grid is solved per frame by evaluating f at every node,
and the render buffers are forward-warped by rasterizing the deformed grid
cells as textured quads.

The default map is the affine MLS variant with inverse-square-distance
weights (alpha = 1); similarity and rigid variants sit behind the `variant`
switch. Row-vector convention throughout: f(v) = (v - p*) M + q*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .buffers import FrameBuffers

VARIANTS = ("affine", "similarity", "rigid")


class SingularControlsError(ValueError):
    """Control sources are collinear or duplicated; the MLS system is singular."""


@dataclass
class LandmarkSet:
    """2D pixel landmarks with a capture timestamp.

    kind tags provenance: "sources" (projected estimator joints), "detected"
    (landmark detector output), "estimated" (temporally filtered detector
    output), "truth" (simulation oracle).
    """

    points: np.ndarray  # (N, 2) px
    timestamp: float
    kind: str = "sources"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("landmark points must be (N, 2)")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("landmark points must be finite")

    def __len__(self) -> int:
        return len(self.points)


def _check_controls(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape or p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("control sets must both be (N, 2)")
    if len(p) < 3:
        raise SingularControlsError("need at least 3 control points")
    centered = p - p.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
        raise SingularControlsError("control sources are collinear or duplicated")


def mls_map(p, q, v, alpha: float = 1.0, variant: str = "affine") -> np.ndarray:
    """Evaluate the deformation at query points v (one (2,) point or (M, 2)).

    Weights are w_i = 1 / |p_i - v|^(2 alpha); a query coinciding with a
    source returns its target exactly.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    vv = v[None, :] if single else v
    _check_controls(p, q)
    if variant not in VARIANTS:
        raise ValueError(f"unknown MLS variant {variant!r} (want one of {VARIANTS})")

    diff = vv[:, None, :] - p[None, :, :]          # (M, N, 2)
    d2 = np.einsum("mni,mni->mn", diff, diff)      # (M, N)
    hits = d2 < 1e-18
    w = 1.0 / np.where(hits, 1.0, d2) ** alpha
    wsum = w.sum(axis=1, keepdims=True)
    pstar = (w @ p) / wsum                          # (M, 2)
    qstar = (w @ q) / wsum
    phat = p[None, :, :] - pstar[:, None, :]       # (M, N, 2)
    qhat = q[None, :, :] - qstar[:, None, :]
    rel = vv - pstar                                # (M, 2)

    if variant == "affine":
        a = np.einsum("mn,mni,mnj->mij", w, phat, phat)
        b = np.einsum("mn,mni,mnj->mij", w, phat, qhat)
        det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
        if np.any(np.abs(det) < 1e-9):
            raise SingularControlsError("weighted source covariance is singular")
        m = np.linalg.solve(a, b)                   # (M, 2, 2)
        out = qstar + np.einsum("mi,mij->mj", rel, m)
    else:
        # per control: A_i = w_i [[dot_i, cross_i], [-cross_i, dot_i]] in the
        # frame of rel = v - p*, accumulated as fvec = sum_i qhat_i A_i
        dot = np.einsum("mni,mi->mn", phat, rel)
        cross = phat[..., 0] * rel[:, None, 1] - phat[..., 1] * rel[:, None, 0]
        fx = np.einsum("mn,mn->m", w, qhat[..., 0] * dot - qhat[..., 1] * cross)
        fy = np.einsum("mn,mn->m", w, qhat[..., 0] * cross + qhat[..., 1] * dot)
        fvec = np.stack([fx, fy], axis=-1)
        if variant == "similarity":
            mu = np.einsum("mn,mn->m", w, np.einsum("mni,mni->mn", phat, phat))
            out = qstar + fvec / mu[:, None]
        else:  # rigid: same direction, but length preserved
            norm = np.linalg.norm(fvec, axis=-1)
            scale = np.linalg.norm(rel, axis=-1) / np.where(norm > 1e-12, norm, 1.0)
            out = qstar + fvec * scale[:, None]

    if np.any(hits):
        idx = np.argmax(hits, axis=1)
        coincident = hits.any(axis=1)
        out = np.where(coincident[:, None], q[idx], out)
    return out[0] if single else out


@dataclass
class DeformGrid:
    """Uniform lattice covering the frame plus a one-cell margin.

    Rest node (i, j) sits at (origin + j*spacing, origin + i*spacing);
    `deformed` holds where each node lands in observed space.
    """

    spacing: float
    origin: float                 # same offset on both axes (one-cell margin)
    deformed: np.ndarray          # (GY, GX, 2) float64
    width: int
    height: int

    @classmethod
    def node_layout(cls, width: int, height: int, spacing: float):
        nx = int(np.ceil(width / spacing)) + 3
        ny = int(np.ceil(height / spacing)) + 3
        return nx, ny, -spacing

    @classmethod
    def identity(cls, width: int, height: int, spacing: float) -> "DeformGrid":
        nx, ny, origin = cls.node_layout(width, height, spacing)
        xs = origin + spacing * np.arange(nx)
        ys = origin + spacing * np.arange(ny)
        deformed = np.stack(np.meshgrid(xs, ys), axis=-1)
        return cls(spacing, origin, deformed, width, height)

    def rest_nodes(self) -> np.ndarray:
        ny, nx = self.deformed.shape[:2]
        xs = self.origin + self.spacing * np.arange(nx)
        ys = self.origin + self.spacing * np.arange(ny)
        return np.stack(np.meshgrid(xs, ys), axis=-1)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of the node map at arbitrary rest points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        ny, nx = self.deformed.shape[:2]
        gx = (pts[:, 0] - self.origin) / self.spacing
        gy = (pts[:, 1] - self.origin) / self.spacing
        j = np.clip(np.floor(gx).astype(int), 0, nx - 2)
        i = np.clip(np.floor(gy).astype(int), 0, ny - 2)
        fx = (gx - j)[:, None]
        fy = (gy - i)[:, None]
        d = self.deformed
        top = d[i, j] * (1 - fx) + d[i, j + 1] * fx
        bot = d[i + 1, j] * (1 - fx) + d[i + 1, j + 1] * fx
        return top * (1 - fy) + bot * fy

    def to_csv(self, path) -> None:
        rest = self.rest_nodes()
        ny, nx = rest.shape[:2]
        with open(path, "w") as fh:
            fh.write("row,col,rest_x,rest_y,deformed_x,deformed_y\n")
            for i in range(ny):
                for j in range(nx):
                    fh.write(
                        "%d,%d,%.17g,%.17g,%.17g,%.17g\n"
                        % (i, j, rest[i, j, 0], rest[i, j, 1], self.deformed[i, j, 0], self.deformed[i, j, 1])
                    )


def solve_grid(
    p: LandmarkSet | np.ndarray,
    q: LandmarkSet | np.ndarray,
    width: int,
    height: int,
    spacing: float = 16.0,
    alpha: float = 1.0,
    variant: str = "affine",
) -> DeformGrid:
    """Deform every rest node by the MLS map."""
    pp = p.points if isinstance(p, LandmarkSet) else np.asarray(p, dtype=np.float64)
    qq = q.points if isinstance(q, LandmarkSet) else np.asarray(q, dtype=np.float64)
    grid = DeformGrid.identity(width, height, spacing)
    rest = grid.rest_nodes().reshape(-1, 2)
    grid.deformed = mls_map(pp, qq, rest, alpha=alpha, variant=variant).reshape(grid.deformed.shape)
    return grid


def warp(bufs: FrameBuffers, grid: DeformGrid) -> FrameBuffers:
    """Forward-warp all planes through the grid (mask, uv, color move together)."""
    if grid.width != bufs.width or grid.height != bufs.height:
        raise ValueError("grid was solved for a different frame size")
    out = FrameBuffers.empty(bufs.width, bufs.height, timestamp=bufs.timestamp)
    _kernels.warp_grid(
        np.ascontiguousarray(grid.deformed),
        float(grid.origin),
        float(grid.origin),
        float(grid.spacing),
        bufs.mask,
        bufs.uv,
        bufs.color,
        bufs.depth,
        out.mask,
        out.uv,
        out.color,
        out.depth,
        _kernels.BAND_H,
    )
    return out
