"""Perceptual boundary reduction: region partition, jump flood, UV-extrapolated fill.

Superimposing the up-to-date camera mask on the (warped) render mask splits
the frame into four regions; only the camera-only region needs new content,
which is sampled from the texture by extending the UVs of the nearest
overlap pixel, while render-only pixels are removed. The result's coverage
equals the camera mask exactly whenever the overlap region is nonempty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .buffers import FrameBuffers, Texture, write_pgm, write_ppm

# region labels: camera_foreground * 2 + render_foreground
REGION_BACKGROUND = 0   # neither
REGION_RENDER_ONLY = 1  # rendered but not observed: removed
REGION_CAMERA_ONLY = 2  # observed but not rendered: filled
REGION_OVERLAP = 3      # both: passed through untouched

_REGION_COLORS = np.array(
    [[0, 0, 0], [191, 44, 35], [47, 103, 177], [64, 176, 166]], dtype=np.uint8
)


class NoSeedsError(RuntimeError):
    """There are camera-only pixels to fill but no overlap pixels to copy from."""


@dataclass
class NearestField:
    """Per-pixel nearest overlap seed (coordinates packed y<<16|x) and squared distance."""

    seed: np.ndarray   # (H, W) int32 packed, -1 where no seed exists anywhere
    dist2: np.ndarray  # (H, W) int32 squared euclidean px distance to the seed

    def seed_coords(self) -> np.ndarray:
        """Unpack to (H, W, 2) int32 (y, x); -1 rows where unassigned."""
        ys = self.seed >> 16
        xs = self.seed & 0xFFFF
        out = np.stack([ys, xs], axis=-1).astype(np.int32)
        out[self.seed < 0] = -1
        return out


def partition(camera_mask: np.ndarray, render_mask: np.ndarray) -> np.ndarray:
    """Label each pixel by camera/render foreground membership."""
    if camera_mask.shape != render_mask.shape:
        raise ValueError("camera and render masks must share dimensions")
    cam = (np.asarray(camera_mask) != 0).astype(np.uint8)
    ren = (np.asarray(render_mask) != 0).astype(np.uint8)
    return (cam * 2 + ren).astype(np.uint8)


def _jfa_schedule(extent: int) -> list[int]:
    """Halving step schedule from the covering power of two, plus two refinement rounds."""
    n = 1
    while n < extent:
        n *= 2
    steps = []
    s = n // 2
    while s >= 1:
        steps.append(s)
        s //= 2
    if not steps:
        steps = [1]
    return steps + [2, 1]


def jump_flood(labels: np.ndarray) -> NearestField:
    """Nearest-overlap-pixel field via jump flooding.

    Runs the halving schedule (plus two refinement rounds) on the bounding box
    of the overlap and camera-only regions; every seed lies inside that box,
    so assignments there are plain JFA results. Pixels outside the box
    inherit the nearest box-edge pixel's seed with the distance recomputed.
    """
    h, w = labels.shape
    seeds = labels == REGION_OVERLAP
    wanted = labels == REGION_CAMERA_ONLY
    if not seeds.any():
        if wanted.any():
            raise NoSeedsError("camera-only pixels present but the overlap region is empty")
        return NearestField(
            np.full((h, w), -1, dtype=np.int32),
            np.full((h, w), _kernels.BIG, dtype=np.int32),
        )

    ys, xs = np.nonzero(seeds | wanted)
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1

    ch, cw = y1 - y0, x1 - x0
    sub = seeds[y0:y1, x0:x1]
    seed = np.full((ch, cw), -1, dtype=np.int32)
    dist = np.full((ch, cw), _kernels.BIG, dtype=np.int32)
    syy, sxx = np.nonzero(sub)
    seed[syy, sxx] = (syy.astype(np.int32) << 16) | sxx.astype(np.int32)
    dist[syy, sxx] = 0

    cur_s, cur_d = seed, dist
    alt_s, alt_d = np.empty_like(seed), np.empty_like(dist)
    for step in _jfa_schedule(max(ch, cw)):
        _kernels.jfa_pass(cur_s, cur_d, alt_s, alt_d, step)
        cur_s, alt_s = alt_s, cur_s
        cur_d, alt_d = alt_d, cur_d

    full_seed = np.full((h, w), -1, dtype=np.int32)
    # re-base packed coordinates to full-frame pixels
    in_sy = (cur_s >> 16) + y0
    in_sx = (cur_s & 0xFFFF) + x0
    packed = ((in_sy.astype(np.int64) << 16) | in_sx.astype(np.int64)).astype(np.int32)
    packed[cur_s < 0] = -1
    full_seed[y0:y1, x0:x1] = packed

    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    edge_y = np.clip(yy, y0, y1 - 1)
    edge_x = np.clip(xx, x0, x1 - 1)
    outside = (yy < y0) | (yy >= y1) | (xx < x0) | (xx >= x1)
    if outside.any():
        full_seed[outside] = full_seed[edge_y[outside], edge_x[outside]]
    sy = full_seed >> 16
    sx = full_seed & 0xFFFF
    d2 = (yy - sy) ** 2 + (xx - sx) ** 2
    full_dist = np.where(full_seed >= 0, d2, _kernels.BIG).astype(np.int32)
    return NearestField(full_seed, full_dist)


def fill_boundary(
    warped: FrameBuffers,
    camera_mask: np.ndarray,
    texture: Texture,
    labels: np.ndarray | None = None,
    nearest: NearestField | None = None,
) -> FrameBuffers:
    """Compose the final frame: overlap kept, render-only removed, camera-only filled.

    Each camera-only pixel p samples the texture at uv(s) + (uv(s) - uv(s'))
    where s is its nearest overlap pixel and s' = 2s - p the reflection of p
    about s; when s' is not an overlap pixel the difference term is dropped.
    Extrapolated UVs are clamped to [0, 1]. If the overlap region is empty
    but fills are needed, the warped render with render-only pixels removed
    is returned instead.
    """
    if labels is None:
        labels = partition(camera_mask, warped.mask)
    out = FrameBuffers.empty(warped.width, warped.height, timestamp=warped.timestamp)
    if nearest is None:
        try:
            nearest = jump_flood(labels)
        except NoSeedsError:
            keep = labels == REGION_OVERLAP
            out.mask[keep] = 1
            out.uv[keep] = warped.uv[keep]
            out.color[keep] = warped.color[keep]
            out.depth[keep] = warped.depth[keep]
            return out
    _kernels.fill_boundary_kernel(
        labels,
        nearest.seed,
        warped.mask,
        warped.uv,
        warped.color,
        warped.depth,
        texture.image,
        out.mask,
        out.uv,
        out.color,
        out.depth,
    )
    return out


def region_counts(labels: np.ndarray) -> np.ndarray:
    """Pixel count per region label, ordered (background, render_only, camera_only, overlap)."""
    return np.bincount(labels.ravel(), minlength=4)[:4]


def dump_debug(labels: np.ndarray, nearest: NearestField, prefix: str) -> None:
    """Write the region map as a 4-color PPM and the distance plane as a PGM."""
    write_ppm(f"{prefix}_regions.ppm", _REGION_COLORS[labels])
    d = np.sqrt(np.maximum(nearest.dist2, 0).astype(np.float64))
    finite = d[nearest.dist2 < _kernels.BIG]
    top = finite.max() if finite.size else 1.0
    write_pgm(f"{prefix}_distance.pgm", np.clip(d / max(top, 1e-9), 0.0, 1.0))
