"""Numba kernels for the per-pixel stages: triangle fill, grid warp, jump
flood and boundary fill.

Everything here is deterministic regardless of thread count: work is split
into fixed-height row bands (or rows), each owned by exactly one thread, and
items inside a band are processed in submission order. Buffers are float32
except screen-space geometry, which stays float64.

Seed/label conventions shared with the callers:
  labels   uint8: 0 background, 1 render-only, 2 camera-only, 3 overlap
  seeds    int32: (y << 16) | x, -1 for "no seed yet"
  uv plane float32, -1 marks invalid texels
"""

import numpy as np
from numba import njit, prange

BAND_H = 16
INF32 = np.float32(np.inf)
BIG = np.int32(2**31 - 1)


@njit(cache=True, inline="always")
def _tex_sample(tex, u, v):
    """Bilinear, clamp addressing. tex is (H, W, 3) float32, uv in texture space [0,1]."""
    th, tw = tex.shape[0], tex.shape[1]
    x = u * tw - 0.5
    y = v * th - 0.5
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    x0c = min(max(x0, 0), tw - 1)
    x1c = min(max(x0 + 1, 0), tw - 1)
    y0c = min(max(y0, 0), th - 1)
    y1c = min(max(y0 + 1, 0), th - 1)
    r = (tex[y0c, x0c, 0] * (1 - fx) + tex[y0c, x1c, 0] * fx) * (1 - fy) + (
        tex[y1c, x0c, 0] * (1 - fx) + tex[y1c, x1c, 0] * fx
    ) * fy
    g = (tex[y0c, x0c, 1] * (1 - fx) + tex[y0c, x1c, 1] * fx) * (1 - fy) + (
        tex[y1c, x0c, 1] * (1 - fx) + tex[y1c, x1c, 1] * fx
    ) * fy
    b = (tex[y0c, x0c, 2] * (1 - fx) + tex[y0c, x1c, 2] * fx) * (1 - fy) + (
        tex[y1c, x0c, 2] * (1 - fx) + tex[y1c, x1c, 2] * fx
    ) * fy
    return r, g, b


@njit(cache=True)
def _bin_rows(ymin, ymax, h, band_h):
    """CSR binning of items into row bands from their y extents."""
    n = ymin.shape[0]
    n_bands = (h + band_h - 1) // band_h
    counts = np.zeros(n_bands + 1, dtype=np.int64)
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for t in range(n):
        y0 = int(np.floor(ymin[t] - 0.5))
        y1 = int(np.ceil(ymax[t] - 0.5))
        if y0 < 0:
            y0 = 0
        if y1 > h - 1:
            y1 = h - 1
        if y1 < y0:
            lo[t] = 1
            hi[t] = 0
            continue
        b0 = y0 // band_h
        b1 = y1 // band_h
        lo[t] = b0
        hi[t] = b1
        for b in range(b0, b1 + 1):
            counts[b + 1] += 1
    for b in range(n_bands):
        counts[b + 1] += counts[b]
    entries = np.empty(counts[n_bands], dtype=np.int64)
    cursor = counts[:n_bands].copy()
    for t in range(n):
        if hi[t] < lo[t]:
            continue
        for b in range(lo[t], hi[t] + 1):
            entries[cursor[b]] = t
            cursor[b] += 1
    return counts, entries


@njit(cache=True, parallel=True)
def raster_textured(xy, z, uv, tris, tex, mask, uvb, color, depth, band_h):
    """Z-buffered triangle fill with perspective-correct UV interpolation."""
    h, w = mask.shape
    nt = tris.shape[0]
    ymin = np.empty(nt)
    ymax = np.empty(nt)
    for t in range(nt):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        if z[i0] <= 1e-9 or z[i1] <= 1e-9 or z[i2] <= 1e-9:
            ymin[t] = 1.0
            ymax[t] = 0.0
            continue
        ymin[t] = min(xy[i0, 1], min(xy[i1, 1], xy[i2, 1]))
        ymax[t] = max(xy[i0, 1], max(xy[i1, 1], xy[i2, 1]))
    counts, entries = _bin_rows(ymin, ymax, h, band_h)
    n_bands = counts.shape[0] - 1

    for band in prange(n_bands):
        yb0 = band * band_h
        yb1 = min(h, yb0 + band_h)
        for e in range(counts[band], counts[band + 1]):
            t = entries[e]
            i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
            x0, y0 = xy[i0, 0], xy[i0, 1]
            x1, y1 = xy[i1, 0], xy[i1, 1]
            x2, y2 = xy[i2, 0], xy[i2, 1]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if area == 0.0:
                continue
            inv_area = 1.0 / area
            iz0 = 1.0 / z[i0]
            iz1 = 1.0 / z[i1]
            iz2 = 1.0 / z[i2]
            u0, v0 = uv[i0, 0] * iz0, uv[i0, 1] * iz0
            u1, v1 = uv[i1, 0] * iz1, uv[i1, 1] * iz1
            u2, v2 = uv[i2, 0] * iz2, uv[i2, 1] * iz2
            ry0 = max(yb0, int(np.floor(min(y0, min(y1, y2)) - 0.5)))
            ry1 = min(yb1 - 1, int(np.ceil(max(y0, max(y1, y2)) - 0.5)))
            rx0 = max(0, int(np.floor(min(x0, min(x1, x2)) - 0.5)))
            rx1 = min(w - 1, int(np.ceil(max(x0, max(x1, x2)) - 0.5)))
            for py in range(ry0, ry1 + 1):
                cy = py + 0.5
                for px in range(rx0, rx1 + 1):
                    cx = px + 0.5
                    w0 = ((x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)) * inv_area
                    if w0 < 0.0:
                        continue
                    w1 = ((x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)) * inv_area
                    if w1 < 0.0:
                        continue
                    w2 = 1.0 - w0 - w1
                    if w2 < 0.0:
                        continue
                    izp = w0 * iz0 + w1 * iz1 + w2 * iz2
                    zp = 1.0 / izp
                    if zp < depth[py, px]:
                        depth[py, px] = zp
                        up = (w0 * u0 + w1 * u1 + w2 * u2) * zp
                        vp = (w0 * v0 + w1 * v1 + w2 * v2) * zp
                        mask[py, px] = 1
                        uvb[py, px, 0] = up
                        uvb[py, px, 1] = vp
                        r, g, b = _tex_sample(tex, up, vp)
                        color[py, px, 0] = r
                        color[py, px, 1] = g
                        color[py, px, 2] = b


@njit(cache=True, parallel=True)
def raster_silhouette(xy, z, tris, mask, band_h):
    """Coverage-only fill (binary mask), no depth resolution needed."""
    h, w = mask.shape
    nt = tris.shape[0]
    ymin = np.empty(nt)
    ymax = np.empty(nt)
    for t in range(nt):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        if z[i0] <= 1e-9 or z[i1] <= 1e-9 or z[i2] <= 1e-9:
            ymin[t] = 1.0
            ymax[t] = 0.0
            continue
        ymin[t] = min(xy[i0, 1], min(xy[i1, 1], xy[i2, 1]))
        ymax[t] = max(xy[i0, 1], max(xy[i1, 1], xy[i2, 1]))
    counts, entries = _bin_rows(ymin, ymax, h, band_h)
    n_bands = counts.shape[0] - 1

    for band in prange(n_bands):
        yb0 = band * band_h
        yb1 = min(h, yb0 + band_h)
        for e in range(counts[band], counts[band + 1]):
            t = entries[e]
            i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
            x0, y0 = xy[i0, 0], xy[i0, 1]
            x1, y1 = xy[i1, 0], xy[i1, 1]
            x2, y2 = xy[i2, 0], xy[i2, 1]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if area == 0.0:
                continue
            inv_area = 1.0 / area
            ry0 = max(yb0, int(np.floor(min(y0, min(y1, y2)) - 0.5)))
            ry1 = min(yb1 - 1, int(np.ceil(max(y0, max(y1, y2)) - 0.5)))
            rx0 = max(0, int(np.floor(min(x0, min(x1, x2)) - 0.5)))
            rx1 = min(w - 1, int(np.ceil(max(x0, max(x1, x2)) - 0.5)))
            for py in range(ry0, ry1 + 1):
                cy = py + 0.5
                for px in range(rx0, rx1 + 1):
                    cx = px + 0.5
                    w0 = ((x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)) * inv_area
                    if w0 < 0.0:
                        continue
                    w1 = ((x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)) * inv_area
                    if w1 < 0.0:
                        continue
                    if 1.0 - w0 - w1 < 0.0:
                        continue
                    mask[py, px] = 1


@njit(cache=True, parallel=True)
def warp_grid(nodes, ox, oy, spacing, smask, suv, scolor, sdepth, dmask, duv, dcolor, ddepth, band_h):
    """Forward warp: each deformed grid cell is filled as two triangles whose
    interpolated attribute is the rest-space position; every covered output
    pixel copies the nearest source pixel's planes, folds resolved by source
    depth (background depth is +inf, so content always beats background).
    """
    h, w = smask.shape
    gy, gx = nodes.shape[0], nodes.shape[1]
    ncell = (gy - 1) * (gx - 1)
    ymin = np.empty(2 * ncell)
    ymax = np.empty(2 * ncell)
    # triangle c*2:   (n00, n10, n11); triangle c*2+1: (n00, n11, n01)
    for c in range(ncell):
        ci = c // (gx - 1)
        cj = c % (gx - 1)
        y00 = nodes[ci, cj, 1]
        y01 = nodes[ci, cj + 1, 1]
        y10 = nodes[ci + 1, cj, 1]
        y11 = nodes[ci + 1, cj + 1, 1]
        ymin[2 * c] = min(y00, min(y10, y11))
        ymax[2 * c] = max(y00, max(y10, y11))
        ymin[2 * c + 1] = min(y00, min(y11, y01))
        ymax[2 * c + 1] = max(y00, max(y11, y01))
    counts, entries = _bin_rows(ymin, ymax, h, band_h)
    n_bands = counts.shape[0] - 1

    for band in prange(n_bands):
        yb0 = band * band_h
        yb1 = min(h, yb0 + band_h)
        for e in range(counts[band], counts[band + 1]):
            t = entries[e]
            c = t // 2
            ci = c // (gx - 1)
            cj = c % (gx - 1)
            rx00 = ox + cj * spacing
            ry00 = oy + ci * spacing
            if t % 2 == 0:
                ax, ay = nodes[ci, cj, 0], nodes[ci, cj, 1]
                bx, by = nodes[ci + 1, cj, 0], nodes[ci + 1, cj, 1]
                cx_, cy_ = nodes[ci + 1, cj + 1, 0], nodes[ci + 1, cj + 1, 1]
                rax, ray = rx00, ry00
                rbx, rby = rx00, ry00 + spacing
                rcx, rcy = rx00 + spacing, ry00 + spacing
            else:
                ax, ay = nodes[ci, cj, 0], nodes[ci, cj, 1]
                bx, by = nodes[ci + 1, cj + 1, 0], nodes[ci + 1, cj + 1, 1]
                cx_, cy_ = nodes[ci, cj + 1, 0], nodes[ci, cj + 1, 1]
                rax, ray = rx00, ry00
                rbx, rby = rx00 + spacing, ry00 + spacing
                rcx, rcy = rx00 + spacing, ry00
            area = (bx - ax) * (cy_ - ay) - (by - ay) * (cx_ - ax)
            if area == 0.0:
                continue
            inv_area = 1.0 / area
            py0 = max(yb0, int(np.floor(min(ay, min(by, cy_)) - 0.5)))
            py1 = min(yb1 - 1, int(np.ceil(max(ay, max(by, cy_)) - 0.5)))
            px0 = max(0, int(np.floor(min(ax, min(bx, cx_)) - 0.5)))
            px1 = min(w - 1, int(np.ceil(max(ax, max(bx, cx_)) - 0.5)))
            for py in range(py0, py1 + 1):
                yy = py + 0.5
                for px in range(px0, px1 + 1):
                    xx = px + 0.5
                    w0 = ((cx_ - bx) * (yy - by) - (cy_ - by) * (xx - bx)) * inv_area
                    if w0 < 0.0:
                        continue
                    w1 = ((ax - cx_) * (yy - cy_) - (ay - cy_) * (xx - cx_)) * inv_area
                    if w1 < 0.0:
                        continue
                    w2 = 1.0 - w0 - w1
                    if w2 < 0.0:
                        continue
                    rx = w0 * rax + w1 * rbx + w2 * rcx
                    ry = w0 * ray + w1 * rby + w2 * rcy
                    sx = int(np.floor(rx))
                    sy = int(np.floor(ry))
                    if sx < 0 or sx >= w or sy < 0 or sy >= h:
                        continue
                    sd = sdepth[sy, sx]
                    if sd < ddepth[py, px]:
                        ddepth[py, px] = sd
                        dmask[py, px] = smask[sy, sx]
                        duv[py, px, 0] = suv[sy, sx, 0]
                        duv[py, px, 1] = suv[sy, sx, 1]
                        dcolor[py, px, 0] = scolor[sy, sx, 0]
                        dcolor[py, px, 1] = scolor[sy, sx, 1]
                        dcolor[py, px, 2] = scolor[sy, sx, 2]


@njit(cache=True, parallel=True)
def jfa_pass(seed_in, dist_in, seed_out, dist_out, step):
    """One jump-flood round: pull the best seed among the 9 step-neighbors."""
    h, w = seed_in.shape
    for y in prange(h):
        for x in range(w):
            seed_out[y, x] = seed_in[y, x]
            dist_out[y, x] = dist_in[y, x]
        for dy in (-step, 0, step):
            ny = y + dy
            if ny < 0 or ny >= h:
                continue
            for dx in (-step, 0, step):
                xlo = 0 if dx >= 0 else -dx
                xhi = w if dx <= 0 else w - dx
                for x in range(xlo, xhi):
                    cand = seed_in[ny, x + dx]
                    if cand >= 0:
                        sy = cand >> 16
                        sx = cand & 0xFFFF
                        ddy = y - sy
                        ddx = x - sx
                        d = ddy * ddy + ddx * ddx
                        if d < dist_out[y, x]:
                            dist_out[y, x] = d
                            seed_out[y, x] = cand


@njit(cache=True, parallel=True)
def fill_boundary_kernel(
    labels, seed, wmask, wuv, wcolor, wdepth, tex, omask, ouv, ocolor, odepth
):
    """Compose the final frame from the warped render and the region labels.

    Overlap pixels pass through untouched; camera-only pixels sample the
    texture at the UV of their nearest overlap pixel extrapolated by the
    reflected-neighbor UV difference; everything else goes dark.
    """
    h, w = labels.shape
    for y in prange(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 3:
                omask[y, x] = 1
                ouv[y, x, 0] = wuv[y, x, 0]
                ouv[y, x, 1] = wuv[y, x, 1]
                ocolor[y, x, 0] = wcolor[y, x, 0]
                ocolor[y, x, 1] = wcolor[y, x, 1]
                ocolor[y, x, 2] = wcolor[y, x, 2]
                odepth[y, x] = wdepth[y, x]
            elif lab == 2:
                s = seed[y, x]
                if s < 0:
                    continue
                sy = s >> 16
                sx = s & 0xFFFF
                u0 = wuv[sy, sx, 0]
                v0 = wuv[sy, sx, 1]
                du = np.float32(0.0)
                dv = np.float32(0.0)
                ry = 2 * sy - y
                rx = 2 * sx - x
                if ry >= 0 and ry < h and rx >= 0 and rx < w and labels[ry, rx] == 3:
                    du = u0 - wuv[ry, rx, 0]
                    dv = v0 - wuv[ry, rx, 1]
                u = min(max(u0 + du, np.float32(0.0)), np.float32(1.0))
                v = min(max(v0 + dv, np.float32(0.0)), np.float32(1.0))
                r, g, b = _tex_sample(tex, u, v)
                omask[y, x] = 1
                ouv[y, x, 0] = u
                ouv[y, x, 1] = v
                ocolor[y, x, 0] = r
                ocolor[y, x, 1] = g
                ocolor[y, x, 2] = b
                odepth[y, x] = wdepth[sy, sx]
