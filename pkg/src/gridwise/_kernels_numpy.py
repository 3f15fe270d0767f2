"""Pure-numpy implementations of the hot kernels.

Same signatures and results as ``_kernels_numba``; selected via
``GRIDWISE_BACKEND=numpy`` or when numba is unavailable.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# ---------------------------------------------------------------------------
# integer line tracing

def bresenham_line(r0: int, c0: int, r1: int, c1: int) -> np.ndarray:
    """8-connected integer line from (r0,c0) to (r1,c1), inclusive, in order.

    Closed-form evaluation of the classic incremental error walk: along the
    driving axis the minor coordinate is round-half-toward-start of the exact
    line, which for integer endpoints is ``(2*a_minor*k + a_major - 1) //
    (2*a_major)``.
    """
    r0, c0, r1, c1 = int(r0), int(c0), int(r1), int(c1)
    dr = r1 - r0
    dc = c1 - c0
    adr, adc = abs(dr), abs(dc)
    sr = (dr > 0) - (dr < 0)
    sc = (dc > 0) - (dc < 0)
    n = max(adr, adc)
    k = np.arange(n + 1, dtype=np.int64)
    out = np.empty((n + 1, 2), dtype=np.int64)
    if adr >= adc:
        out[:, 0] = r0 + sr * k
        minor = (2 * adc * k + adr - 1) // (2 * adr) if adr > 0 else k
        out[:, 1] = c0 + sc * minor
    else:
        out[:, 1] = c0 + sc * k
        out[:, 0] = r0 + sr * ((2 * adr * k + adc - 1) // (2 * adc))
    return out


# ---------------------------------------------------------------------------
# ray casting

def segment_hits(ox, oy, dir_x, dir_y, segs, max_range):
    """Nearest intersection of each ray with a segment set.

    segs is float64 [m, 4] rows (x1, y1, x2, y2). Returns (ranges, idx)
    with range = +inf and idx = -1 for misses. Rays parallel to a segment
    never hit it.
    """
    n = dir_x.shape[0]
    if segs.shape[0] == 0:
        return np.full(n, np.inf), np.full(n, -1, dtype=np.int64)
    dx = dir_x[:, None]
    dy = dir_y[:, None]
    sx = (segs[:, 2] - segs[:, 0])[None, :]
    sy = (segs[:, 3] - segs[:, 1])[None, :]
    rel_x = segs[None, :, 0] - ox
    rel_y = segs[None, :, 1] - oy
    denom = dx * sy - dy * sx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel_x * sy - rel_y * sx) / denom
        u = (rel_x * dy - rel_y * dx) / denom
    valid = (np.abs(denom) > 1e-12) & (t > 1e-9) & (t <= max_range)
    valid &= (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    idx = np.argmin(t, axis=1)
    ranges = t[np.arange(n), idx]
    idx = np.where(np.isinf(ranges), -1, idx).astype(np.int64)
    return ranges, idx


# ---------------------------------------------------------------------------
# patch transfer (nearest-neighbor on cell centers, both directions)

def extract_patch_cells(cells, ox, oy, res, px, py, cos_h, sin_h, side):
    """Gather a vehicle-centered, heading-aligned patch out of a map."""
    h, w = cells.shape
    half = side * res / 2.0
    xv = (np.arange(side) + 0.5) * res - half
    yv = (side - np.arange(side) - 0.5) * res - half
    wx = px + cos_h * xv[None, :] - sin_h * yv[:, None]
    wy = py + sin_h * xv[None, :] + cos_h * yv[:, None]
    col = np.floor((wx - ox) / res).astype(np.int64)
    row = np.floor((oy - wy) / res).astype(np.int64)
    ok = (row >= 0) & (row < h) & (col >= 0) & (col < w)
    out = np.zeros((side, side), dtype=np.float64)
    out[ok] = cells[row[ok], col[ok]]
    return out


def fuse_patch_cells(cells, ox, oy, res, patch, px, py, cos_h, sin_h,
                     r_lo, r_hi, c_lo, c_hi, l_max):
    """Accumulate a transformed patch into map cells, clamped, in place."""
    side = patch.shape[0]
    half = side * res / 2.0
    wx = ox + (np.arange(c_lo, c_hi)[None, :] + 0.5) * res
    wy = oy - (np.arange(r_lo, r_hi)[:, None] + 0.5) * res
    qx = cos_h * (wx - px) + sin_h * (wy - py)
    qy = -sin_h * (wx - px) + cos_h * (wy - py)
    pc = np.floor((qx + half) / res).astype(np.int64)
    pr = side - 1 - np.floor((qy + half) / res).astype(np.int64)
    ok = (pr >= 0) & (pr < side) & (pc >= 0) & (pc < side)
    sub = cells[r_lo:r_hi, c_lo:c_hi]
    add = np.zeros_like(sub)
    add[ok] = patch[pr[ok], pc[ok]]
    np.clip(sub + add, -l_max, l_max, out=sub)


def ism_splat(cells, r0, c0, end_rows, end_cols, occ_flags, l_free, l_occ, l_max):
    """Apply the ideal inverse sensor model for one scan, in place.

    Per detection: cells strictly between the sensor cell and the endpoint
    cell get l_free; the endpoint cell gets l_occ when occ_flags is set,
    otherwise it is free space (clipped ray) and gets l_free too.
    """
    for i in range(end_rows.shape[0]):
        path = bresenham_line(r0, c0, end_rows[i], end_cols[i])
        if occ_flags[i]:
            free = path[1:-1]
        else:
            free = path[1:]
        if free.shape[0]:
            rr, cc = free[:, 0], free[:, 1]
            cells[rr, cc] = np.clip(cells[rr, cc] + l_free, -l_max, l_max)
        if occ_flags[i]:
            r, c = path[-1, 0], path[-1, 1]
            cells[r, c] = min(l_max, max(-l_max, cells[r, c] + l_occ))


# ---------------------------------------------------------------------------
# convolution primitives
#
# gather:  y[n,o,i,j] = sum_{c,ki,kj} x[n,c,i*s-p+ki, j*s-p+kj] * w[o,c,ki,kj]
# scatter: exact adjoint of gather in x
# wgrad:   adjoint of gather in w

def _windows(x, k, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv_gather(x, w, stride, pad):
    k = w.shape[2]
    win = _windows(x, k, stride, pad)
    return np.einsum("nihwkl,oikl->nohw", win, w, optimize=True)


def conv_scatter(y, w, stride, pad, h_out, w_out):
    n, co, ho, wo = y.shape
    ci, k = w.shape[1], w.shape[2]
    xp = np.zeros((n, ci, h_out + 2 * pad, w_out + 2 * pad), dtype=y.dtype)
    for ki in range(k):
        for kj in range(k):
            tap = np.einsum("nohw,oi->nihw", y, w[:, :, ki, kj], optimize=True)
            xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += tap
    if pad:
        return np.ascontiguousarray(xp[:, :, pad:-pad, pad:-pad])
    return xp


def conv_wgrad(x, dy, stride, pad, k):
    win = _windows(x, k, stride, pad)
    return np.einsum("nihwkl,nohw->oikl", win, dy, optimize=True)
