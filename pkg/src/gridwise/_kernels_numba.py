"""Numba-jitted implementations of the hot kernels.

Parallel loops run over independent output elements only (no cross-thread
reductions), so results are bit-deterministic for any thread count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True)
def bresenham_line(r0, c0, r1, c1):
    dr = r1 - r0
    dc = c1 - c0
    adr = abs(dr)
    adc = abs(dc)
    sr = 1 if dr > 0 else (-1 if dr < 0 else 0)
    sc = 1 if dc > 0 else (-1 if dc < 0 else 0)
    n = max(adr, adc)
    out = np.empty((n + 1, 2), dtype=np.int64)
    r, c = r0, c0
    if adr >= adc:
        d = 2 * adc - adr
        for k in range(n + 1):
            out[k, 0] = r
            out[k, 1] = c
            if d > 0:
                c += sc
                d -= 2 * adr
            d += 2 * adc
            r += sr
    else:
        d = 2 * adr - adc
        for k in range(n + 1):
            out[k, 0] = r
            out[k, 1] = c
            if d > 0:
                r += sr
                d -= 2 * adc
            d += 2 * adr
            c += sc
    return out


@njit(cache=True, parallel=True)
def segment_hits(ox, oy, dir_x, dir_y, segs, max_range):
    n = dir_x.shape[0]
    m = segs.shape[0]
    ranges = np.full(n, np.inf)
    idx = np.full(n, -1, dtype=np.int64)
    for i in prange(n):
        dx = dir_x[i]
        dy = dir_y[i]
        best = np.inf
        best_j = -1
        for j in range(m):
            sx = segs[j, 2] - segs[j, 0]
            sy = segs[j, 3] - segs[j, 1]
            denom = dx * sy - dy * sx
            if abs(denom) <= 1e-12:
                continue
            rel_x = segs[j, 0] - ox
            rel_y = segs[j, 1] - oy
            t = (rel_x * sy - rel_y * sx) / denom
            if t <= 1e-9 or t > max_range:
                continue
            u = (rel_x * dy - rel_y * dx) / denom
            if u < 0.0 or u > 1.0:
                continue
            if t < best:
                best = t
                best_j = j
        ranges[i] = best
        idx[i] = best_j
    return ranges, idx


@njit(cache=True, parallel=True)
def extract_patch_cells(cells, ox, oy, res, px, py, cos_h, sin_h, side):
    h, w = cells.shape
    half = side * res / 2.0
    out = np.zeros((side, side), dtype=np.float64)
    for r in prange(side):
        yv = (side - r - 0.5) * res - half
        for c in range(side):
            xv = (c + 0.5) * res - half
            wx = px + cos_h * xv - sin_h * yv
            wy = py + sin_h * xv + cos_h * yv
            col = int(np.floor((wx - ox) / res))
            row = int(np.floor((oy - wy) / res))
            if 0 <= row < h and 0 <= col < w:
                out[r, c] = cells[row, col]
    return out


@njit(cache=True, parallel=True)
def fuse_patch_cells(cells, ox, oy, res, patch, px, py, cos_h, sin_h,
                     r_lo, r_hi, c_lo, c_hi, l_max):
    side = patch.shape[0]
    half = side * res / 2.0
    for row in prange(r_lo, r_hi):
        wy = oy - (row + 0.5) * res
        for col in range(c_lo, c_hi):
            wx = ox + (col + 0.5) * res
            qx = cos_h * (wx - px) + sin_h * (wy - py)
            qy = -sin_h * (wx - px) + cos_h * (wy - py)
            pc = int(np.floor((qx + half) / res))
            pr = side - 1 - int(np.floor((qy + half) / res))
            if 0 <= pr < side and 0 <= pc < side:
                v = cells[row, col] + patch[pr, pc]
                if v > l_max:
                    v = l_max
                elif v < -l_max:
                    v = -l_max
                cells[row, col] = v


@njit(cache=True)
def ism_splat(cells, r0, c0, end_rows, end_cols, occ_flags, l_free, l_occ, l_max):
    for i in range(end_rows.shape[0]):
        path = bresenham_line(r0, c0, end_rows[i], end_cols[i])
        n = path.shape[0]
        last = n - 1 if occ_flags[i] else n
        for k in range(1, last):
            r, c = path[k, 0], path[k, 1]
            v = cells[r, c] + l_free
            if v > l_max:
                v = l_max
            elif v < -l_max:
                v = -l_max
            cells[r, c] = v
        if occ_flags[i]:
            r, c = path[n - 1, 0], path[n - 1, 1]
            v = cells[r, c] + l_occ
            if v > l_max:
                v = l_max
            elif v < -l_max:
                v = -l_max
            cells[r, c] = v


@njit(cache=True, parallel=True)
def conv_gather(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co = w.shape[0]
    k = w.shape[2]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    y = np.zeros((n, co, ho, wo), dtype=x.dtype)
    for b in prange(n):
        for o in range(co):
            for i in range(ho):
                i0 = i * stride - pad
                for j in range(wo):
                    j0 = j * stride - pad
                    acc = y[b, o, i, j]
                    for c in range(ci):
                        for ki in range(k):
                            a = i0 + ki
                            if a < 0 or a >= h:
                                continue
                            for kj in range(k):
                                bb = j0 + kj
                                if 0 <= bb < wd:
                                    acc += x[b, c, a, bb] * w[o, c, ki, kj]
                    y[b, o, i, j] = acc
    return y


@njit(cache=True, parallel=True)
def conv_scatter(y, w, stride, pad, h_out, w_out):
    n, co, ho, wo = y.shape
    ci = w.shape[1]
    k = w.shape[2]
    x = np.zeros((n, ci, h_out, w_out), dtype=y.dtype)
    for b in prange(n):
        for c in range(ci):
            for a in range(h_out):
                for bb in range(w_out):
                    acc = x[b, c, a, bb]
                    for ki in range(k):
                        ii = a + pad - ki
                        if ii < 0 or ii % stride != 0:
                            continue
                        i = ii // stride
                        if i >= ho:
                            continue
                        for kj in range(k):
                            jj = bb + pad - kj
                            if jj < 0 or jj % stride != 0:
                                continue
                            j = jj // stride
                            if j >= wo:
                                continue
                            for o in range(co):
                                acc += y[b, o, i, j] * w[o, c, ki, kj]
                    x[b, c, a, bb] = acc
    return x


@njit(cache=True, parallel=True)
def conv_wgrad(x, dy, stride, pad, k):
    n, ci, h, wd = x.shape
    co, ho, wo = dy.shape[1], dy.shape[2], dy.shape[3]
    dw = np.zeros((co, ci, k, k), dtype=x.dtype)
    for o in prange(co):
        for c in range(ci):
            for ki in range(k):
                for kj in range(k):
                    acc = dw[o, c, ki, kj]
                    for b in range(n):
                        for i in range(ho):
                            a = i * stride - pad + ki
                            if a < 0 or a >= h:
                                continue
                            for j in range(wo):
                                bb = j * stride - pad + kj
                                if 0 <= bb < wd:
                                    acc += x[b, c, a, bb] * dy[b, o, i, j]
                    dw[o, c, ki, kj] = acc
    return dw
