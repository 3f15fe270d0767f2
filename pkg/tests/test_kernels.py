"""Backend parity and oracle checks for the hot kernels."""

import math
from fractions import Fraction

import numpy as np
import pytest

from gridwise import _kernels_numba as knb
from gridwise import _kernels_numpy as knp
from gridwise import kernels

BACKENDS = [("numpy", knp), ("numba", knb)]


def bresenham_oracle(r0, c0, r1, c1):
    """Brute-force nearest-cell line walk in exact rational arithmetic.

    Along the driving axis the minor coordinate is the integer nearest the
    exact line, ties resolved toward the start cell.
    """
    dr, dc = r1 - r0, c1 - c0
    if abs(dr) >= abs(dc):
        n, s_major = abs(dr), (1 if dr > 0 else -1 if dr < 0 else 0)
        s_minor = 1 if dc > 0 else -1 if dc < 0 else 0
        minor_span = abs(dc)
    else:
        n, s_major = abs(dc), (1 if dc > 0 else -1 if dc < 0 else 0)
        s_minor = 1 if dr > 0 else -1 if dr < 0 else 0
        minor_span = abs(dr)
    cells = []
    for k in range(n + 1):
        if n == 0:
            off = 0
        else:
            exact = Fraction(minor_span * k, n)
            floor = exact.numerator // exact.denominator
            frac = exact - floor
            off = floor + (1 if frac > Fraction(1, 2) else 0)
        if abs(dr) >= abs(dc):
            cells.append((r0 + s_major * k, c0 + s_minor * off))
        else:
            cells.append((r0 + s_minor * off, c0 + s_major * k))
    return np.array(cells, dtype=np.int64)


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_bresenham_matches_oracle_exhaustive(name, mod):
    for r0 in range(-3, 4):
        for c0 in range(-3, 4):
            for r1 in range(-3, 4):
                for c1 in range(-3, 4):
                    got = mod.bresenham_line(r0, c0, r1, c1)
                    want = bresenham_oracle(r0, c0, r1, c1)
                    assert np.array_equal(got, want), (r0, c0, r1, c1)


def test_bresenham_backend_parity(rng):
    pts = rng.integers(-60, 60, size=(300, 4))
    for r0, c0, r1, c1 in pts:
        a = knp.bresenham_line(r0, c0, r1, c1)
        b = knb.bresenham_line(r0, c0, r1, c1)
        assert np.array_equal(a, b)


def shapely_ray_oracle(segs, ox, oy, angle, max_range):
    from shapely.geometry import LineString, Point

    end = (ox + max_range * math.cos(angle), oy + max_range * math.sin(angle))
    ray = LineString([(ox, oy), end])
    best = math.inf
    for x1, y1, x2, y2 in segs:
        inter = ray.intersection(LineString([(x1, y1), (x2, y2)]))
        if inter.is_empty or not isinstance(inter, Point):
            continue  # parallel/collinear overlaps are treated as misses
        best = min(best, math.hypot(inter.x - ox, inter.y - oy))
    return best


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_segment_hits_matches_shapely(name, mod, rng):
    segs = rng.uniform(-15.0, 15.0, size=(40, 4))
    angles = rng.uniform(-math.pi, math.pi, size=64)
    ranges, idx = mod.segment_hits(0.3, -0.7, np.cos(angles), np.sin(angles),
                                   segs, 25.0)
    for i, ang in enumerate(angles):
        want = shapely_ray_oracle(segs, 0.3, -0.7, ang, 25.0)
        if math.isinf(want):
            assert idx[i] == -1
        else:
            assert ranges[i] == pytest.approx(want, abs=1e-9)


def test_conv_kernels_backend_parity(rng):
    x = rng.normal(size=(2, 3, 12, 12))
    w = rng.normal(size=(5, 3, 4, 4))
    ya = knp.conv_gather(x, w, 2, 1)
    yb = knb.conv_gather(x, w, 2, 1)
    assert np.allclose(ya, yb, atol=1e-12)
    dy = rng.normal(size=ya.shape)
    assert np.allclose(knp.conv_scatter(dy, w, 2, 1, 12, 12),
                       knb.conv_scatter(dy, w, 2, 1, 12, 12), atol=1e-12)
    assert np.allclose(knp.conv_wgrad(x, dy, 2, 1, 4),
                       knb.conv_wgrad(x, dy, 2, 1, 4), atol=1e-12)


@pytest.mark.parametrize("name,mod", BACKENDS)
def test_conv_adjoint_identity(name, mod, rng):
    x = rng.normal(size=(2, 3, 8, 8))
    w = rng.normal(size=(4, 3, 4, 4))
    y = rng.normal(size=(2, 4, 4, 4))
    lhs = float((mod.conv_gather(x, w, 2, 1) * y).sum())
    rhs = float((x * mod.conv_scatter(y, w, 2, 1, 8, 8)).sum())
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_patch_kernels_backend_parity(rng):
    cells = rng.normal(size=(30, 40))
    args = (1.0, 14.0, 0.5, 9.7, 6.1, math.cos(0.7), math.sin(0.7), 12)
    a = knp.extract_patch_cells(cells, *args)
    b = knb.extract_patch_cells(cells, *args)
    assert np.array_equal(a, b)

    patch = rng.normal(size=(12, 12))
    ca = cells.copy()
    cb = cells.copy()
    fuse_args = (1.0, 14.0, 0.5, patch, 9.7, 6.1, math.cos(0.7), math.sin(0.7),
                 0, 30, 0, 40, 50.0)
    knp.fuse_patch_cells(ca, *fuse_args)
    knb.fuse_patch_cells(cb, *fuse_args)
    assert np.array_equal(ca, cb)


def test_active_backend_exposes_all_kernels():
    for fn in ("bresenham_line", "segment_hits", "extract_patch_cells",
               "fuse_patch_cells", "ism_splat", "conv_gather", "conv_scatter",
               "conv_wgrad"):
        assert callable(getattr(kernels, fn))
    assert kernels.BACKEND in ("numpy", "numba")
