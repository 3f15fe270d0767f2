"""Facade over the active kernel backend (see :mod:`gridwise.backend`)."""

from . import backend

BACKEND = backend.select_backend()
backend.apply_thread_cap()

if BACKEND == "numba":
    from . import _kernels_numba as _impl
else:
    from . import _kernels_numpy as _impl

bresenham_line = _impl.bresenham_line
segment_hits = _impl.segment_hits
extract_patch_cells = _impl.extract_patch_cells
fuse_patch_cells = _impl.fuse_patch_cells
ism_splat = _impl.ism_splat
conv_gather = _impl.conv_gather
conv_scatter = _impl.conv_scatter
conv_wgrad = _impl.conv_wgrad
