"""Grid persistence: binary log-odds format plus PGM/PNG image export.

Binary format (little-endian): magic ``OGRD``, u32 width, u32 height,
f64 resolution, f64 origin_x, f64 origin_y, then row-major f32 log-odds.

Image export maps occupancy probability [0, 1] to [black, white] bytes
(round half up); row 0 of the image is the north edge of the map.
"""

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import VersionMismatch
from .grid import OccupancyGrid, logit_to_prob

_MAGIC = b"OGRD"
_HEADER = struct.Struct("<4sIIddd")


def save_grid(grid: OccupancyGrid, path) -> None:
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, grid.width, grid.height,
                             grid.resolution, grid.origin[0], grid.origin[1]))
        f.write(grid.cells.astype("<f4").tobytes())


def load_grid(path) -> OccupancyGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise VersionMismatch(f"{path}: truncated grid header")
    magic, width, height, res, ox, oy = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise VersionMismatch(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size:]
    expected = width * height * 4
    if len(body) != expected:
        raise VersionMismatch(
            f"{path}: expected {expected} payload bytes, found {len(body)}")
    cells = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return OccupancyGrid(width, height, res, (ox, oy),
                         cells.reshape(height, width))


def prob_to_byte(p) -> np.ndarray:
    """[0,1] probability to uint8, round half up (0.5 -> 128)."""
    return np.floor(np.asarray(p) * 255.0 + 0.5).astype(np.uint8)


def grid_to_image(grid: OccupancyGrid) -> np.ndarray:
    return prob_to_byte(logit_to_prob(grid.cells))


def export_pgm(grid: OccupancyGrid, path) -> None:
    img = grid_to_image(grid)
    with open(path, "wb") as f:
        f.write(b"P5\n")
        f.write(f"{grid.width} {grid.height}\n".encode())
        f.write(b"255\n")
        f.write(img.tobytes())


def export_png(grid: OccupancyGrid, path) -> None:
    Image.fromarray(grid_to_image(grid), mode="L").save(path, format="PNG")
