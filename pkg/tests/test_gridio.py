"""Grid persistence and image export."""

import numpy as np
import pytest
from PIL import Image

from gridwise.errors import VersionMismatch
from gridwise.grid import OccupancyGrid, prob_to_logit
from gridwise.gridio import (export_pgm, export_png, grid_to_image, load_grid,
                             prob_to_byte, save_grid)


def test_binary_round_trip(tmp_path, rng):
    g = OccupancyGrid(13, 9, 0.25, (-3.0, 2.0))
    g.cells[:] = np.float32(rng.normal(size=(9, 13)))  # f32-representable
    save_grid(g, tmp_path / "m.ogrd")
    back = load_grid(tmp_path / "m.ogrd")
    assert back.width == 13 and back.height == 9
    assert back.resolution == 0.25
    assert back.origin == (-3.0, 2.0)
    assert np.array_equal(back.cells, g.cells)


def test_truncated_file_raises(tmp_path):
    g = OccupancyGrid(4, 4, 1.0, (0.0, 4.0))
    save_grid(g, tmp_path / "m.ogrd")
    raw = (tmp_path / "m.ogrd").read_bytes()
    (tmp_path / "short.ogrd").write_bytes(raw[:-7])
    with pytest.raises(VersionMismatch):
        load_grid(tmp_path / "short.ogrd")
    (tmp_path / "bad.ogrd").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(VersionMismatch):
        load_grid(tmp_path / "bad.ogrd")


def test_prob_to_byte_rounds_half_up():
    assert prob_to_byte(0.5) == 128
    assert prob_to_byte(0.0) == 0
    assert prob_to_byte(1.0) == 255


def test_unknown_map_exports_mid_gray(tmp_path):
    g = OccupancyGrid(6, 4, 1.0, (0.0, 4.0))
    export_pgm(g, tmp_path / "m.pgm")
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.startswith(b"P5\n6 4\n255\n")
    assert set(raw[len(b"P5\n6 4\n255\n"):]) == {128}


def test_row_zero_is_north_edge(tmp_path):
    # occupied stripe along the north (max-y) edge must land in image row 0
    g = OccupancyGrid(4, 3, 1.0, (0.0, 3.0))
    g.cells[0, :] = prob_to_logit(0.999999)
    img = grid_to_image(g)
    assert np.all(img[0] == 255)
    assert np.all(img[1:] == 128)


def test_png_matches_pgm_pixels(tmp_path, rng):
    g = OccupancyGrid(8, 5, 0.5, (0.0, 2.5))
    g.cells[:] = rng.normal(size=(5, 8))
    export_png(g, tmp_path / "m.png")
    png = np.asarray(Image.open(tmp_path / "m.png"))
    assert np.array_equal(png, grid_to_image(g))
