import numpy as np
import pytest

from gridwise.grid import OccupancyGrid, Pose2D
from gridwise.world import SceneSpec, generate_world, generate_trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_world():
    return generate_world(7)


@pytest.fixture(scope="session")
def small_trajectory(small_world):
    return generate_trajectory(small_world, 99)


@pytest.fixture
def random_map(rng):
    g = OccupancyGrid(40, 30, 0.5, (0.0, 15.0))
    g.cells[:] = rng.normal(0.0, 2.0, size=g.cells.shape)
    return g


def box_world(half=10.0, reflectivity=0.8, seed=0):
    """A closed square room centered on the origin."""
    from gridwise.world import World

    h = half
    segs = np.array([
        [-h, -h, h, -h],
        [h, -h, h, h],
        [h, h, -h, h],
        [-h, h, -h, -h],
    ])
    refl = np.full(4, reflectivity)
    return World(segs, refl, [], (-h - 1, -h - 1, h + 1, h + 1), seed)
