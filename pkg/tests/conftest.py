import numpy as np
import pytest

from fractaldrum.julia import RasterGrid
from fractaldrum.meshing import mesh_from_raster


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long reproduction tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def _square_grid(n: int, side: float = 1.0) -> RasterGrid:
    return RasterGrid(bits=np.ones((n, n), dtype=bool), origin=(0.0, 0.0), pixel_size=side / n)


@pytest.fixture
def square_grid():
    """Factory: an n x n fully filled raster covering [0, side]^2."""
    return _square_grid


@pytest.fixture(scope="module")
def unit_square_mesh():
    return mesh_from_raster(_square_grid(64))
