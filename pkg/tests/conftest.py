import numpy as np
import pytest

from mohardy.grid import Grid, GridFunction


@pytest.fixture(scope="session")
def grid1():
    return Grid.box(-4.0, 4.0, 512, 1)


@pytest.fixture(scope="session")
def grid_small():
    return Grid.box(-4.0, 4.0, 128, 1)


@pytest.fixture(scope="session")
def grid2():
    return Grid.box(-4.0, 4.0, 64, 2)


def indicator(grid, lo, hi):
    x = grid.coordinates()
    inside = np.all((x >= lo) & (x <= hi), axis=-1)
    return GridFunction(grid, inside.astype(float))
