import numpy as np
import pytest

from sdwave.data import compact_bump, gaussian
from sdwave.dynamics import ModelParams
from sdwave.nonlinearity import Nonlinearity
from sdwave.spectral import Grid, State


@pytest.fixture
def grid1d():
    return Grid(1, 100.0, 1024)


@pytest.fixture
def small_grid():
    return Grid(1, 100.0, 256)


@pytest.fixture
def cubic(grid1d):
    return ModelParams(0.75, Nonlinearity(), grid1d)


@pytest.fixture
def gauss_state(grid1d):
    return State(gaussian(grid1d, 1.0, 2.0), gaussian(grid1d, 0.5, 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def bump_forcing(grid, amplitude=1.0, radius=3.0):
    return compact_bump(grid, amplitude, radius)
