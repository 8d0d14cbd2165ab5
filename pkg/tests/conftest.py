import numpy as np
import pytest

from gspec.grid import make_grid


@pytest.fixture
def grid1():
    return make_grid(1, 256, 40.0)


def sech_soliton(x):
    return np.sqrt(2) / np.cosh(x)
