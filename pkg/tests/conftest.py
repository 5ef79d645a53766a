import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mcnls.grid import Field, make_grid
from mcnls.groundstate import petviashvili_solve

settings.register_profile("mcnls", deadline=None, derandomize=True, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mcnls")


@pytest.fixture(scope="session")
def g1():
    return make_grid(1, 512, 16)


@pytest.fixture(scope="session")
def Q1(g1):
    return petviashvili_solve(g1)


def gaussian(g, x0=0.0, xi=0.0, w=1.0):
    x = g.x_axis
    return Field(g, np.exp(-((x - x0) ** 2) / (2 * w**2) + 1j * xi * x))
