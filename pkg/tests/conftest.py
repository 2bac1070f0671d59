import numpy as np
import pytest
from hypothesis import settings

from nlwave.kernels import KernelSpec, bessel, constant, gaussian
from nlwave.linear import MultipointSpec
from nlwave.spectral import Field, Grid

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def grid():
    return Grid(1, 256, 40.0)


@pytest.fixture
def small_grid():
    return Grid(1, 64, 40.0)


@pytest.fixture
def kernel():
    """a = 0, bhat = exp(-|xi|^2), ghat = (1 + |xi|^2)^-1."""
    return KernelSpec(0.0, gaussian(1.0), bessel(2.0))


@pytest.fixture
def cauchy_kernel():
    return KernelSpec(0.0, constant(4.0), bessel(2.0))


@pytest.fixture
def mp1():
    return MultipointSpec((0.2,), (0.1,), (0.5,))


def bump(grid, amp=1.0, centre=0.0, width=1.0):
    return Field.from_function(grid, lambda x: amp * np.exp(-((x - centre) / width) ** 2))


def odd_bump(grid, amp=1.0, width=1.0):
    return Field.from_function(grid, lambda x: amp * x / width * np.exp(-(x / width) ** 2))


def zero_field(grid):
    return Field(grid, values=np.zeros(grid.shape))
