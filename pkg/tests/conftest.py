import numpy as np
import pytest

from ctmkit.core_grid import default_grid
from ctmkit.potentials import ScalarPotentialSpec, scalar_config


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def small_grid():
    return default_grid(1024, 16.0 * np.pi)


@pytest.fixture(scope="session")
def pt1():
    return ScalarPotentialSpec.poschl_teller(1)


@pytest.fixture(scope="session")
def pt1_static(pt1):
    return scalar_config([pt1], [0.0], [0.0])
