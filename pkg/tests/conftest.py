"""Shared fixtures for the test suite.

Heavyweight Monte Carlo fixtures live in test_acceptance.py; everything
here is cheap enough to build per session without noticeable cost.
"""

import numpy as np
import pytest

from meinhardt.domain import TorusGrid
from meinhardt.measurement import bump_kernel
from meinhardt.model import default_params


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def kernel():
    return bump_kernel()


@pytest.fixture(scope="session")
def grid_small():
    return TorusGrid(20.0, 128)


@pytest.fixture(scope="session")
def grid_medium():
    return TorusGrid(20.0, 500)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
