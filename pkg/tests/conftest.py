import numpy as np
import pytest

from varcalc.config import SolverConfig


@pytest.fixture
def config():
    return SolverConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
