import numpy as np
import pytest

from purcellsim.dynamics import default_system_params


@pytest.fixture(scope="session")
def device():
    """Reference device parameters (weak coupling, T1 ~ 22 ps)."""
    return default_system_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
