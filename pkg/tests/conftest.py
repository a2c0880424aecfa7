import numpy as np
import pytest

from pbss.signal_model import M1, default_scenario
from pbss.weightbank import WeightModel, default_bank


@pytest.fixture(scope="session")
def scenario_m1():
    return default_scenario(M1, label="M1")


@pytest.fixture(scope="session")
def ideal_quiet():
    return default_bank(model=WeightModel.IDEAL, noise_std=0.0)


@pytest.fixture(scope="session")
def lorentz_quiet():
    return default_bank(noise_std=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
