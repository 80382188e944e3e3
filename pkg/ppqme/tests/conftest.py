import pytest

from ppqme.bath import WeightingFunction
from ppqme.validation import OMEGA_C, reference_problem


@pytest.fixture(scope="session")
def step_problem():
    return reference_problem(WeightingFunction("step", OMEGA_C), t_max=100.0, dt=0.5)


@pytest.fixture(scope="session")
def smooth_problem():
    return reference_problem(WeightingFunction("smooth", OMEGA_C, 2.0), t_max=100.0, dt=0.5)


@pytest.fixture(scope="session")
def zero_problem():
    return reference_problem(WeightingFunction("zero"), t_max=100.0, dt=0.5)
