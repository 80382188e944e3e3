import numpy as np
import pytest

from ppqme.errors import DomainError
from ppqme.units import COTH_SERIES_THRESHOLD, HBAR_CMFS, KB_CMK, beta_from_temperature, thermal_coth


def test_constants():
    assert HBAR_CMFS == pytest.approx(5308.837, rel=1e-6)
    assert KB_CMK == pytest.approx(0.6950348, rel=1e-6)


def test_thermal_coth_branches_agree_at_threshold():
    below = thermal_coth(COTH_SERIES_THRESHOLD * (1 - 1e-9))
    above = thermal_coth(COTH_SERIES_THRESHOLD * (1 + 1e-9))
    assert below == pytest.approx(above, rel=1e-8)
    assert thermal_coth(1e-4) == pytest.approx(1 / np.tanh(1e-4), rel=1e-12)


def test_thermal_coth_array_and_scalar():
    x = np.array([1e-6, 0.5, 40.0])
    np.testing.assert_allclose(thermal_coth(x), [1e6, 1 / np.tanh(0.5), 1.0], rtol=1e-12)
    assert isinstance(thermal_coth(2.0), float)


@pytest.mark.parametrize("x", [0.0, -1.0, np.array([1.0, 0.0])])
def test_thermal_coth_domain(x):
    with pytest.raises(DomainError):
        thermal_coth(x)


def test_beta_from_temperature():
    assert beta_from_temperature(300.0) == pytest.approx(1 / (KB_CMK * 300.0))
    with pytest.raises(DomainError):
        beta_from_temperature(0.0)


def test_thermal_coth_is_monotone_and_bounded_below():
    x = np.logspace(-6, 2, 4001)
    values = thermal_coth(x)
    assert np.all(values >= 1.0)
    assert np.all(np.diff(values[x <= 5.0]) < 0)
    np.testing.assert_allclose(values[x >= 20.0], 1.0, rtol=0, atol=1e-15)
    # across the series switch the jump is no larger than the slope predicts
    for eps in (1e-6, 1e-9, 1e-12):
        lower = thermal_coth(COTH_SERIES_THRESHOLD * (1 - eps))
        upper = thermal_coth(COTH_SERIES_THRESHOLD * (1 + eps))
        assert 0 <= lower - upper <= 2.5e3 * eps + 1e-12
