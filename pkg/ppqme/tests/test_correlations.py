import numpy as np
import pytest

from ppqme import correlations
from ppqme.bath import QuadratureScheme, SpectralDensityModel, WeightingFunction
from ppqme.correlations import BathCorrelations, TimeGrid, build_tables, simpson_complex
from ppqme.errors import ConfigError, DivergentIntegral
from ppqme.oracle import DiscreteBath
from ppqme.units import HBAR_CMFS
from ppqme.validation import OMEGA_C, TEMPERATURE


def test_time_grid():
    grid = TimeGrid(0.5, 10.0)
    assert grid.n_steps == 20
    assert grid.size == 41
    assert grid.times[-1] == pytest.approx(10.0)
    assert grid.index(2.25) == 9
    with pytest.raises(ValueError):
        grid.index(2.3)


@pytest.mark.parametrize("dt, t_max", [(0.0, 10.0), (0.5, -1.0), (0.3, 1.0)])
def test_time_grid_validation(dt, t_max):
    with pytest.raises(ConfigError):
        TimeGrid(dt, t_max)


def test_zero_weighting_tables(zero_problem):
    t = zero_problem.tables
    assert not np.any(t.K)
    assert not np.any(t.M)
    assert not np.any(t.h)
    np.testing.assert_array_equal(t.f, 1.0)
    np.testing.assert_array_equal(t.debye_waller, 1.0)
    assert np.any(t.C)


def test_step_weighting_has_no_mixed_terms(step_problem):
    t = step_problem.tables
    assert not np.any(t.M)
    assert not np.any(t.h)
    assert np.any(t.K) and np.any(t.C)


def test_symmetries(smooth_problem):
    t = smooth_problem.tables
    np.testing.assert_array_equal(t.K[0, 1, 0, 1], t.K[1, 0, 1, 0])
    np.testing.assert_array_equal(t.K[0, 1, 1, 0], -t.K[0, 1, 0, 1])
    np.testing.assert_array_equal(t.M[0, 0, 1], -t.M[0, 1, 0])
    np.testing.assert_array_equal(t.C[0, 1], t.C[1, 0])
    np.testing.assert_allclose(np.abs(t.f), 1.0, atol=1e-12)
    assert t.h.dtype == float
    for table in (t.K, t.M, t.C):
        assert not np.any(table[..., 0].imag)


def test_debye_waller_matches_K_at_origin(smooth_problem):
    t = smooth_problem.tables
    exponent = smooth_problem.correlations.debye_waller_exponent(0, 1)
    assert t.debye_waller[0, 1] == pytest.approx(np.exp(-exponent / 2), rel=1e-12)
    assert t.K[0, 1, 0, 1, 0].real == pytest.approx(exponent, rel=1e-12)
    assert 0 < t.debye_waller[0, 1] < 1


def test_scalar_and_table_agree(smooth_problem):
    corr, t = smooth_problem.correlations, smooth_problem.tables
    i = 37
    time = t.times[i]
    assert corr.corr_K(time, 0, 1, 0, 1) == pytest.approx(t.K[0, 1, 0, 1, i], rel=1e-10)
    assert corr.corr_M(time, 0, 0, 1) == pytest.approx(t.M[0, 0, 1, i], rel=1e-10)
    assert corr.corr_C(time, 0, 0) == pytest.approx(t.C[0, 0, i], rel=1e-10)
    assert corr.phase_f(time, 0, 1, 0) == pytest.approx(t.f[0, 1, 0, i], rel=1e-10)
    assert corr.real_h(time, 0, 0) == pytest.approx(t.h[0, 0, i], rel=1e-10)


def test_energy_shift_is_positive(smooth_problem):
    shift = smooth_problem.tables.energy_shift
    assert np.all(shift > 0)
    assert shift[0] == pytest.approx(shift[1])


def test_unity_weighting_ohmic_diverges():
    corr = BathCorrelations.from_model(SpectralDensityModel(omega_c=OMEGA_C), WeightingFunction("unity"), TEMPERATURE)
    with pytest.raises(DivergentIntegral):
        corr.debye_waller_exponent(0, 1)
    with pytest.raises(DivergentIntegral):
        corr.corr_K(0.0, 0, 1, 0, 1)


def test_unity_weighting_super_ohmic_converges():
    model = SpectralDensityModel(omega_c=OMEGA_C, ohmicity=3.0, eta=0.1)
    corr = BathCorrelations.from_model(model, WeightingFunction("unity"), TEMPERATURE, t_max=50.0)
    tables = build_tables(corr, TimeGrid(0.5, 50.0))
    assert not np.any(tables.M)
    assert not np.any(tables.C)
    assert 0 < tables.debye_waller[0, 1] < 1


def test_single_mode_zero_temperature():
    omega = 500.0
    bath = DiscreteBath([omega], [[1.0, 0.0]])
    corr = BathCorrelations(bath.measure(), WeightingFunction("unity"), 1.0)
    times = np.linspace(0.0, 100.0, 11)
    np.testing.assert_allclose(corr.corr_K(times, 0, 1, 0, 1), np.exp(-1j * omega * times / HBAR_CMFS), atol=1e-12)


def test_chunked_transform_matches(smooth_problem, monkeypatch):
    corr = smooth_problem.correlations
    times = smooth_problem.tables.times
    whole = corr.corr_C(times, 0, 0)
    monkeypatch.setattr(correlations, "CHUNK_ELEMENTS", corr.nodes.size * 7)
    np.testing.assert_allclose(corr.corr_C(times, 0, 0), whole, rtol=0, atol=1e-12 * np.max(np.abs(whole)))


def test_named_columns():
    two = TimeGrid(0.5, 1.0)
    model = SpectralDensityModel(n_sites=3, omega_c=OMEGA_C)
    corr = BathCorrelations.from_model(model, WeightingFunction("step", OMEGA_C), TEMPERATURE, t_max=1.0)
    columns = build_tables(corr, two).named_columns()
    assert {"K_12_12", "K_12_23", "M_1_12", "C_11", "f_12_3", "h_2_3"} <= set(columns)
    assert all(values.shape == (two.size,) for values in columns.values())


def test_two_state_view(step_problem):
    view = step_problem.tables.two_state()
    assert set(view) == {"K", "M", "C", "f", "h"}
    np.testing.assert_array_equal(view["K"], step_problem.tables.K[0, 1, 0, 1])


def test_simpson_complex():
    x = np.linspace(0.0, np.pi, 201)
    assert simpson_complex(np.exp(1j * x), x[1] - x[0]) == pytest.approx(2j, abs=1e-8)
    assert simpson_complex(np.ones(1), 0.1) == 0


def test_kernels_start_at_zero(step_problem):
    kernels = step_problem.kernels
    for table in list(kernels.W.values()) + list(kernels.X.values()):
        assert not np.any(table[..., 0])
    assert kernels.channel(0, 1, 0, 1)[0] == "W"
    assert kernels.channel(0, 0, 0, 1)[0] == "Y"
    assert kernels.channel(0, 1, 1, 1)[0] == "Y"
    assert kernels.channel(0, 0, 1, 1)[0] == "X"


@pytest.mark.parametrize("weighting", [WeightingFunction("smooth", OMEGA_C, 2.0), WeightingFunction("step", OMEGA_C)])
def test_tables_converge_under_node_doubling(weighting):
    model = SpectralDensityModel(omega_c=OMEGA_C)
    grid = TimeGrid(0.5, 100.0)
    scheme = QuadratureScheme()
    coarse = build_tables(BathCorrelations.from_model(model, weighting, TEMPERATURE, scheme, t_max=100.0), grid)
    fine = build_tables(BathCorrelations.from_model(model, weighting, TEMPERATURE, scheme.refined(), t_max=100.0), grid)
    for name in ("K", "M", "C", "f", "h"):
        a, b = getattr(coarse, name), getattr(fine, name)
        assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b)), name
