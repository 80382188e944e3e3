import numpy as np
import pytest

from ppqme.bath import (
    QuadratureScheme,
    SpectralDensityModel,
    WeightingFunction,
    check_weighting,
    integrate,
    weight,
)
from ppqme.errors import ConfigError, DivergentIntegral, DomainError


def test_ohmic_density():
    model = SpectralDensityModel(eta=0.5, omega_c=200.0)
    omega = np.array([10.0, 200.0, 1000.0])
    np.testing.assert_allclose(model.spectral(omega), np.pi * 0.5 * omega * np.exp(-omega / 200.0), rtol=1e-14)
    assert model.density(0, 1, 100.0) == 0.0
    assert model.density_matrix(omega).shape == (2, 2, 3)


@pytest.mark.parametrize("ohmicity, expected", [(1.0, 200.0), (3.0, 400.0)])
def test_reorganization_energy(ohmicity, expected):
    model = SpectralDensityModel(eta=1.0, omega_c=200.0, ohmicity=ohmicity)
    assert model.reorganization_energy() == pytest.approx(expected, rel=1e-9)


def test_tabulated_density_interpolates():
    model = SpectralDensityModel(family="tabulated", table_omega=[0.0, 100.0, 200.0], table_values=[0.0, 10.0, 0.0])
    np.testing.assert_allclose(model.spectral([50.0, 150.0, 500.0]), [5.0, 5.0, 0.0])
    assert model.omega_max == 200.0
    assert model.uses_soft_low_frequency()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"family": "lorentzian"},
        {"omega_c": 0.0},
        {"eta": -1.0},
        {"site_correlation": [[1.0, 2.0], [2.0, 1.0]]},
        {"family": "tabulated"},
    ],
)
def test_invalid_density_model(kwargs):
    with pytest.raises(ConfigError):
        SpectralDensityModel(**kwargs)


def test_weighting_kinds():
    omega = np.array([0.0, 100.0, 200.0, 400.0])
    np.testing.assert_array_equal(weight(WeightingFunction("unity"), omega), 1.0)
    np.testing.assert_array_equal(weight(WeightingFunction("zero"), omega), 0.0)
    np.testing.assert_array_equal(WeightingFunction("step", 200.0)(omega), [0.0, 0.0, 1.0, 1.0])
    smooth = WeightingFunction("smooth", 200.0, 2.0)(omega)
    np.testing.assert_allclose(smooth, 1 - np.exp(-((omega / 200.0) ** 2)), rtol=1e-14)
    assert smooth[0] == 0.0


def test_weighting_rejects_negative_frequency():
    with pytest.raises(DomainError):
        weight(WeightingFunction("unity"), -1.0)


@pytest.mark.parametrize("kind, omega_h, alpha", [("step", None, None), ("smooth", 200.0, None), ("bump", None, None)])
def test_invalid_weighting(kind, omega_h, alpha):
    with pytest.raises(ConfigError):
        WeightingFunction(kind, omega_h, alpha)


def test_check_weighting_rejects_small_alpha_for_ohmic():
    ohmic = SpectralDensityModel()
    with pytest.raises(ConfigError) as excinfo:
        check_weighting(ohmic, WeightingFunction("smooth", 200.0, 1.0))
    assert excinfo.value.quantity == "weighting.alpha"
    check_weighting(ohmic, WeightingFunction("smooth", 200.0, 1.0), allow_divergent_alpha=True)
    check_weighting(SpectralDensityModel(ohmicity=3.0), WeightingFunction("smooth", 200.0, 1.0))
    check_weighting(ohmic, WeightingFunction("smooth", 200.0, 2.0))


def test_quadrature_integrates_exponential():
    value = integrate(lambda w: np.exp(-w / 200.0), QuadratureScheme(), 200.0)
    assert value == pytest.approx(200.0, rel=1e-12)


def test_quadrature_integrable_singularity():
    value = integrate(lambda w: np.exp(-w / 200.0) / np.sqrt(w), QuadratureScheme(), 200.0)
    assert value == pytest.approx(np.sqrt(np.pi * 200.0), rel=1e-5)


def test_quadrature_detects_log_divergence():
    with pytest.raises(DivergentIntegral):
        integrate(lambda w: np.exp(-w / 200.0) / w, QuadratureScheme(), 200.0, label="1/w")


def test_rule_has_breakpoint_edge_and_time_resolution():
    scheme = QuadratureScheme()
    edges = scheme.edges(200.0, breakpoints=(130.0,), t_max=1000.0)
    assert 130.0 in edges
    assert np.max(np.diff(edges)) <= scheme.panel_width(200.0, 1000.0) * (1 + 1e-12)
    assert scheme.panel_width(200.0, 1000.0) < 50.0
    rule = scheme.rule(200.0)
    assert rule.nodes.size == rule.weights.size == rule.levels.size
    assert rule.depth == scheme.geometric_levels


def test_refined_scheme_doubles_nodes():
    scheme = QuadratureScheme()
    refined = scheme.refined()
    assert refined.nodes_per_panel == 2 * scheme.nodes_per_panel
    assert refined.periods_per_panel == scheme.periods_per_panel


def test_measure_carries_site_correlation():
    kappa = [[1.0, 0.5], [0.5, 1.0]]
    model = SpectralDensityModel(site_correlation=kappa)
    measure = model.measure(QuadratureScheme(), WeightingFunction("step", 200.0))
    np.testing.assert_allclose(measure.density[0, 1], 0.5 * measure.density[0, 0])
    assert measure.n_sites == 2


def test_auxiliary_densities_for_independent_sites():
    model = SpectralDensityModel(omega_c=200.0)
    omega = np.linspace(1.0, 2000.0, 64)
    spectral = model.spectral(omega)
    np.testing.assert_allclose(model.aux_density_1(0, 0, 1, omega), spectral)
    np.testing.assert_allclose(model.aux_density_1(0, 1, 0, omega), -spectral)
    np.testing.assert_allclose(model.aux_density_2(0, 1, 0, 1, omega), 2 * spectral)
    np.testing.assert_allclose(model.aux_density_2(0, 1, 1, 0, omega), -2 * spectral)
    assert not np.any(model.aux_density_1(0, 1, 1, omega))
    assert not np.any(model.aux_density_2(0, 1, 1, 1, omega))


def test_auxiliary_density_2_is_non_negative():
    kappa = [[1.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 0.8]]
    model = SpectralDensityModel(n_sites=3, omega_c=200.0, site_correlation=kappa)
    omega = np.linspace(0.0, 5000.0, 501)
    for j in range(3):
        for k in range(3):
            assert np.all(model.aux_density_2(j, k, j, k, omega) >= 0)


def test_measure_auxiliary_densities_match_model():
    model = SpectralDensityModel(site_correlation=[[1.0, 0.4], [0.4, 1.0]])
    measure = model.measure(QuadratureScheme(), WeightingFunction("step", 200.0))
    np.testing.assert_allclose(measure.aux_density_1(0, 0, 1), model.aux_density_1(0, 0, 1, measure.nodes))
    np.testing.assert_allclose(measure.aux_density_2(0, 1, 0, 1), model.aux_density_2(0, 1, 0, 1, measure.nodes))
    np.testing.assert_allclose(measure.aux_density_2(0, 1, 0, 1), 1.2 * model.spectral(measure.nodes), rtol=1e-14)
