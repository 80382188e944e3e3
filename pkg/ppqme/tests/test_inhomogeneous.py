import numpy as np
import pytest

from ppqme.bath import WeightingFunction
from ppqme.correlations import TimeGrid
from ppqme.inhomogeneous import (
    InhomKernels,
    InhomogeneousTerms,
    inhom1,
    inhom2,
    kernel_F,
    kernel_H1,
    kernel_H2,
    kernel_L,
    transition_operators,
)
from ppqme.oracle import DiscreteBath, FockBath, discrete_correlations, fock_inhom1, fock_inhom2
from ppqme.polaron import SiteHamiltonian
from ppqme.propagator import initial_state, prepare
from ppqme.validation import TEMPERATURE

MODE = DiscreteBath([400.0], [[0.3, -0.1]])
SMOOTH = WeightingFunction("smooth", 400.0, 2.0)
BIASED = SiteHamiltonian.from_pairs([100.0, 0.0], [(0, 1, 80.0)])


def test_zero_weighting_terms_vanish(zero_problem):
    frame, tables = zero_problem.frame, zero_problem.tables
    sigma0 = initial_state(2, 0)
    kernels = InhomKernels(tables, frame)
    for i in (0, 3, 40, 400):
        assert np.max(np.abs(inhom1(i, frame, tables, sigma0))) <= 1e-14
    for i in (1, 8, 20):
        assert np.max(np.abs(inhom2(i, frame, kernels, sigma0))) <= 1e-14


@pytest.mark.parametrize("i", [5, 40, 200])
def test_first_order_term_is_traceless_and_hermitian(smooth_problem, i):
    term = inhom1(i, smooth_problem.frame, smooth_problem.tables, initial_state(2, 0))
    scale = np.max(np.abs(term))
    assert scale > 0
    assert abs(np.trace(term)) <= 1e-12 * scale
    np.testing.assert_allclose(term, term.conj().T, rtol=0, atol=1e-10 * scale)


def test_second_order_term_is_traceless_and_hermitian(smooth_problem):
    frame, tables = smooth_problem.frame, smooth_problem.tables
    term = inhom2(24, frame, InhomKernels(tables, frame), initial_state(2, 0))
    scale = np.max(np.abs(term))
    assert scale > 0
    assert abs(np.trace(term)) <= 1e-12 * scale
    np.testing.assert_allclose(term, term.conj().T, rtol=0, atol=1e-14 * scale)


def test_second_order_term_starts_at_zero(smooth_problem):
    frame, tables = smooth_problem.frame, smooth_problem.tables
    assert not np.any(inhom2(0, frame, InhomKernels(tables, frame), initial_state(2, 0)))


def test_transition_operators(step_problem):
    A = transition_operators(step_problem.frame)
    np.testing.assert_allclose(A[0, 0] + A[1, 1], np.eye(2), atol=1e-14)


def test_kernel_wrappers(smooth_problem):
    kernels = InhomKernels(smooth_problem.tables, smooth_problem.frame)
    taus = np.arange(11)
    F = kernels.F(10, taus, 0, 1, 1, 0, 0, 1)
    np.testing.assert_array_equal(kernel_F(10, taus, (0, 1, 1, 0, 0, 1), kernels), F)
    np.testing.assert_array_equal(kernel_H1(10, taus, (0, 0, 1, 1, 0), kernels), kernels.H1(10, taus, 0, 0, 1, 1, 0))
    np.testing.assert_array_equal(kernel_H2(10, taus, (0, 1, 1, 0, 0), kernels), kernels.H2(10, taus, 0, 1, 1, 0, 0))
    np.testing.assert_array_equal(kernel_L(10, taus, (0, 1, 0, 0), kernels), kernels.L(10, taus, 0, 1, 0, 0))


def test_trace_skips_uncoupled_combinations(smooth_problem):
    kernels = InhomKernels(smooth_problem.tables, smooth_problem.frame)
    kernels.couplings = np.zeros((2, 2))
    assert kernels.trace(4, np.arange(5), 0, 1, 1, 0, 0, 0) is None
    assert kernels.trace(4, np.arange(5), 0, 0, 1, 0, 0, 0) is None
    assert kernels.trace(4, np.arange(5), 0, 1, 0, 0, 0, 0) is None
    assert kernels.trace(4, np.arange(5), 0, 0, 1, 1, 0, 0) is not None


def test_terms_by_order(smooth_problem):
    frame, tables = smooth_problem.frame, smooth_problem.tables
    sigma0 = initial_state(2, 0)
    assert not np.any(InhomogeneousTerms(0, frame, tables, sigma0).at(30))
    first = InhomogeneousTerms(1, frame, tables, sigma0)
    np.testing.assert_array_equal(first.at(30), inhom1(30, frame, tables, sigma0))
    assert first.at(30) is first.at(30)
    second = InhomogeneousTerms(2, frame, tables, sigma0)
    expected = inhom1(12, frame, tables, sigma0) + inhom2(12, frame, InhomKernels(tables, frame), sigma0)
    np.testing.assert_allclose(second.at(12), expected, rtol=0, atol=1e-18)


def test_invalid_order(smooth_problem):
    with pytest.raises(ValueError):
        InhomogeneousTerms(3, smooth_problem.frame, smooth_problem.tables, initial_state(2, 0))


@pytest.fixture(scope="module")
def mode_fock():
    return FockBath(MODE, SMOOTH, TEMPERATURE, cutoff=30)


def _mode_problem(grid):
    return prepare(BIASED, discrete_correlations(MODE, SMOOTH, TEMPERATURE), grid)


@pytest.mark.parametrize("sigma0", [initial_state(2, 0), np.full((2, 2), 0.5)])
def test_first_order_term_matches_fock_space_at_100_fs(mode_fock, sigma0):
    grid = TimeGrid(0.5, 100.0)
    problem = _mode_problem(grid)
    closed = inhom1(grid.index(100.0), problem.frame, problem.tables, sigma0)
    traced = fock_inhom1(mode_fock, problem.frame, 100.0, sigma0)
    scale = np.max(np.abs(closed))
    assert scale > 0
    np.testing.assert_allclose(traced, closed, rtol=0, atol=1e-7 * scale)


def test_second_order_term_matches_fock_space_at_50_fs(mode_fock):
    grid = TimeGrid(1.0, 50.0)
    problem = _mode_problem(grid)
    frame, sigma0 = problem.frame, initial_state(2, 0)
    index = grid.index(50.0)
    closed = inhom2(index, frame, InhomKernels(problem.tables, frame), sigma0)
    traced = fock_inhom2(mode_fock, frame, grid, index, sigma0)
    scale = np.max(np.abs(closed))
    assert scale > 0
    np.testing.assert_allclose(traced, closed, rtol=0, atol=1e-7 * scale)
