"""
Self-contained check suite run by `ppqme validate`.

Each check builds its own small scenario and returns a CheckResult with the residual it
measured and the tolerance it was held to.
"""

import logging
from collections import namedtuple

import numpy as np

from ppqme.bath import QuadratureScheme, SpectralDensityModel, WeightingFunction
from ppqme.correlations import BathCorrelations, TimeGrid
from ppqme.errors import DivergentIntegral, PpqmeError
from ppqme.inhomogeneous import InhomKernels, inhom1, inhom2
from ppqme.oracle import (
    DiscreteBath,
    FockBath,
    FockSpaceModel,
    discrete_corr,
    discretize,
    exact_propagate,
    fock_relaxation_tensor,
)
from ppqme.polaron import SiteHamiltonian
from ppqme.propagator import PropagationSettings, initial_state, prepare, propagate
from ppqme.relaxation import assemble_R, assemble_R_two_state, redfield_R

logger = logging.getLogger(__name__)

CheckResult = namedtuple("CheckResult", ["name", "passed", "residual", "tolerance", "detail"])

OMEGA_C = 200.0
TEMPERATURE = 300.0
COUPLING = 300.0


def reference_model(ohmicity: float = 1.0, eta: float = 1.0) -> SpectralDensityModel:
    return SpectralDensityModel(n_sites=2, eta=eta, omega_c=OMEGA_C, ohmicity=ohmicity)


def reference_hamiltonian(coupling: float = COUPLING) -> SiteHamiltonian:
    return SiteHamiltonian.from_pairs([0.0, 0.0], [(0, 1, coupling)])


def reference_problem(weighting: WeightingFunction, t_max: float, dt: float, model=None, hamiltonian=None):
    model = model or reference_model()
    correlations = BathCorrelations.from_model(model, weighting, TEMPERATURE, QuadratureScheme(), t_max=t_max)
    return prepare(hamiltonian or reference_hamiltonian(), correlations, TimeGrid(dt, t_max))


def _result(name, residual, tolerance, detail=""):
    residual = float(residual)
    return CheckResult(name, bool(residual <= tolerance), residual, tolerance, detail)


def check_w_consistency(corrupt_w: bool = False) -> CheckResult:
    problem = reference_problem(WeightingFunction("step", OMEGA_C), t_max=50.0, dt=0.5)
    w = problem.frame.debye_waller.copy()
    if corrupt_w:
        w[0, 1] *= 1.01
    residual = np.max(np.abs(problem.tables.debye_waller - w))
    return _result("w consistency exp(-K(0)/2) = w_jk", residual, 1e-10, f"w_12={w[0, 1]:.6f}")


def check_fock_debye_waller() -> CheckResult:
    bath = DiscreteBath([400.0], [[0.3, -0.2]])
    weighting = WeightingFunction("unity")
    fock = FockBath(bath, weighting, TEMPERATURE, cutoff=20)
    exponent = discrete_corr("K", 0.0, bath, weighting, TEMPERATURE, (0, 1, 0, 1)).real
    residual = abs(fock.debye_waller(0, 1) - np.exp(-exponent / 2.0))
    return _result("Fock-space Debye-Waller factor", residual, 1e-8)


def check_redfield_equivalence(n_times: int = 20) -> list:
    problem = reference_problem(WeightingFunction("zero"), t_max=200.0, dt=0.5)
    frame, tables, kernels = problem.frame, problem.tables, problem.kernels
    rng = np.random.default_rng(0)
    indices = rng.integers(0, tables.grid.size, size=n_times)
    tensor = max(np.max(np.abs(assemble_R(i, frame, kernels) - redfield_R(i, frame, tables))) for i in indices)

    sigma0 = initial_state(2, 0)
    inhom_kernels = InhomKernels(tables, frame)
    inhom = max(np.max(np.abs(inhom1(i, frame, tables, sigma0))) for i in indices)
    inhom = max([inhom] + [np.max(np.abs(inhom2(i, frame, inhom_kernels, sigma0))) for i in range(0, 21, 4)])
    return [
        _result("zero weighting: R equals conventional time-local tensor", tensor, 1e-10),
        _result("zero weighting: inhomogeneous terms vanish", inhom, 1e-14),
    ]


def check_unity_limits() -> list:
    results = []
    try:
        reference_problem(WeightingFunction("unity"), t_max=50.0, dt=0.5)
        results.append(CheckResult("unity weighting, Ohmic: divergence detected", False, np.nan, 0.0, "no error"))
    except DivergentIntegral as exc:
        results.append(CheckResult("unity weighting, Ohmic: divergence detected", True, 0.0, 0.0, str(exc)))

    problem = reference_problem(WeightingFunction("unity"), t_max=100.0, dt=0.5, model=reference_model(3.0, 0.1))
    tables = problem.tables
    residual = max(np.max(np.abs(tables.M)), np.max(np.abs(tables.C)))
    results.append(_result("unity weighting, super-Ohmic: M and C vanish", residual, 1e-14))
    frame, kernels = problem.frame, problem.kernels
    channel = max(
        np.max(np.abs(assemble_R(i, frame, kernels) - assemble_R(i, frame, kernels, "W")))
        for i in range(0, tables.grid.size, 40)
    )
    results.append(_result("unity weighting, super-Ohmic: only W channels", channel, 1e-14))
    return results


def check_two_state(n_samples: int = 100, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    residual = 0.0
    for _ in range(n_samples):
        omega_h = OMEGA_C * 10 ** rng.uniform(-1, 1)
        alpha = rng.uniform(1.5, 4.0)
        bias = rng.uniform(-300.0, 300.0)
        hamiltonian = SiteHamiltonian.from_pairs([bias, 0.0], [(0, 1, COUPLING)])
        problem = reference_problem(WeightingFunction("smooth", omega_h, alpha), 50.0, 0.5, hamiltonian=hamiltonian)
        index = int(rng.integers(0, problem.tables.grid.size))
        general = assemble_R(index, problem.frame, problem.kernels)
        special = assemble_R_two_state(index, problem.frame, problem.kernels)
        residual = max(residual, np.max(np.abs(general - special)))
    return _result("two-state tensor equals general-N tensor", residual, 1e-12, f"{n_samples} biased samples")


def check_step_additivity() -> list:
    problem = reference_problem(WeightingFunction("step", OMEGA_C), t_max=100.0, dt=0.5)
    frame, kernels = problem.frame, problem.kernels
    residual = 0.0
    for i in range(0, problem.tables.grid.size, 20):
        parts = assemble_R(i, frame, kernels, "W") + assemble_R(i, frame, kernels, "X")
        residual = max(residual, np.max(np.abs(assemble_R(i, frame, kernels) - parts)))
    return [
        _result("step weighting: M vanishes", np.max(np.abs(problem.tables.M)), 1e-14),
        _result("step weighting: R = R(W) + R(X)", residual, 1e-12),
    ]


def check_symmetries() -> list:
    weighting = WeightingFunction("smooth", OMEGA_C, 2.0)
    problem = reference_problem(weighting, t_max=100.0, dt=0.5)
    t = problem.tables
    scale = np.max(np.abs(t.K[0, 1, 0, 1]))
    index = max(
        np.max(np.abs(t.K[0, 1, 0, 1] - t.K[1, 0, 1, 0])),
        np.max(np.abs(t.K[0, 1, 1, 0] + t.K[0, 1, 0, 1])),
        np.max(np.abs(t.M[0, 0, 1] + t.M[0, 1, 0])),
        np.max(np.abs(t.C[0, 1] - t.C[1, 0])),
    )
    origin = max(np.abs(t.K[..., 0].imag).max(), np.abs(t.M[..., 0].imag).max(), np.abs(t.C[..., 0].imag).max())
    modulus = np.max(np.abs(np.abs(t.f) - 1.0))

    settings = PropagationSettings(dt=0.5, t_max=200.0, stride=4)
    dimer = reference_problem(weighting, t_max=200.0, dt=0.5)
    first = propagate(dimer, initial_state(2, 0), settings)
    second = propagate(dimer, initial_state(2, 1), settings)
    exchange = np.max(np.abs(first.populations[:, 0] - second.populations[:, 1]))
    return [
        _result("K/M/C index symmetries", index / max(scale, 1.0), 1e-14),
        _result("correlations real at t = 0", origin, 1e-12),
        _result("|f| = 1", modulus, 1e-12),
        _result("exchange symmetry of symmetric dimer", exchange, 1e-8),
    ]


def check_oracle_correlations(n_modes: int = 2000, t_max: float = 500.0) -> CheckResult:
    model = reference_model()
    weighting = WeightingFunction("step", OMEGA_C)
    bath = discretize(model, weighting, n_modes, scheme="uniform")
    continuum = BathCorrelations.from_model(model, weighting, TEMPERATURE, t_max=t_max)
    times = np.linspace(0.0, t_max, 501)
    pairs = {
        "K": ((0, 1, 0, 1), continuum.corr_K),
        "M": ((0, 0, 1), continuum.corr_M),
        "C": ((0, 0), continuum.corr_C),
        "f": ((0, 1, 0), continuum.phase_f),
        "h": ((0, 0), continuum.real_h),
    }
    worst, detail = 0.0, []
    for kind, (indices, exact) in pairs.items():
        reference = exact(times, *indices)
        discrete = discrete_corr(kind, times, bath, weighting, TEMPERATURE, indices)
        scale = np.max(np.abs(reference))
        error = np.max(np.abs(discrete - reference))
        if scale > 0:
            error /= scale
        worst = max(worst, error)
        detail.append(f"{kind}:{error:.1e}")
    return _result(f"{n_modes}-mode sums vs continuum correlations", worst, 1e-3, " ".join(detail))


def check_oracle_dynamics(cutoff: int = 8) -> CheckResult:
    hamiltonian = SiteHamiltonian.from_pairs([0.0, 0.0], [(0, 1, 100.0)])
    bath = DiscreteBath([300.0, 600.0], [[0.1, 0.0], [0.0, 0.1]])
    weighting = WeightingFunction("step", 450.0)
    t_max, dt = 500.0, 0.5

    correlations = BathCorrelations(bath.measure(), weighting, TEMPERATURE)
    problem = prepare(hamiltonian, correlations, TimeGrid(dt, t_max))
    sigma0 = initial_state(2, 0)
    approximate = propagate(problem, sigma0, PropagationSettings(dt=dt, t_max=t_max, stride=2, inhom_order=1))
    exact = exact_propagate(FockSpaceModel(hamiltonian, bath, TEMPERATURE, cutoff), sigma0, t_max, dt=1.0)
    residual = np.max(np.abs(approximate.populations[:, 0] - exact.populations[:, 0]))
    return _result("populations vs exact Fock-space dynamics", residual, 0.05, f"cutoff {cutoff}")


def check_fock_relaxation(indices=(40, 200, 400), cutoff: int = 30) -> CheckResult:
    bath = DiscreteBath([400.0], [[0.3, -0.1]])
    weighting = WeightingFunction("smooth", 400.0, 2.0)
    hamiltonian = SiteHamiltonian.from_pairs([100.0, 0.0], [(0, 1, 80.0)])
    grid = TimeGrid(0.5, 100.0)
    problem = prepare(hamiltonian, BathCorrelations(bath.measure(), weighting, TEMPERATURE), grid)
    fock = FockBath(bath, weighting, TEMPERATURE, cutoff)
    residual = 0.0
    for index in indices:
        closed = assemble_R(index, problem.frame, problem.kernels)
        traced = fock_relaxation_tensor(fock, problem.frame, grid, index)
        residual = max(residual, np.max(np.abs(closed - traced)) / np.max(np.abs(closed)))
    return _result("R(t) vs Fock-space double commutator", residual, 1e-7, f"cutoff {cutoff}")


def check_oracle_transformed_dynamics(cutoff: int = 16) -> CheckResult:
    """Two sites with one mode each, started in the transformed-frame equilibrium."""
    hamiltonian = SiteHamiltonian.from_pairs([0.0, 0.0], [(0, 1, 100.0)])
    bath = DiscreteBath([250.0, 250.0], [[0.3, 0.0], [0.0, 0.3]])
    weighting = WeightingFunction("smooth", 250.0, 2.0)
    t_max, dt = 150.0, 0.5

    problem = prepare(hamiltonian, BathCorrelations(bath.measure(), weighting, TEMPERATURE), TimeGrid(dt, t_max))
    sigma0 = initial_state(2, 0)
    approximate = propagate(problem, sigma0, PropagationSettings(dt=dt, t_max=t_max, stride=2))
    model = FockSpaceModel(hamiltonian, bath, TEMPERATURE, cutoff)
    exact = exact_propagate(model, sigma0, t_max, dt=1.0, weighting=weighting)
    residual = np.max(np.abs(approximate.populations[:, 0] - exact.populations[:, 0]))
    return _result("smooth weighting: populations vs exact dynamics", residual, 0.02, f"cutoff {cutoff}")


def check_trace_hermiticity(t_max: float = 1000.0, dt: float = 0.1) -> list:
    problem = reference_problem(WeightingFunction("step", OMEGA_C), t_max=t_max, dt=dt)
    trajectory = propagate(problem, initial_state(2, 0), PropagationSettings(dt=dt, t_max=t_max, stride=10))
    diagnostics = trajectory.diagnostics()
    return [
        _result("trace conservation", diagnostics["max_trace_drift"], 1e-8),
        _result("Hermiticity", diagnostics["max_hermiticity_deviation"], 1e-10),
    ]


CHECKS = (
    check_w_consistency,
    check_fock_debye_waller,
    check_redfield_equivalence,
    check_unity_limits,
    check_two_state,
    check_step_additivity,
    check_symmetries,
    check_oracle_correlations,
    check_oracle_dynamics,
    check_fock_relaxation,
    check_oracle_transformed_dynamics,
    check_trace_hermiticity,
)


def run_checks(corrupt_w: bool = False) -> list:
    results = []
    for check in CHECKS:
        logger.info("Running %s", check.__name__)
        try:
            outcome = check(corrupt_w=corrupt_w) if check is check_w_consistency else check()
        except PpqmeError as exc:
            outcome = CheckResult(check.__name__, False, np.nan, np.nan, str(exc))
        results.extend(outcome if isinstance(outcome, list) else [outcome])
    return results
