"""
Independent reference paths: finite sums over discrete bath modes and exact dynamics of
the system plus a few truncated boson modes.

A discrete bath couples as H_sb = sum_j |j><j| sum_n w_n g_nj (b_n + b_n^+), which is the
continuum density J_jj'(w) = pi sum_n delta(w - w_n) w_n^2 g_nj g_nj'.
"""

import itertools
import logging
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from ppqme.bath import QuadratureScheme, SpectralDensityModel, SpectralMeasure, WeightingFunction, weight
from ppqme.correlations import (
    BathCorrelations,
    CorrelationTables,
    TimeGrid,
    build_tables,
    cumulative_simpson_complex,
    simpson_complex,
)
from ppqme.errors import ConfigError
from ppqme.inhomogeneous import transition_operators
from ppqme.polaron import SiteHamiltonian
from ppqme.units import HBAR_CMFS, beta_from_temperature, thermal_coth

logger = logging.getLogger(__name__)

DISCRETIZATION_SCHEMES = ("uniform", "equal_weight")
CORRELATION_KINDS = ("K", "M", "C", "f", "h")
MAX_DIMENSION = 512

ExactDynamics = namedtuple("ExactDynamics", ["times", "populations", "trace", "energy"])


@dataclass(frozen=True, eq=False)
class DiscreteBath:
    """Mode frequencies (cm^-1) and dimensionless couplings g[n, j] of mode n to site j."""

    frequencies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        frequencies = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        couplings = np.asarray(self.couplings, dtype=float)
        if couplings.ndim == 1:
            couplings = couplings[:, None]
        if couplings.shape[0] != frequencies.size:
            raise ConfigError("need one coupling row per mode", quantity="oracle.couplings")
        if np.any(frequencies <= 0):
            raise ConfigError("mode frequencies must be positive", quantity="oracle.frequencies")
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "couplings", couplings)

    @property
    def n_modes(self) -> int:
        return self.frequencies.size

    @property
    def n_sites(self) -> int:
        return self.couplings.shape[1]

    def measure(self) -> SpectralMeasure:
        density = np.pi * np.einsum("n,nj,nk->jkn", self.frequencies**2, self.couplings, self.couplings)
        return SpectralMeasure(self.frequencies, np.ones(self.n_modes), density)

    def reorganization_energies(self) -> np.ndarray:
        return np.einsum("n,nj->j", self.frequencies, self.couplings**2)


def _uniform_modes(model: SpectralDensityModel, weighting, n_modes: int, omega_max: float):
    edges = np.linspace(0.0, omega_max, n_modes + 1)
    breaks = [b for b in (weighting.breakpoints if weighting else ()) if 0 < b < omega_max]
    if breaks:
        # split the bins between the two sides of the step so that one edge sits on it
        cut = breaks[0]
        below = int(np.clip(round(n_modes * cut / omega_max), 1, n_modes - 1)) if n_modes > 1 else 0
        if below == 0:
            edges = np.array([0.0, omega_max])
        else:
            upper_edges = np.linspace(cut, omega_max, n_modes - below + 1)[1:]
            edges = np.concatenate((np.linspace(0.0, cut, below + 1), upper_edges))
    lower, upper = edges[:-1], edges[1:]
    omega = (lower + upper) / 2.0
    g2 = model.spectral(omega) * (upper - lower) / (np.pi * omega**2)
    return omega, g2


def _equal_weight_modes(model: SpectralDensityModel, weighting: Optional[WeightingFunction], n_modes: int):
    """Quantiles of the displacement density J W^2 / (pi w^2); every mode carries g^2 W^2 = total / n."""
    weighting = weighting or WeightingFunction("unity")
    measure = model.measure(QuadratureScheme(), weighting)
    W = weight(weighting, measure.nodes)
    density = model.spectral(measure.nodes) * W**2 / measure.nodes**2 / np.pi
    total = measure.integrate(density, label="equal-weight density")
    if not total > 0:
        raise ConfigError(
            f"{weighting.describe()} weighting leaves nothing to discretize by equal weight", quantity="oracle.scheme"
        )
    order = np.argsort(measure.nodes)
    nodes, weights = measure.nodes[order], (density * measure.weights)[order]
    nodes, weights = nodes[weights > 0], weights[weights > 0]
    cumulative = np.cumsum(weights) - weights / 2.0
    targets = (np.arange(n_modes) + 0.5) / n_modes * total
    omega = np.interp(targets, cumulative, nodes)
    g2 = total / n_modes / weight(weighting, omega) ** 2
    return omega, g2


def discretize(
    model: SpectralDensityModel,
    weighting: Optional[WeightingFunction],
    n_modes: int,
    scheme: str = "equal_weight",
    omega_max_factor: float = 15.0,
) -> DiscreteBath:
    """
    Replace the continuum density by n_modes modes per independent bath component.

    `equal_weight` places the modes at quantiles of J W^2 / w^2 so that every mode carries the
    same displacement variance g^2 W^2; no weighting means W = 1, which diverges for an Ohmic
    density. `uniform` uses midpoint bins on [0, omega_max_factor * omega_c] with
    g^2 = J dw / (pi w^2) and also resolves the residual (1 - W) part. Correlated site baths
    are discretised along the eigenvectors of the site correlation matrix.
    """
    if n_modes < 1:
        raise ConfigError("need at least one mode", quantity="oracle.n_modes")
    if scheme not in DISCRETIZATION_SCHEMES:
        raise ConfigError(f"unknown discretization scheme {scheme!r}", quantity="oracle.scheme")
    if weighting is not None:
        # the displacement variance must exist for the discrete sums to approximate anything
        measure = model.measure(QuadratureScheme(), weighting)
        W = weight(weighting, measure.nodes)
        measure.integrate(model.spectral(measure.nodes) * W**2 / measure.nodes**2, label="displacement variance")

    if scheme == "uniform":
        omega_max = omega_max_factor * model.omega_c
        if model.omega_max is not None:
            omega_max = max(omega_max, model.omega_max)
        omega, g2 = _uniform_modes(model, weighting, n_modes, omega_max)
    else:
        omega, g2 = _equal_weight_modes(model, weighting, n_modes)

    strengths, vectors = np.linalg.eigh(model.site_correlation)
    frequencies, couplings = [], []
    for strength, vector in zip(strengths, vectors.T):
        if strength <= 1e-12:
            continue
        frequencies.append(omega)
        couplings.append(np.sqrt(g2)[:, None] * np.sqrt(strength) * vector[None, :])
    logger.debug("Discretized %s bath into %d modes per component", scheme, n_modes)
    return DiscreteBath(np.concatenate(frequencies), np.concatenate(couplings))


def discrete_corr(kind: str, t, bath: DiscreteBath, weighting: WeightingFunction, temperature_K: float, indices):
    """Direct mode sums of K, M, C, f or h; indices follow the correlation signatures."""
    if kind not in CORRELATION_KINDS:
        raise ValueError(f"unknown correlation {kind!r}")
    omega, g = bath.frequencies, bath.couplings
    W = weight(weighting, omega)
    coth = thermal_coth(beta_from_temperature(temperature_K) * omega / 2.0)
    phase = np.multiply.outer(np.atleast_1d(np.asarray(t, dtype=float)), omega) / HBAR_CMFS
    cos, sin = np.cos(phase), np.sin(phase)

    if kind == "K":
        j, k, jp, kp = indices
        a = W**2 * (g[:, j] - g[:, k]) * (g[:, jp] - g[:, kp])
        values = (coth * cos - 1j * sin) @ a
    elif kind == "M":
        j, jp, kp = indices
        a = omega * (1 - W) * W * g[:, j] * (g[:, jp] - g[:, kp])
        values = (cos - 1j * coth * sin) @ a
    elif kind == "C":
        j, jp = indices
        a = omega**2 * (1 - W) ** 2 * g[:, j] * g[:, jp]
        values = (coth * cos - 1j * sin) @ a
    elif kind == "f":
        j, k, kp = indices
        a = W**2 * g[:, kp] * (g[:, j] - g[:, k])
        values = np.exp(2j * (sin @ a))
    else:
        j, kp = indices
        a = omega * (1 - W) * W * g[:, j] * g[:, kp]
        values = 2.0 * (cos @ a)
    return values[0] if np.ndim(t) == 0 else values


def discrete_correlations(bath: DiscreteBath, weighting: WeightingFunction, temperature_K: float) -> BathCorrelations:
    return BathCorrelations(bath.measure(), weighting, temperature_K)


def tables_from_discrete(
    bath: DiscreteBath, weighting: WeightingFunction, temperature_K: float, grid: TimeGrid
) -> CorrelationTables:
    """Production tables evaluated on a discrete bath."""
    return build_tables(discrete_correlations(bath, weighting, temperature_K), grid)


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), k=1)


class FockBath:
    """Truncated Fock space of the bath modes alone."""

    def __init__(self, bath: DiscreteBath, weighting: WeightingFunction, temperature_K: float, cutoff: int = 8):
        if cutoff < 2:
            raise ConfigError("Fock cutoff must be at least 2", quantity="oracle.cutoff")
        self.bath = bath
        self.weighting = weighting
        self.cutoff = cutoff
        self.dimension = cutoff**bath.n_modes
        self.W = weight(weighting, bath.frequencies)

        a = _ladder(cutoff)
        eye = np.eye(cutoff)
        self.annihilators = []
        for n in range(bath.n_modes):
            factors = [a if m == n else eye for m in range(bath.n_modes)]
            op = factors[0]
            for factor in factors[1:]:
                op = np.kron(op, factor)
            self.annihilators.append(op)

        occupation = np.array(list(itertools.product(range(cutoff), repeat=bath.n_modes)), dtype=float)
        self.energies = occupation @ bath.frequencies
        boltzmann = np.exp(-beta_from_temperature(temperature_K) * (self.energies - self.energies.min()))
        self.rho = np.diag(boltzmann / boltzmann.sum())

    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.energies)

    def position(self, n: int) -> np.ndarray:
        b = self.annihilators[n]
        return b + b.T

    def momentum_like(self, n: int) -> np.ndarray:
        b = self.annihilators[n]
        return b.T - b

    def generator(self, j: int) -> np.ndarray:
        """sum_n W_n g_nj (b_n^+ - b_n)."""
        g = self.bath.couplings[:, j]
        return sum(self.W[n] * g[n] * self.momentum_like(n) for n in range(self.bath.n_modes))

    def theta(self, j: int) -> np.ndarray:
        return expm(-self.generator(j))

    def evolve(self, op: np.ndarray, t: float) -> np.ndarray:
        """Interaction picture exp(i H_b t) op exp(-i H_b t)."""
        phase = np.exp(1j * np.subtract.outer(self.energies, self.energies) * t / HBAR_CMFS)
        return op * phase

    def debye_waller(self, j: int, k: int) -> float:
        return float(np.trace(self.rho @ self.theta(j).conj().T @ self.theta(k)).real)

    def linear_operator(self, j: int) -> np.ndarray:
        """Residual linear coupling sum_n w_n (1 - W_n) g_nj (b_n + b_n^+)."""
        omega, g = self.bath.frequencies, self.bath.couplings[:, j]
        return sum(omega[n] * (1 - self.W[n]) * g[n] * self.position(n) for n in range(self.bath.n_modes))

    def bath_operator(self, j: int, k: int, t: float) -> np.ndarray:
        """theta_j^+ theta_k - w_jk for j != k, the residual linear coupling for j == k."""
        if j == k:
            op = self.linear_operator(j)
        else:
            op = self.theta(j).conj().T @ self.theta(k) - self.debye_waller(j, k) * np.eye(self.dimension)
        return self.evolve(op, t)

    def delta_rho(self, jp: int, kp: int) -> np.ndarray:
        shifted = self.theta(jp).conj().T @ self.rho @ self.theta(kp)
        return shifted - self.debye_waller(jp, kp) * self.rho

    def first_order_trace(self, t, j, k, jp, kp) -> complex:
        return complex(np.trace(self.bath_operator(j, k, t) @ self.delta_rho(jp, kp)))

    def second_order_trace(self, t, tau, j, k, jp, kp, jpp, kpp) -> complex:
        product = self.bath_operator(j, k, t) @ self.bath_operator(jp, kp, tau)
        return complex(np.trace(product @ self.delta_rho(jpp, kpp)))

    def coupling_operator(self, j: int, k: int, couplings: np.ndarray) -> np.ndarray:
        """Bath part of |j><k| in the transformed coupling: J_jk (theta_j^+ theta_k - w_jk), or D_j."""
        if j == k:
            return self.linear_operator(j)
        return couplings[j, k] * self.bath_operator(j, k, 0.0)

    def correlation(self, first: np.ndarray, second: np.ndarray, times) -> np.ndarray:
        """Tr_b{rho_b first(s) second} for every s in `times`."""
        weights = np.diag(self.rho)[:, None] * first * second.T
        gaps = np.subtract.outer(self.energies, self.energies).ravel()
        return np.exp(1j * np.multiply.outer(np.asarray(times, dtype=float), gaps) / HBAR_CMFS) @ weights.ravel()


class FockSpaceModel:
    """System (x) truncated bath Hilbert space with the untransformed total Hamiltonian."""

    def __init__(
        self,
        hamiltonian: SiteHamiltonian,
        bath: DiscreteBath,
        temperature_K: float,
        cutoff: int = 8,
        max_dimension: int = MAX_DIMENSION,
    ):
        if bath.n_sites != hamiltonian.n_sites:
            raise ConfigError("bath couplings do not match the number of sites", quantity="oracle.couplings")
        dimension = hamiltonian.n_sites * cutoff**bath.n_modes
        if dimension > max_dimension:
            raise ConfigError(
                f"Fock space dimension {dimension} exceeds the bound {max_dimension}", quantity="oracle.cutoff"
            )
        self.system = hamiltonian
        self.bath = bath
        self.temperature_K = temperature_K
        self.cutoff = cutoff
        self.dimension = dimension
        # weighting only enters through the partial transformation operators
        self.fock = FockBath(bath, WeightingFunction("unity"), temperature_K, cutoff)

    def projector(self, j: int) -> np.ndarray:
        P = np.zeros((self.system.n_sites, self.system.n_sites))
        P[j, j] = 1.0
        return np.kron(P, np.eye(self.fock.dimension))

    def hamiltonian(self) -> np.ndarray:
        n = self.system.n_sites
        H = np.kron(self.system.matrix(), np.eye(self.fock.dimension))
        H += np.kron(np.eye(n), self.fock.hamiltonian())
        omega, g = self.bath.frequencies, self.bath.couplings
        for j in range(n):
            coupling = sum(omega[m] * g[m, j] * self.fock.position(m) for m in range(self.bath.n_modes))
            H += np.kron(np.diag(np.eye(n)[j]), coupling)
        return H

    def generator(self, weighting: WeightingFunction) -> np.ndarray:
        """G = sum_j |j><j| sum_n W_n g_nj (b_n^+ - b_n), so that theta_j = exp(-G) on site j."""
        fock = FockBath(self.bath, weighting, self.temperature_K, self.cutoff)
        n = self.system.n_sites
        return sum(np.kron(np.diag(np.eye(n)[j]), fock.generator(j)) for j in range(n))

    def initial_state(self, sigma0: np.ndarray, weighting: Optional[WeightingFunction] = None) -> np.ndarray:
        """
        sigma(0) (x) rho_b, or with a weighting the state that is sigma(0) (x) rho_b in the
        transformed frame, exp(-G) sigma(0) (x) rho_b exp(G).
        """
        state = np.kron(np.asarray(sigma0, dtype=complex), self.fock.rho)
        if weighting is None:
            return state
        shift = expm(-self.generator(weighting))
        return shift @ state @ shift.conj().T


def exact_propagate(
    model: FockSpaceModel,
    sigma0: np.ndarray,
    t_max: float,
    dt: float = 1.0,
    weighting: Optional[WeightingFunction] = None,
) -> ExactDynamics:
    """Site populations of the full unitary evolution from `model.initial_state(sigma0, weighting)`."""
    times = np.arange(int(round(t_max / dt)) + 1) * dt
    H = model.hamiltonian()
    energies, vectors = np.linalg.eigh(H)
    rho0 = vectors.conj().T @ model.initial_state(sigma0, weighting) @ vectors
    projectors = [vectors.conj().T @ model.projector(j) @ vectors for j in range(model.system.n_sites)]
    H_eigen = np.diag(energies)

    populations = np.empty((times.size, model.system.n_sites))
    trace = np.empty(times.size)
    energy = np.empty(times.size)
    gaps = np.subtract.outer(energies, energies)
    for i, t in enumerate(times):
        rho = rho0 * np.exp(-1j * gaps * t / HBAR_CMFS)
        for j, P in enumerate(projectors):
            populations[i, j] = np.sum(P.T * rho).real
        trace[i] = np.trace(rho).real
        energy[i] = np.sum(H_eigen.T * rho).real
    return ExactDynamics(times, populations, trace, energy)


def converge_cutoff(
    hamiltonian: SiteHamiltonian,
    bath: DiscreteBath,
    temperature_K: float,
    sigma0: np.ndarray,
    t_max: float,
    dt: float = 1.0,
    start: int = 2,
    tolerance: float = 1e-4,
    max_dimension: int = MAX_DIMENSION,
):
    """Double the Fock cutoff until the populations change by less than `tolerance`."""
    cutoff = start
    model = FockSpaceModel(hamiltonian, bath, temperature_K, cutoff, max_dimension)
    previous = exact_propagate(model, sigma0, t_max, dt)
    while True:
        cutoff *= 2
        current = exact_propagate(
            FockSpaceModel(hamiltonian, bath, temperature_K, cutoff, max_dimension), sigma0, t_max, dt
        )
        change = np.max(np.abs(current.populations - previous.populations))
        logger.debug("Fock cutoff %d: population change %.2e", cutoff, change)
        if change < tolerance:
            return cutoff, current
        previous = current


def _coupling_operators(fock: FockBath, frame) -> dict:
    pairs = itertools.product(range(frame.n_sites), repeat=2)
    return {(j, k): fock.coupling_operator(j, k, frame.couplings) for j, k in pairs}


def fock_relaxation_tensor(fock: FockBath, frame, grid: TimeGrid, index: int) -> np.ndarray:
    """
    R[:, :, a, b] at grid index `index` from the double commutator with Fock-space bath traces:

        R(S) = A(S) + A(S^+)^+,  A(S) = (1/hbar^2) sum_jk [T_jk(t), L_jk S],
        L_jk = sum_j'k' int_0^t ds Tr_b{rho_b B_jk(s) B_j'k'} T_j'k'(t - s)
    """
    n = frame.n_sites
    times = grid.times
    A = transition_operators(frame)
    phase_t = np.exp(1j * frame.gaps * times[index] / HBAR_CMFS)
    backward = np.exp(-1j * frame.gaps[:, :, None] * times[None, None, :] / HBAR_CMFS)
    operators = _coupling_operators(fock, frame)

    moving, memory = [], []
    for (j, k), first in operators.items():
        L = np.zeros((n, n), dtype=complex)
        for (jp, kp), second in operators.items():
            corr = fock.correlation(first, second, times)
            running = cumulative_simpson_complex(corr[None, None, :] * backward, grid.half_step)
            L += A[jp, kp] * phase_t * running[..., index]
        moving.append(A[j, k] * phase_t)
        memory.append(L)

    def half(S):
        return sum(T @ L @ S - L @ S @ T for T, L in zip(moving, memory))

    tensor = np.zeros((n, n, n, n), dtype=complex)
    for a, b in itertools.product(range(n), repeat=2):
        E = np.zeros((n, n))
        E[a, b] = 1.0
        tensor[:, :, a, b] = half(E) + half(E.T).conj().T
    return tensor / HBAR_CMFS**2


def fock_inhom1(fock: FockBath, frame, t: float, sigma0: np.ndarray) -> np.ndarray:
    """-(i/hbar) sum sigma_j'k' Tr_b{B_jk(t) delta_rho^{j'k'}} [T_jk(t), T_j'k']."""
    A = transition_operators(frame)
    phase_t = np.exp(1j * frame.gaps * t / HBAR_CMFS)
    result = np.zeros((frame.n_sites, frame.n_sites), dtype=complex)
    for (j, k), operator in _coupling_operators(fock, frame).items():
        T, B = A[j, k] * phase_t, fock.evolve(operator, t)
        for jp, kp in zip(*np.nonzero(sigma0)):
            trace = np.trace(B @ fock.delta_rho(jp, kp))
            result += sigma0[jp, kp] * trace * (T @ A[jp, kp] - A[jp, kp] @ T)
    return -1j / HBAR_CMFS * result


def fock_inhom2(fock: FockBath, frame, grid: TimeGrid, index: int, sigma0: np.ndarray) -> np.ndarray:
    """
    Second-order term from the four orderings of the double commutator,

        -(1/hbar^2) sum sigma_j''k'' int_0^t dtau Tr_b{[H_I(t), [H_I(tau), T_j''k'' delta_rho^{j''k''}]]}
    """
    n = frame.n_sites
    times = grid.times[: index + 1]
    A = transition_operators(frame)
    operators = _coupling_operators(fock, frame)
    integrand = np.zeros((n, n, times.size), dtype=complex)
    t = grid.times[index]
    phase_t = np.exp(1j * frame.gaps * t / HBAR_CMFS)

    for jpp, kpp in zip(*np.nonzero(sigma0)):
        shifted, P = fock.delta_rho(jpp, kpp), A[jpp, kpp]
        for (j, k), first in operators.items():
            T, B = A[j, k] * phase_t, fock.evolve(first, t)
            for (jp, kp), second in operators.items():
                for m, tau in enumerate(times):
                    Tp = A[jp, kp] * np.exp(1j * frame.gaps * tau / HBAR_CMFS)
                    Bp = fock.evolve(second, tau)
                    forward = np.trace(B @ Bp @ shifted)
                    reverse = np.trace(Bp @ B @ shifted)
                    integrand[..., m] += sigma0[jpp, kpp] * (
                        forward * (T @ Tp @ P - Tp @ P @ T) - reverse * (T @ P @ Tp - P @ Tp @ T)
                    )
    return -simpson_complex(integrand, grid.half_step) / HBAR_CMFS**2
