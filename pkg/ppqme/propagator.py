"""
Fixed-step RK4 integration of dS/dt = -R(t) S(t) + I(t) in the interaction picture and
conversion of the samples to site-basis observables.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from ppqme.correlations import BathCorrelations, TimeGrid, build_tables, kernel_integrals
from ppqme.errors import ConfigError, IntegrationFailure, TraceDriftError
from ppqme.inhomogeneous import InhomogeneousTerms
from ppqme.polaron import SiteHamiltonian, build_frame
from ppqme.relaxation import RelaxationTensorBuilder, liouville_matrix
from ppqme.units import HBAR_CMFS

logger = logging.getLogger(__name__)

Problem = namedtuple("Problem", ["correlations", "frame", "tables", "kernels"])

NEGATIVITY_WARNING = 1e-3


@dataclass(frozen=True)
class PropagationSettings:
    dt: float = 0.1
    t_max: float = 1000.0
    stride: int = 10
    inhom_order: int = 0
    trace_tolerance: float = 1e-6

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.dt, self.t_max)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    S: np.ndarray
    sigma: np.ndarray
    populations: np.ndarray
    trace: np.ndarray
    hermiticity: np.ndarray
    min_eigenvalue: np.ndarray
    eigen_gaps: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.populations.shape[1]

    def eigenbasis_coherences(self) -> np.ndarray:
        """Schroedinger-picture eigenbasis density matrices."""
        phases = np.exp(-1j * self.eigen_gaps[None, :, :] * self.times[:, None, None] / HBAR_CMFS)
        return self.S * phases

    def to_frame(self) -> pd.DataFrame:
        columns = {"t_fs": self.times}
        for j in range(self.n_sites):
            columns[f"P_{j + 1}"] = self.populations[:, j]
        rho = self.eigenbasis_coherences()
        for p in range(self.n_sites):
            for q in range(p + 1, self.n_sites):
                columns[f"re_sigma_{p + 1}{q + 1}"] = rho[:, p, q].real
                columns[f"im_sigma_{p + 1}{q + 1}"] = rho[:, p, q].imag
        columns["trace"] = self.trace
        columns["hermiticity"] = self.hermiticity
        columns["min_eigenvalue"] = self.min_eigenvalue
        return pd.DataFrame(columns)

    def diagnostics(self) -> dict:
        return {
            "max_trace_drift": float(np.max(np.abs(self.trace - 1.0))),
            "max_hermiticity_deviation": float(np.max(self.hermiticity)),
            "min_eigenvalue": float(np.min(self.min_eigenvalue)),
            "final_populations": self.populations[-1].tolist(),
        }


def initial_state(n_sites: int, site: Optional[int] = 0, matrix=None) -> np.ndarray:
    """Site-basis sigma(0): a given density matrix, or |site><site| (0-based)."""
    if matrix is not None:
        sigma = np.asarray(matrix, dtype=complex)
        if sigma.shape != (n_sites, n_sites):
            raise ConfigError(f"initial matrix must be {n_sites} x {n_sites}", quantity="run.initial_matrix")
        if not np.allclose(sigma, sigma.conj().T) or abs(np.trace(sigma) - 1) > 1e-12:
            raise ConfigError("initial matrix must be Hermitian with unit trace", quantity="run.initial_matrix")
        return sigma
    if not 0 <= site < n_sites:
        raise ConfigError(f"initial site {site + 1} outside 1..{n_sites}", quantity="run.initial_site")
    sigma = np.zeros((n_sites, n_sites), dtype=complex)
    sigma[site, site] = 1.0
    return sigma


def prepare(hamiltonian: SiteHamiltonian, correlations: BathCorrelations, grid: TimeGrid) -> Problem:
    logger.info("Building polaron frame")
    frame = build_frame(hamiltonian, correlations)
    logger.info("Building correlation tables on %d time points", grid.size)
    tables = build_tables(correlations, grid)
    logger.info("Integrating relaxation kernels")
    kernels = kernel_integrals(tables, frame)
    return Problem(correlations, frame, tables, kernels)


def to_site_basis(S: np.ndarray, t: float, frame):
    """Site-basis density matrix and populations from the interaction-picture S(t)."""
    U = frame.eigenvectors
    sigma = U @ (S * np.exp(-1j * frame.gaps * t / HBAR_CMFS)) @ U.T
    return sigma, np.diag(sigma).real.copy()


def _rhs(liouville: np.ndarray, inhomogeneous: np.ndarray, S: np.ndarray) -> np.ndarray:
    return -(liouville @ S.ravel()).reshape(S.shape) + inhomogeneous


def propagate(
    problem: Problem,
    sigma0: np.ndarray,
    settings: PropagationSettings,
    progress: bool = False,
) -> Trajectory:
    frame, tables, kernels = problem.frame, problem.tables, problem.kernels
    grid = tables.grid
    if abs(grid.dt - settings.dt) > 1e-12 or grid.n_steps != settings.grid.n_steps:
        raise ConfigError("tables were built for a different time grid", quantity="run.dt_fs")
    if settings.stride < 1:
        raise ConfigError("stride must be at least 1", quantity="run.stride")

    U = frame.eigenvectors
    dt = settings.dt
    builder = RelaxationTensorBuilder(frame, kernels)
    inhom = InhomogeneousTerms(settings.inhom_order, frame, tables, sigma0)

    S = U.T @ np.asarray(sigma0, dtype=complex) @ U
    samples = [(0.0, S.copy())]
    R_start = liouville_matrix(builder.at(0))

    for step in tqdm(range(grid.n_steps), desc="propagating", disable=not progress, leave=False):
        i = 2 * step
        R_mid, R_end = liouville_matrix(builder.at(i + 1)), liouville_matrix(builder.at(i + 2))
        I_start, I_mid, I_end = inhom.at(i), inhom.at(i + 1), inhom.at(i + 2)

        k1 = _rhs(R_start, I_start, S)
        k2 = _rhs(R_mid, I_mid, S + dt / 2 * k1)
        k3 = _rhs(R_mid, I_mid, S + dt / 2 * k2)
        k4 = _rhs(R_end, I_end, S + dt * k3)
        updated = S + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        t = (step + 1) * dt
        if not np.all(np.isfinite(updated)):
            raise IntegrationFailure(
                "density matrix became non-finite", last_good_time=step * dt, quantity=f"t={t:g} fs"
            )
        drift = abs(np.trace(updated) - 1.0)
        if drift > settings.trace_tolerance:
            raise TraceDriftError(f"trace drifted by {drift:.3e}", last_good_time=step * dt, quantity=f"t={t:g} fs")

        S, R_start = updated, R_end
        if (step + 1) % settings.stride == 0:
            samples.append((t, S.copy()))

    trajectory = _trajectory(samples, frame)
    lowest = float(np.min(trajectory.min_eigenvalue))
    if lowest < -NEGATIVITY_WARNING:
        logger.warning("Density matrix lost positivity: smallest eigenvalue %.3e", lowest)
    return trajectory


def _trajectory(samples, frame) -> Trajectory:
    times = np.array([t for t, _ in samples])
    S = np.array([s for _, s in samples])
    sigma, populations = zip(*(to_site_basis(s, t, frame) for t, s in samples))
    sigma = np.array(sigma)
    hermitian = (sigma + np.conj(sigma.transpose(0, 2, 1))) / 2
    return Trajectory(
        times=times,
        S=S,
        sigma=sigma,
        populations=np.array(populations),
        trace=np.trace(S, axis1=1, axis2=2).real,
        hermiticity=np.max(np.abs(S - np.conj(S.transpose(0, 2, 1))), axis=(1, 2)),
        min_eigenvalue=np.linalg.eigvalsh(hermitian)[:, 0],
        eigen_gaps=frame.gaps,
    )


def coherence_metric(populations, reference: float = 0.5) -> float:
    """
    Depth of the first local minimum of P_1 below `reference`; zero if P_1 never turns.

    Accepts a Trajectory or a 1-d array of donor populations.
    """
    if isinstance(populations, Trajectory):
        populations = populations.populations[:, 0]
    p = np.asarray(populations, dtype=float)
    turning = np.flatnonzero((p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:]))
    if turning.size == 0:
        return 0.0
    return float(max(0.0, reference - p[turning[0] + 1]))
