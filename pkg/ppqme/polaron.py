"""
Partially polaron-transformed system frame.

The zeroth-order system Hamiltonian has renormalised site energies E_j - shift_j on the
diagonal and couplings w_jk J_jk off the diagonal; its eigenvectors U_jp = <j|phi_p>
define the eigenbasis used by the relaxation tensor and the inhomogeneous terms.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ppqme.correlations import BathCorrelations
from ppqme.errors import ConfigError, DivergentIntegral

logger = logging.getLogger(__name__)

TwoStateEigensystem = namedtuple("TwoStateEigensystem", ["mixing_angle", "eigenvalues", "eigenvectors"])


@dataclass(frozen=True, eq=False)
class SiteHamiltonian:
    energies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=float)
        couplings = np.asarray(self.couplings, dtype=float)
        n = energies.size
        if energies.ndim != 1 or n < 1:
            raise ConfigError("site energies must be a non-empty list", quantity="system.energies_cm1")
        if couplings.shape != (n, n):
            raise ConfigError(f"coupling matrix must be {n} x {n}", quantity="system.couplings")
        if not np.array_equal(couplings, couplings.T):
            raise ConfigError("couplings must be symmetric", quantity="system.couplings")
        if np.any(np.diag(couplings) != 0):
            raise ConfigError("a site cannot couple to itself", quantity="system.couplings")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "couplings", couplings)

    @classmethod
    def from_pairs(cls, energies: Sequence[float], pairs: Sequence[tuple]) -> "SiteHamiltonian":
        """Build from 0-based (j, k, J_jk) triples."""
        n = len(energies)
        couplings = np.zeros((n, n))
        for j, k, value in pairs:
            if not (0 <= j < n and 0 <= k < n) or j == k:
                raise ConfigError(f"invalid coupling pair ({j + 1}, {k + 1})", quantity="system.couplings")
            couplings[j, k] = couplings[k, j] = value
        return cls(np.asarray(energies, dtype=float), couplings)

    @property
    def n_sites(self) -> int:
        return self.energies.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.energies) + self.couplings


@dataclass(frozen=True, eq=False)
class PolaronFrame:
    couplings: np.ndarray
    renormalized_energies: np.ndarray
    debye_waller: np.ndarray
    renormalized_couplings: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gaps: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.eigenvalues.size

    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.renormalized_energies) + self.renormalized_couplings

    def summary(self) -> dict:
        summary = {
            "renormalized_energies_cm1": self.renormalized_energies.tolist(),
            "debye_waller": self.debye_waller.tolist(),
            "renormalized_couplings_cm1": self.renormalized_couplings.tolist(),
            "eigenvalues_cm1": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }
        if self.n_sites == 2:
            energies = self.renormalized_energies
            closed = two_state_closed_form(energies[0], energies[1], self.renormalized_couplings[0, 1], 1.0)
            summary["mixing_angle"] = closed.mixing_angle
        return summary


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive (first one on ties)."""
    vectors = np.array(vectors, dtype=float)
    magnitude = np.abs(vectors)
    for p in range(vectors.shape[1]):
        lead = np.flatnonzero(magnitude[:, p] >= magnitude[:, p].max() - 1e-12)[0]
        if vectors[lead, p] < 0:
            vectors[:, p] *= -1
    return vectors


def debye_waller(correlations: BathCorrelations, j: int, k: int) -> float:
    if j == k:
        return 1.0
    try:
        exponent = correlations.debye_waller_exponent(j, k)
    except DivergentIntegral as exc:
        raise DivergentIntegral(
            f"Debye-Waller factor w_{j + 1}{k + 1} collapses to 0 (divergent displacement variance)",
            quantity=exc.quantity,
        ) from exc
    return float(np.exp(-exponent / 2.0))


def renormalized_energy(correlations: BathCorrelations, hamiltonian: SiteHamiltonian, j: int) -> float:
    return float(hamiltonian.energies[j] - correlations.energy_shift(j))


def build_frame(hamiltonian: SiteHamiltonian, correlations: BathCorrelations) -> PolaronFrame:
    n = hamiltonian.n_sites
    if correlations.n_sites != n:
        raise ConfigError(f"bath describes {correlations.n_sites} sites, system has {n}", quantity="system.n_sites")

    energies = np.array([renormalized_energy(correlations, hamiltonian, j) for j in range(n)])
    w = np.ones((n, n))
    for j in range(n):
        for k in range(j + 1, n):
            w[j, k] = w[k, j] = debye_waller(correlations, j, k)
    couplings = w * hamiltonian.couplings

    eigenvalues, eigenvectors = np.linalg.eigh(np.diag(energies) + couplings)
    eigenvectors = fix_signs(eigenvectors)
    logger.debug("Polaron frame: energies %s, eigenvalues %s", energies, eigenvalues)

    return PolaronFrame(
        couplings=hamiltonian.couplings,
        renormalized_energies=energies,
        debye_waller=w,
        renormalized_couplings=couplings,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        gaps=eigenvalues[:, None] - eigenvalues[None, :],
    )


def two_state_closed_form(energy_1: float, energy_2: float, coupling: float, debye_waller: float):
    """
    Mixing angle eta = atan(2 J w / (E1 - E2)) / 2 with phi_1 = cos(eta)|1> + sin(eta)|2>.

    Eigenpairs are returned in ascending order with the same sign convention as
    build_frame; degenerate energies take the limit eta = +-pi/4.
    """
    v = coupling * debye_waller
    delta = energy_1 - energy_2
    mean = (energy_1 + energy_2) / 2.0
    if delta == 0:
        eta = np.pi / 4 * np.sign(v)
        e_first = mean + abs(v)
    else:
        eta = 0.5 * np.arctan(2.0 * v / delta)
        e_first = mean + delta / 2.0 / np.cos(2.0 * eta)
    e_second = energy_1 + energy_2 - e_first

    vectors = np.array([[np.cos(eta), -np.sin(eta)], [np.sin(eta), np.cos(eta)]])
    values = np.array([e_first, e_second])
    order = np.argsort(values, kind="stable")
    return TwoStateEigensystem(float(eta), values[order], fix_signs(vectors[:, order]))
