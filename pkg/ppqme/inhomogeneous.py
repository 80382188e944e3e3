"""
Inhomogeneous terms from the initial state sigma(0) x rho_b of the untransformed frame.

After the partial transformation the bath part of the initial state acquires the
components delta_rho^{j'k'} = theta_j'^+ rho_b theta_k' - w_j'k' rho_b. The first- and
second-order terms are

    I1(t) = -(i/hbar) sum sigma_j'k' b_{jk,j'k'}(t) [T_jk(t), T_j'k']
    I2(t) = -(1/hbar^2) (Z + Z^+),
    Z     = sum sigma_j''k'' int_0^t dtau Phi(t, tau) [T_jk(t), T_j'k'(tau) T_j''k'']

with T_jk(t) = |j><k| in the interaction picture and the bath traces b and Phi in closed
form through w, K, M, C, f and h.
"""

import itertools
import logging
from typing import Optional

import numpy as np

from ppqme.correlations import CorrelationTables, simpson_complex
from ppqme.units import HBAR_CMFS

logger = logging.getLogger(__name__)

INHOM_ORDERS = (0, 1, 2)


def transition_operators(frame) -> np.ndarray:
    """A[j, k, p, q] = U_jp U_kq, the eigenbasis matrix of |j><k|."""
    U = frame.eigenvectors
    return np.einsum("jp,kq->jkpq", U, U)


def inhom1(index: int, frame, tables: CorrelationTables, sigma0: np.ndarray) -> np.ndarray:
    n = frame.n_sites
    t = tables.times[index]
    w = frame.debye_waller
    coupling = frame.renormalized_couplings
    K, f, M, h = tables.K[..., index], tables.f[..., index], tables.M[..., index], tables.h[..., index]

    # bath factor b[j, k, j', k'] / w_j'k'
    factor = coupling[:, :, None, None] * (np.exp(-K) * f[:, :, None, :] - 1.0)
    for j in range(n):
        factor[j, j] += M[j] + h[j][None, :]
    factor *= w[None, None, :, :]

    A = transition_operators(frame)
    moving = A * np.exp(1j * frame.gaps * t / HBAR_CMFS)
    fixed = np.einsum("jkab,ab,abpq->jkpq", factor, sigma0, A)
    commutator = np.einsum("jkpr,jkrq->pq", moving, fixed) - np.einsum("jkpr,jkrq->pq", fixed, moving)
    return -1j / HBAR_CMFS * commutator


class InhomKernels:
    """
    Two-time bath traces Tr_b{B_jk(t) B_j'k'(tau) delta_rho^{j''k''}} on grid indices
    i (for t) and m (for tau, scalar or array, m <= i).
    """

    def __init__(self, tables: CorrelationTables, frame):
        self.tables = tables
        self.w = frame.debye_waller
        self.couplings = frame.couplings

    def _displaced(self, j, k, jpp, kpp, at):
        """f_{jk,k''} exp(-K_{jk,j''k''}) at grid index (or indices) `at`."""
        return self.tables.f[j, k, kpp, at] * np.exp(-self.tables.K[j, k, jpp, kpp, at])

    def _linear(self, j, jpp, kpp, at):
        """M_{j,j''k''} + h_{j,k''} at grid index (or indices) `at`."""
        return self.tables.M[j, jpp, kpp, at] + self.tables.h[j, kpp, at]

    def F(self, i, m, j, k, jp, kp, jpp, kpp):
        K, w = self.tables.K, self.w
        first = self._displaced(j, k, jpp, kpp, i)
        second = self._displaced(jp, kp, jpp, kpp, m)
        between = np.exp(-K[j, k, jp, kp, i - m])
        braces = between * (first * second - 1.0) - first - second + 2.0
        return w[j, k] * w[jp, kp] * w[jpp, kpp] * braces

    def H1(self, i, m, j, jp, kp, jpp, kpp):
        w = self.w
        later = self.tables.M[j, jp, kp, i - m] + self._linear(j, jpp, kpp, i)
        return w[jp, kp] * w[jpp, kpp] * (self._displaced(jp, kp, jpp, kpp, m) - 1.0) * later

    def H2(self, i, m, j, k, jp, jpp, kpp):
        w = self.w
        earlier = self.tables.M[jp, k, j, i - m] + self._linear(jp, jpp, kpp, m)
        return w[j, k] * w[jpp, kpp] * (self._displaced(j, k, jpp, kpp, i) - 1.0) * earlier

    def L(self, i, m, j, jp, jpp, kpp):
        return self.w[jpp, kpp] * self._linear(j, jpp, kpp, i) * self._linear(jp, jpp, kpp, m)

    def trace(self, i, m, j, k, jp, kp, jpp, kpp) -> Optional[np.ndarray]:
        """Full bath trace with bare couplings; None when the combination cannot contribute."""
        J = self.couplings
        if j != k and jp != kp:
            prefactor = J[j, k] * J[jp, kp]
            return None if prefactor == 0 else prefactor * self.F(i, m, j, k, jp, kp, jpp, kpp)
        if j == k and jp != kp:
            return None if J[jp, kp] == 0 else J[jp, kp] * self.H1(i, m, j, jp, kp, jpp, kpp)
        if j != k:
            return None if J[j, k] == 0 else J[j, k] * self.H2(i, m, j, k, jp, jpp, kpp)
        return self.L(i, m, j, jp, jpp, kpp)


def kernel_F(i, m, indices, kernels: InhomKernels):
    return kernels.F(i, m, *indices)


def kernel_H1(i, m, indices, kernels: InhomKernels):
    return kernels.H1(i, m, *indices)


def kernel_H2(i, m, indices, kernels: InhomKernels):
    return kernels.H2(i, m, *indices)


def kernel_L(i, m, indices, kernels: InhomKernels):
    return kernels.L(i, m, *indices)


def inhom2(index: int, frame, kernels: InhomKernels, sigma0: np.ndarray) -> np.ndarray:
    n = frame.n_sites
    result = np.zeros((n, n), dtype=complex)
    if index == 0:
        return result

    times = kernels.tables.times
    taus = np.arange(index + 1)
    A = transition_operators(frame)
    phase_t = np.exp(1j * frame.gaps * times[index] / HBAR_CMFS)
    phase_tau = np.exp(1j * frame.gaps[:, :, None] * times[None, None, : index + 1] / HBAR_CMFS)
    pairs = list(itertools.product(range(n), repeat=2))

    Z = np.zeros((n, n), dtype=complex)
    for jpp, kpp in pairs:
        if sigma0[jpp, kpp] == 0:
            continue
        P = A[jpp, kpp]
        for (j, k), (jp, kp) in itertools.product(pairs, repeat=2):
            trace = kernels.trace(index, taus, j, k, jp, kp, jpp, kpp)
            if trace is None:
                continue
            # int_0^t dtau Phi(t, tau) T_j'k'(tau)
            gamma = A[jp, kp] * simpson_complex(trace[None, None, :] * phase_tau, kernels.tables.grid.half_step)
            moving = A[j, k] * phase_t
            Z += sigma0[jpp, kpp] * (moving @ gamma @ P - gamma @ P @ moving)
    return -(Z + Z.conj().T) / HBAR_CMFS**2


class InhomogeneousTerms:
    """I(t) = I1 (+ I2) on grid indices, cached for the integrator stages."""

    def __init__(self, order: int, frame, tables: CorrelationTables, sigma0: np.ndarray):
        if order not in INHOM_ORDERS:
            raise ValueError(f"inhomogeneous order must be one of {INHOM_ORDERS}")
        self.order = order
        self.frame = frame
        self.tables = tables
        self.sigma0 = np.asarray(sigma0, dtype=complex)
        self.kernels = InhomKernels(tables, frame) if order >= 2 else None
        self._cache = {}

    def at(self, index: int) -> np.ndarray:
        n = self.frame.n_sites
        if self.order == 0:
            return np.zeros((n, n), dtype=complex)
        if index not in self._cache:
            term = inhom1(index, self.frame, self.tables, self.sigma0)
            if self.order == 2:
                term = term + inhom2(index, self.frame, self.kernels, self.sigma0)
            # each stage index is needed by at most two consecutive steps
            self._cache = {key: value for key, value in self._cache.items() if key >= index - 2}
            self._cache[index] = term
        return self._cache[index]
