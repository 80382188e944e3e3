"""
Time-dependent relaxation tensor of the second-order time-local equation

    dS_pq/dt = -sum_{p'q'} R[p, q, p', q'](t) S_p'q'(t) + I_pq(t)

in the eigenbasis of the renormalised system Hamiltonian.
"""

import itertools
import logging
from typing import Iterable

import numpy as np

from ppqme.correlations import CorrelationTables, KernelIntegrals, cumulative_simpson_complex
from ppqme.errors import ConfigError
from ppqme.units import HBAR_CMFS

logger = logging.getLogger(__name__)

CHANNELS = ("W", "Y", "X")


def _conjugate_swap(tensor: np.ndarray) -> np.ndarray:
    """R'[p, q, p', q'] = conj(R[q, p, q', p'])."""
    return np.conj(tensor).transpose(1, 0, 3, 2)


class RelaxationTensorBuilder:
    """
    Assembles R(t) at grid indices from the kernel integrals of one frame.

    The U-products of every contributing site combination (j, k, j', k') are tabulated
    once; channels outside `channels` are left out, which splits R into its transformed
    (W), mixed (Y) and linear-coupling (X) parts.
    """

    def __init__(self, frame, kernels: KernelIntegrals, channels: Iterable[str] = CHANNELS):
        self.frame = frame
        self.kernels = kernels
        self.channels = tuple(channels)
        unknown = set(self.channels) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown relaxation channels {sorted(unknown)}")

        U = frame.eigenvectors
        n = frame.n_sites
        first, second, stacks = [], [], []
        for j, k, jp, kp in itertools.product(range(n), repeat=4):
            name, kernel = kernels.channel(j, k, jp, kp)
            if name not in self.channels or kernel is None:
                continue
            first.append(np.einsum("p,r,r,x->pxr", U[j], U[k], U[jp], U[kp]))
            second.append(np.einsum("y,q,p,x->pqxy", U[j], U[k], U[jp], U[kp]))
            stacks.append(kernel)

        self.n_sites = n
        self.n_combinations = len(stacks)
        if stacks:
            self._first = np.array(first)
            self._second = np.array(second)
            self._kernels = np.array(stacks)

    def at(self, index: int) -> np.ndarray:
        n = self.n_sites
        if self.n_combinations == 0:
            return np.zeros((n, n, n, n), dtype=complex)

        t = self.kernels.grid.times[index]
        kernels = self._kernels[..., index]
        phase = np.exp(1j * self.frame.gaps * t / HBAR_CMFS)

        # sum over the dummy eigenstate r and the site combinations
        direct = np.einsum("cpxr,cxr->px", self._first, kernels) * phase
        exchange = np.einsum("cpqxy,cxp->pqxy", self._second, kernels)
        exchange *= phase[:, None, :, None] * np.conj(phase)[None, :, None, :]

        half = np.einsum("px,qy->pqxy", direct, np.eye(n)) - exchange
        return (half + _conjugate_swap(half)) / HBAR_CMFS**2


def assemble_R(index: int, frame, kernels: KernelIntegrals, channels: Iterable[str] = CHANNELS) -> np.ndarray:
    return RelaxationTensorBuilder(frame, kernels, channels).at(index)


def liouville_matrix(tensor: np.ndarray) -> np.ndarray:
    n = tensor.shape[0]
    return tensor.reshape(n * n, n * n)


def _check_two_state_model(kernels: KernelIntegrals, n_sites: int):
    if n_sites != 2:
        raise ConfigError("the two-state relaxation form needs exactly two sites", quantity="system.n_sites")
    X = kernels.X
    identical = np.allclose(X[(0, 0)], X[(1, 1)], rtol=1e-12, atol=0)
    independent = not np.any(X[(0, 1)]) and not np.any(X[(1, 0)])
    if kernels.Y:
        independent = independent and np.allclose(kernels.Y[(1, 0, 1)], -kernels.Y[(0, 0, 1)], rtol=1e-12, atol=0)
    if not (identical and independent):
        raise ConfigError("the two-state relaxation form assumes independent identical baths", quantity="bath")


def two_state_coefficients(U: np.ndarray) -> dict:
    """A_pqrs, B1_pq, B2_pq, C1_pqrs, C2_pqrs of the two-site eigenvectors."""
    u1, u2 = U[0], U[1]
    quad = lambda a, b, c, d: np.einsum("p,q,r,s->pqrs", a, b, c, d)  # noqa: E731
    return {
        "A": quad(u1, u1, u1, u1) + quad(u2, u2, u2, u2),
        "B1": np.outer(u1, u1) - np.outer(u2, u2),
        "B2": np.outer(u1, u2) - np.outer(u2, u1),
        "C1": quad(u1, u2, u1, u2) + quad(u2, u1, u2, u1),
        "C2": quad(u1, u2, u2, u1) + quad(u2, u1, u1, u2),
    }


def assemble_R_two_state(index: int, frame, kernels: KernelIntegrals) -> np.ndarray:
    """Two-site tensor from the coefficient tensors and the scalar kernels W-, W+, Y, X."""
    _check_two_state_model(kernels, frame.n_sites)
    coeff = two_state_coefficients(frame.eigenvectors)
    A, B1, B2, C1, C2 = (coeff[key] for key in ("A", "B1", "B2", "C1", "C2"))
    g = {name: value[..., index] for name, value in kernels.two_state().items()}

    t = kernels.grid.times[index]
    gaps = frame.gaps
    half = np.zeros((2, 2, 2, 2), dtype=complex)
    for p, q, pp, qp in itertools.product(range(2), repeat=4):
        value = 0j
        if qp == q:
            inner = sum(
                A[p, r, r, pp] * g["X"][pp, r]
                + (B1[p, r] * B2[r, pp] - B2[p, r] * B1[r, pp]) * g["Y"][pp, r]
                + C1[p, r, r, pp] * g["W_minus"][pp, r]
                + C2[p, r, r, pp] * g["W_plus"][pp, r]
                for r in range(2)
            )
            value += np.exp(1j * gaps[p, pp] * t / HBAR_CMFS) * inner
        value -= np.exp(1j * (gaps[p, pp] - gaps[q, qp]) * t / HBAR_CMFS) * (
            A[qp, q, p, pp] * g["X"][pp, p]
            + (B1[qp, q] * B2[p, pp] - B2[qp, q] * B1[p, pp]) * g["Y"][pp, p]
            + C1[qp, q, p, pp] * g["W_minus"][pp, p]
            + C2[qp, q, p, pp] * g["W_plus"][pp, p]
        )
        half[p, q, pp, qp] = value
    return (half + _conjugate_swap(half)) / HBAR_CMFS**2


def redfield_R(index: int, frame, tables: CorrelationTables) -> np.ndarray:
    """
    Conventional second-order time-local tensor driven by C alone, built as a Liouville
    superoperator from system operators V_j(t) = |j><j| in the interaction picture:

        d vec(S)/dt = -(1/hbar^2) sum_j [V L_j S - L_j S V + S L_j^+ V - V S L_j^+]

    with L_j = sum_j' int_0^t dtau C_jj'(t - tau) V_j'(tau).
    """
    n = frame.n_sites
    U = frame.eigenvectors
    times = tables.times
    t = times[index]
    gaps = frame.gaps
    identity = np.eye(n)

    def system_operator(j, at):
        return np.outer(U[j], U[j]) * np.exp(1j * gaps * at / HBAR_CMFS)

    superop = np.zeros((n * n, n * n), dtype=complex)
    for j in range(n):
        V = system_operator(j, t)
        L = np.zeros((n, n), dtype=complex)
        for jp in range(n):
            # int_0^t ds C(s) V_j'(t - s)
            shifted = np.outer(U[jp], U[jp])[:, :, None] * np.exp(
                1j * gaps[:, :, None] * (t - times[None, None, :]) / HBAR_CMFS
            )
            running = cumulative_simpson_complex(tables.C[j, jp][None, None, :] * shifted, tables.grid.half_step)
            L += running[..., index]
        Ld = L.conj().T
        superop += np.kron(V @ L, identity) - np.kron(L, V.T) + np.kron(identity, (Ld @ V).T) - np.kron(V, Ld.T)
    return (superop / HBAR_CMFS**2).reshape(n, n, n, n)
