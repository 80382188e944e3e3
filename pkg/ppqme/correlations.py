"""
Bath correlation functions of the partially transformed bath and their time tables.

All functions are frequency sums over a SpectralMeasure (continuum quadrature or discrete
modes), written with rho_jj'(w) = J_jj'(w) / pi:

    K_{jk,j'k'}(t) = sum rho2 / w^2 * W^2 * (coth cos - i sin)
    M_{j,j'k'}(t)  = sum rho1 / w * (1 - W) W * (cos - i coth sin)
    C_{jj'}(t)     = sum rho * (1 - W)^2 * (coth cos - i sin)
    f_{jk,k'}(t)   = exp(2i sum rho1_{k',jk} / w^2 * W^2 * sin)
    h_{j,k'}(t)    = 2 sum rho_{jk'} / w * (1 - W) W * cos

with rho1/rho2 the first and second auxiliary combinations, coth = coth(beta w / 2) and
phases w t / hbar.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from ppqme.bath import QuadratureScheme, SpectralDensityModel, SpectralMeasure, WeightingFunction, weight
from ppqme.errors import ConfigError
from ppqme.units import HBAR_CMFS, beta_from_temperature, thermal_coth

logger = logging.getLogger(__name__)

# nodes x times per cos/sin block
CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class TimeGrid:
    """Half-step grid t_i = i * dt / 2 covering [0, t_max]."""

    dt: float
    t_max: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("time step must be positive", quantity="run.dt_fs")
        if not self.t_max > 0:
            raise ConfigError("propagation time must be positive", quantity="run.t_max_fs")
        steps = self.t_max / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            raise ConfigError("t_max_fs must be a whole number of time steps", quantity="run.t_max_fs")

    @property
    def half_step(self) -> float:
        return self.dt / 2.0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def size(self) -> int:
        return 2 * self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.size) * self.half_step

    def index(self, t: float) -> int:
        i = int(round(t / self.half_step))
        if not 0 <= i < self.size or abs(i * self.half_step - t) > 1e-9 * max(self.half_step, abs(t)):
            raise ValueError(f"t={t} fs is not on the half-step grid")
        return i


@dataclass(frozen=True, eq=False)
class CorrelationTables:
    grid: TimeGrid
    K: np.ndarray
    M: np.ndarray
    C: np.ndarray
    f: np.ndarray
    h: np.ndarray
    debye_waller: np.ndarray
    energy_shift: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def n_sites(self) -> int:
        return self.C.shape[0]

    def two_state(self) -> dict:
        """K_{12,12}, M_{1,12}, C_11, f_{12,1}, h_{1,1}."""
        if self.n_sites != 2:
            raise ValueError("two-state view needs exactly two sites")
        return {
            "K": self.K[0, 1, 0, 1],
            "M": self.M[0, 0, 1],
            "C": self.C[0, 0],
            "f": self.f[0, 1, 0],
            "h": self.h[0, 0],
        }

    def named_columns(self) -> dict:
        """Independent functions keyed by 1-based labels, for CSV export."""
        if self.n_sites == 2:
            return self.two_state()
        n = self.n_sites
        pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
        columns = {}
        for (j, k), (jp, kp) in itertools.combinations_with_replacement(pairs, 2):
            columns[f"K_{j + 1}{k + 1}_{jp + 1}{kp + 1}"] = self.K[j, k, jp, kp]
        for j in range(n):
            for jp, kp in pairs:
                columns[f"M_{j + 1}_{jp + 1}{kp + 1}"] = self.M[j, jp, kp]
        for j, jp in itertools.combinations_with_replacement(range(n), 2):
            columns[f"C_{j + 1}{jp + 1}"] = self.C[j, jp]
        for (j, k), kp in itertools.product(pairs, range(n)):
            columns[f"f_{j + 1}{k + 1}_{kp + 1}"] = self.f[j, k, kp]
        for j, kp in itertools.combinations_with_replacement(range(n), 2):
            columns[f"h_{j + 1}_{kp + 1}"] = self.h[j, kp]
        return columns


class BathCorrelations:
    """Bath correlation functions for one measure, weighting and temperature."""

    def __init__(self, measure: SpectralMeasure, weighting: WeightingFunction, temperature_K: float):
        if np.any(measure.nodes <= 0):
            raise ConfigError("bath frequencies must be positive", quantity="bath")
        self.measure = measure
        self.weighting = weighting
        self.temperature_K = temperature_K
        self.beta = beta_from_temperature(temperature_K)
        self.nodes = measure.nodes
        self.W = weight(weighting, self.nodes)
        self.coth = thermal_coth(self.beta * self.nodes / 2.0)
        self.rho = measure.density / np.pi

    @classmethod
    def from_model(
        cls,
        model: SpectralDensityModel,
        weighting: WeightingFunction,
        temperature_K: float,
        scheme: Optional[QuadratureScheme] = None,
        t_max: Optional[float] = None,
    ) -> "BathCorrelations":
        measure = model.measure(scheme or QuadratureScheme(), weighting, t_max=t_max)
        return cls(measure, weighting, temperature_K)

    @property
    def n_sites(self) -> int:
        return self.measure.n_sites

    # frequency profiles: (cos coefficients, sin coefficients) per node

    def _rho1(self, j, jp, kp):
        return self.measure.aux_density_1(j, jp, kp) / np.pi

    def _rho2(self, j, k, jp, kp):
        return self.measure.aux_density_2(j, k, jp, kp) / np.pi

    def _profile_K(self, j, k, jp, kp):
        base = self._rho2(j, k, jp, kp) / self.nodes**2 * self.W**2
        return base * self.coth, -base

    def _profile_M(self, j, jp, kp):
        base = self._rho1(j, jp, kp) / self.nodes * (1.0 - self.W) * self.W
        return base, -base * self.coth

    def _profile_C(self, j, jp):
        base = self.rho[j, jp] * (1.0 - self.W) ** 2
        return base * self.coth, -base

    def _profile_f(self, j, k, kp):
        return 2.0 * self._rho1(kp, j, k) / self.nodes**2 * self.W**2

    def _profile_h(self, j, kp):
        return 2.0 * self.rho[j, kp] / self.nodes * (1.0 - self.W) * self.W

    def _transform(self, cos_profiles, sin_profiles, times) -> np.ndarray:
        """sum_n weights (a cos(w t / hbar) + i b sin(w t / hbar)) for stacked profiles."""
        a = np.atleast_2d(cos_profiles) * self.measure.weights
        b = np.atleast_2d(sin_profiles) * self.measure.weights
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((a.shape[0], times.size), dtype=complex)
        chunk = max(1, CHUNK_ELEMENTS // self.nodes.size)
        for start in range(0, times.size, chunk):
            phase = np.multiply.outer(self.nodes, times[start : start + chunk]) / HBAR_CMFS
            out[:, start : start + chunk] = a @ np.cos(phase) + 1j * (b @ np.sin(phase))
        return out

    def _check(self, profile, label):
        self.measure.integrate(profile, label=label)

    def _check_pair_variance(self, j, k):
        self._check(self._profile_K(j, k, j, k)[0], f"Debye-Waller exponent of pair ({j + 1},{k + 1})")

    @staticmethod
    def _shape(values, t):
        return values[0] if np.ndim(t) == 0 else values

    def corr_K(self, t, j, k, jp, kp):
        a, b = self._profile_K(j, k, jp, kp)
        self._check(a, f"K[{j + 1}{k + 1},{jp + 1}{kp + 1}]")
        return self._shape(self._transform(a, b, t)[0], t)

    def corr_M(self, t, j, jp, kp):
        a, b = self._profile_M(j, jp, kp)
        self._check(a, f"M[{j + 1},{jp + 1}{kp + 1}]")
        return self._shape(self._transform(a, b, t)[0], t)

    def corr_C(self, t, j, jp):
        a, b = self._profile_C(j, jp)
        self._check(a, f"C[{j + 1}{jp + 1}]")
        return self._shape(self._transform(a, b, t)[0], t)

    def phase_f(self, t, j, k, kp):
        if j != k:
            self._check_pair_variance(j, k)
        b = self._profile_f(j, k, kp)
        return self._shape(np.exp(self._transform(np.zeros_like(b), b, t)[0]), t)

    def real_h(self, t, j, kp):
        a = self._profile_h(j, kp)
        self._check(a, f"h[{j + 1},{kp + 1}]")
        return self._shape(self._transform(a, np.zeros_like(a), t)[0].real, t)

    def debye_waller_exponent(self, j, k) -> float:
        """K_{jk,jk}(0), the thermal displacement variance of the pair."""
        if j == k:
            return 0.0
        a, _ = self._profile_K(j, k, j, k)
        return float(self.measure.integrate(a, label=f"Debye-Waller exponent of pair ({j + 1},{k + 1})"))

    def energy_shift(self, j) -> float:
        """Polaron shift sum rho_jj / w * W (2 - W), non-negative."""
        profile = self.rho[j, j] / self.nodes * self.W * (2.0 - self.W)
        return float(self.measure.integrate(profile, label=f"energy shift of site {j + 1}"))

    def build_tables(self, grid: TimeGrid) -> CorrelationTables:
        return build_tables(self, grid)


def build_tables(correlations: BathCorrelations, grid: TimeGrid) -> CorrelationTables:
    """Sample K, M, C, f, h on the half-step grid from their independent combinations."""
    n = correlations.n_sites
    times = grid.times
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]

    cos_rows, sin_rows, slots = [], [], []

    def add(kind, index, a, b, label=None):
        if not (np.any(a) or np.any(b)):
            return
        if label is not None:
            correlations._check(a, label)
        cos_rows.append(a)
        sin_rows.append(b)
        slots.append((kind, index))

    for (j, k), (jp, kp) in itertools.combinations_with_replacement(pairs, 2):
        a, b = correlations._profile_K(j, k, jp, kp)
        add("K", (j, k, jp, kp), a, b, f"K[{j + 1}{k + 1},{jp + 1}{kp + 1}]")
    for j in range(n):
        for jp, kp in pairs:
            a, b = correlations._profile_M(j, jp, kp)
            add("M", (j, jp, kp), a, b, f"M[{j + 1},{jp + 1}{kp + 1}]")
    for j, jp in itertools.combinations_with_replacement(range(n), 2):
        a, b = correlations._profile_C(j, jp)
        add("C", (j, jp), a, b, f"C[{j + 1}{jp + 1}]")
    for (j, k), kp in itertools.product(pairs, range(n)):
        b = correlations._profile_f(j, k, kp)
        add("f", (j, k, kp), np.zeros_like(b), b)
    for j, kp in itertools.combinations_with_replacement(range(n), 2):
        a = correlations._profile_h(j, kp)
        add("h", (j, kp), a, np.zeros_like(a), f"h[{j + 1},{kp + 1}]")

    logger.debug(
        "Evaluating %d correlation profiles on %d nodes x %d times", len(slots), correlations.nodes.size, times.size
    )
    values = correlations._transform(np.array(cos_rows), np.array(sin_rows), times) if slots else None

    nt = times.size
    K = np.zeros((n, n, n, n, nt), dtype=complex)
    M = np.zeros((n, n, n, nt), dtype=complex)
    C = np.zeros((n, n, nt), dtype=complex)
    f = np.ones((n, n, n, nt), dtype=complex)
    h = np.zeros((n, n, nt))

    for row, (kind, index) in enumerate(slots):
        v = values[row]
        if kind == "K":
            j, k, jp, kp = index
            for (a, b), (c, d) in (((j, k), (jp, kp)), ((jp, kp), (j, k))):
                K[a, b, c, d] = v
                K[b, a, d, c] = v
                K[a, b, d, c] = -v
                K[b, a, c, d] = -v
        elif kind == "M":
            j, jp, kp = index
            M[j, jp, kp] = v
            M[j, kp, jp] = -v
        elif kind == "C":
            j, jp = index
            C[j, jp] = v
            C[jp, j] = v
        elif kind == "f":
            j, k, kp = index
            f[j, k, kp] = np.exp(v)
            f[k, j, kp] = np.exp(-v)
        else:
            j, kp = index
            h[j, kp] = v.real
            h[kp, j] = v.real

    debye_waller = np.ones((n, n))
    for j, k in pairs:
        debye_waller[j, k] = debye_waller[k, j] = np.exp(-K[j, k, j, k, 0].real / 2.0)
    energy_shift = np.array([correlations.energy_shift(j) for j in range(n)])

    return CorrelationTables(
        grid=grid, K=K, M=M, C=C, f=f, h=h, debye_waller=debye_waller, energy_shift=energy_shift
    )


@dataclass(frozen=True, eq=False)
class KernelIntegrals:
    """
    Cumulative integrals G^{pq}(t) = int_0^t ds exp(i dE_pq s / hbar) g(s), one array
    (N, N, nt) per index combination and channel:

        W[(j, k, j', k')]  g = Jt_jk Jt_j'k' (exp(-K_{jk,j'k'}) - 1)   j != k, j' != k'
        Y[(j, j', k')]     g = Jt_j'k' M_{j,j'k'}                       j' != k'
        X[(j, j')]         g = C_jj'
    """

    grid: TimeGrid
    gaps: np.ndarray
    W: dict
    Y: dict
    X: dict

    def channel(self, j, k, jp, kp):
        """Channel name and kernel for the site combination (j, k, j', k')."""
        if j != k and jp != kp:
            return "W", self.W.get((j, k, jp, kp))
        if j == k and jp != kp:
            return "Y", self.Y.get((j, jp, kp))
        if j != k:
            return "Y", self.Y.get((jp, k, j))
        return "X", self.X.get((j, jp))

    def two_state(self) -> dict:
        """W-, W+, Y, X of the two-site model."""
        zero = np.zeros((2, 2, self.grid.size), dtype=complex)
        return {
            "W_minus": self.W.get((0, 1, 0, 1), zero),
            "W_plus": self.W.get((0, 1, 1, 0), zero),
            "Y": self.Y.get((0, 0, 1), zero),
            "X": self.X.get((0, 0), zero),
        }


def simpson_complex(values: np.ndarray, dx: float) -> np.ndarray:
    """Composite Simpson over the last axis of complex samples."""
    if values.shape[-1] < 2:
        return np.zeros(values.shape[:-1], dtype=complex)
    return simpson(values.real, dx=dx, axis=-1) + 1j * simpson(values.imag, dx=dx, axis=-1)


def cumulative_simpson_complex(values: np.ndarray, dx: float) -> np.ndarray:
    """Running Simpson integral over the last axis, starting at 0."""
    real = cumulative_simpson(values.real, dx=dx, axis=-1, initial=0)
    imag = cumulative_simpson(values.imag, dx=dx, axis=-1, initial=0)
    return real + 1j * imag


def kernel_integrals(tables: CorrelationTables, frame) -> KernelIntegrals:
    """Cumulative Simpson kernels for every eigen-gap of the frame."""
    n = tables.n_sites
    times = tables.times
    dx = tables.grid.half_step
    couplings = frame.renormalized_couplings
    phases = np.exp(1j * frame.gaps[:, :, None] * times[None, None, :] / HBAR_CMFS)

    def integrate_kernel(g):
        return cumulative_simpson_complex(phases * g[None, None, :], dx)

    coupled = [(j, k) for j in range(n) for k in range(n) if j != k and couplings[j, k] != 0]

    W = {}
    for (j, k), (jp, kp) in itertools.product(coupled, repeat=2):
        g = couplings[j, k] * couplings[jp, kp] * np.expm1(-tables.K[j, k, jp, kp])
        W[(j, k, jp, kp)] = integrate_kernel(g)
    Y = {}
    for j in range(n):
        for jp, kp in coupled:
            Y[(j, jp, kp)] = integrate_kernel(couplings[jp, kp] * tables.M[j, jp, kp])
    X = {}
    for j, jp in itertools.product(range(n), repeat=2):
        X[(j, jp)] = integrate_kernel(tables.C[j, jp])

    return KernelIntegrals(grid=tables.grid, gaps=frame.gaps, W=W, Y=Y, X=X)
