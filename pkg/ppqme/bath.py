"""
Bath spectral densities, partial-transformation weighting functions and the frequency
quadrature used by every bath integral.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from ppqme.errors import ConfigError, DivergentIntegral, DomainError
from ppqme.units import HBAR_CMFS

logger = logging.getLogger(__name__)

DENSITY_FAMILIES = ("ohmic-exponential", "tabulated")
WEIGHTING_KINDS = ("unity", "zero", "step", "smooth")

# a level whose contribution is at least this fraction of the next shallower one is not decaying
DIVERGENCE_RATIO = 0.95
DIVERGENCE_FLOOR = 1e-10


def _check_frequency(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("frequency must be non-negative", quantity=f"omega={np.min(omega)!r}")
    return omega


def aux_density_1(density: np.ndarray, j: int, jp: int, kp: int) -> np.ndarray:
    """J1_{j,j'k'} = J_jj' - J_jk' from pair densities of shape (N, N, ...)."""
    return density[j, jp] - density[j, kp]


def aux_density_2(density: np.ndarray, j: int, k: int, jp: int, kp: int) -> np.ndarray:
    """J2_{jk,j'k'} = J_jj' + J_kk' - J_jk' - J_kj'."""
    return density[j, jp] + density[k, kp] - density[j, kp] - density[k, jp]


@dataclass(frozen=True, eq=False)
class SpectralDensityModel:
    """
    J_jj'(w) = kappa_jj' * J(w) for an N-site system.

    kappa is the site correlation matrix of the baths (identity for independent identical
    baths). The ohmic-exponential family is pi * eta * w_c * (w / w_c)**s * exp(-w / w_c),
    which for s = 1 is pi * eta * w * exp(-w / w_c) in cm^-1.
    """

    n_sites: int = 2
    family: str = "ohmic-exponential"
    eta: float = 1.0
    omega_c: float = 200.0
    ohmicity: float = 1.0
    site_correlation: Optional[np.ndarray] = None
    table_omega: Optional[np.ndarray] = None
    table_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in DENSITY_FAMILIES:
            raise ConfigError(f"unknown spectral density family {self.family!r}", quantity="bath.family")
        if self.n_sites < 1:
            raise ConfigError("a system needs at least one site", quantity="system.n_sites")
        if not self.omega_c > 0:
            raise ConfigError("cutoff frequency must be positive", quantity="bath.omega_c_cm1")
        if self.eta < 0:
            raise ConfigError("coupling prefactor must be non-negative", quantity="bath.eta")

        kappa = np.eye(self.n_sites) if self.site_correlation is None else np.array(self.site_correlation, float)
        if kappa.shape != (self.n_sites, self.n_sites) or not np.allclose(kappa, kappa.T):
            raise ConfigError("site correlation matrix must be symmetric N x N", quantity="bath.cross_pairs")
        if np.linalg.eigvalsh(kappa).min() < -1e-12:
            raise ConfigError("site correlation matrix must be positive semi-definite", quantity="bath.cross_pairs")
        object.__setattr__(self, "site_correlation", kappa)

        if self.family == "tabulated":
            if self.table_omega is None or self.table_values is None:
                raise ConfigError("tabulated density needs a table", quantity="bath.table_path")
            omega = np.asarray(self.table_omega, float)
            values = np.asarray(self.table_values, float)
            if omega.shape != values.shape or omega.ndim != 1 or np.any(np.diff(omega) <= 0):
                raise ConfigError("table frequencies must be strictly increasing", quantity="bath.table_path")
            if np.any(omega < 0) or np.any(values < 0):
                raise ConfigError("table entries must be non-negative", quantity="bath.table_path")
            object.__setattr__(self, "table_omega", omega)
            object.__setattr__(self, "table_values", values)

    @property
    def omega_max(self) -> Optional[float]:
        """Largest frequency carried by a tabulated density."""
        if self.family == "tabulated":
            return float(self.table_omega[-1])
        return None

    def spectral(self, omega) -> np.ndarray:
        omega = _check_frequency(omega)
        if self.family == "tabulated":
            return np.interp(omega, self.table_omega, self.table_values, left=0.0, right=0.0)
        x = omega / self.omega_c
        return np.pi * self.eta * self.omega_c * x**self.ohmicity * np.exp(-x)

    def density(self, j: int, jp: int, omega) -> np.ndarray:
        return self.site_correlation[j, jp] * self.spectral(omega)

    def density_matrix(self, omega) -> np.ndarray:
        """All pairs at once, shape (N, N, len(omega))."""
        return self.site_correlation[:, :, None] * np.atleast_1d(self.spectral(omega))[None, None, :]

    def aux_density_1(self, j: int, jp: int, kp: int, omega) -> np.ndarray:
        return aux_density_1(self.density_matrix(omega), j, jp, kp)

    def aux_density_2(self, j: int, k: int, jp: int, kp: int, omega) -> np.ndarray:
        return aux_density_2(self.density_matrix(omega), j, k, jp, kp)

    def measure(self, scheme: "QuadratureScheme", weighting: Optional["WeightingFunction"] = None, t_max=None):
        breakpoints = () if weighting is None else weighting.breakpoints
        rule = scheme.rule(self.omega_c, breakpoints=breakpoints, t_max=t_max, omega_max=self.omega_max)
        return SpectralMeasure(rule.nodes, rule.weights, self.density_matrix(rule.nodes), rule=rule)

    def reorganization_energy(self, scheme: Optional["QuadratureScheme"] = None) -> float:
        """(1/pi) int J(w)/w dw for a single site."""
        scheme = scheme or QuadratureScheme()
        return integrate(lambda w: self.spectral(w) / w / np.pi, scheme, self.omega_c, omega_max=self.omega_max)

    def uses_soft_low_frequency(self) -> bool:
        """True when J(w) vanishes no faster than linearly at w -> 0."""
        return self.family == "tabulated" or self.ohmicity <= 1.0


@dataclass(frozen=True)
class WeightingFunction:
    kind: str = "zero"
    omega_h: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in WEIGHTING_KINDS:
            raise ConfigError(f"unknown weighting kind {self.kind!r}", quantity="weighting.kind")
        if self.kind in ("step", "smooth") and not (self.omega_h is not None and self.omega_h > 0):
            raise ConfigError(f"{self.kind} weighting needs a positive omega_h", quantity="weighting.omega_h_cm1")
        if self.kind == "smooth" and not (self.alpha is not None and self.alpha > 0):
            raise ConfigError("smooth weighting needs a positive alpha", quantity="weighting.alpha")

    @property
    def breakpoints(self) -> tuple:
        return (self.omega_h,) if self.kind == "step" else ()

    def __call__(self, omega) -> np.ndarray:
        return weight(self, omega)

    def describe(self) -> str:
        if self.kind == "step":
            return f"step(omega_h={self.omega_h:g})"
        if self.kind == "smooth":
            return f"smooth(omega_h={self.omega_h:g}, alpha={self.alpha:g})"
        return self.kind


def weight(weighting: WeightingFunction, omega) -> np.ndarray:
    omega = _check_frequency(omega)
    if weighting.kind == "unity":
        return np.ones_like(omega)
    if weighting.kind == "zero":
        return np.zeros_like(omega)
    if weighting.kind == "step":
        return np.where(omega >= weighting.omega_h, 1.0, 0.0)
    return -np.expm1(-((omega / weighting.omega_h) ** weighting.alpha))


def check_weighting(model: SpectralDensityModel, weighting: WeightingFunction, allow_divergent_alpha=False):
    """Reject smooth weightings whose low-frequency tail makes the dynamics diverge."""
    if weighting.kind != "smooth" or weighting.alpha > 1 or allow_divergent_alpha:
        return
    if model.uses_soft_low_frequency():
        raise ConfigError(
            f"smooth weighting with alpha={weighting.alpha:g} <= 1 diverges for this density "
            "(pass --allow-divergent-alpha to run anyway)",
            quantity="weighting.alpha",
        )


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    levels: np.ndarray
    depth: int

    def integrate(self, values, label: str = "integral"):
        values = np.asarray(values)
        self.check_convergence(values, label)
        return values @ self.weights

    def check_convergence(self, values, label: str = "integral"):
        """Raise DivergentIntegral if the deepest low-frequency panels do not decay."""
        if self.depth < 2:
            return
        weighted = np.asarray(values) * self.weights
        deepest = np.abs(weighted[..., self.levels == self.depth].sum(axis=-1))
        shallower = np.abs(weighted[..., self.levels == self.depth - 1].sum(axis=-1))
        scale = np.abs(weighted).sum(axis=-1)
        diverging = (deepest > DIVERGENCE_FLOOR * scale) & (deepest >= DIVERGENCE_RATIO * shallower)
        if np.any(diverging):
            raise DivergentIntegral(f"{label} does not converge at low frequency", quantity=label)


@dataclass(frozen=True)
class QuadratureScheme:
    """
    Gauss-Legendre panels on [0, omega_max].

    Panels are uniform above the first panel width, halve geometrically towards w = 0 and
    are split at weighting breakpoints. The panel width resolves one period of
    cos(w t_max / hbar) when a time horizon is given.
    """

    nodes_per_panel: int = 16
    omega_max_factor: float = 50.0
    geometric_levels: int = 40
    periods_per_panel: float = 1.0
    breakpoint_levels: int = 4

    def refined(self) -> "QuadratureScheme":
        return QuadratureScheme(
            nodes_per_panel=2 * self.nodes_per_panel,
            omega_max_factor=self.omega_max_factor,
            geometric_levels=self.geometric_levels,
            periods_per_panel=self.periods_per_panel,
            breakpoint_levels=self.breakpoint_levels,
        )

    def panel_width(self, omega_c: float, t_max: Optional[float] = None) -> float:
        width = omega_c / 4.0
        if t_max:
            width = min(width, self.periods_per_panel * 2.0 * np.pi * HBAR_CMFS / t_max)
        return width

    def edges(self, omega_c, breakpoints: Sequence[float] = (), t_max=None, omega_max=None) -> np.ndarray:
        upper = self.omega_max_factor * omega_c
        if omega_max is not None:
            upper = max(upper, omega_max)
        width = self.panel_width(omega_c, t_max)
        n_uniform = max(int(np.ceil((upper - width) / width)), 1)
        uniform = np.linspace(width, upper, n_uniform + 1)
        geometric = width * 2.0 ** -np.arange(self.geometric_levels, 0, -1, dtype=float)
        edges = [geometric, uniform]
        for point in breakpoints:
            if not geometric[0] < point < upper:
                continue
            offsets = width * 2.0 ** -np.arange(1, self.breakpoint_levels + 1, dtype=float)
            around = np.concatenate(([point], point - offsets, point + offsets))
            edges.append(around[(around > geometric[0]) & (around < upper)])
        return np.unique(np.concatenate(edges))

    def rule(self, omega_c, breakpoints: Sequence[float] = (), t_max=None, omega_max=None) -> QuadratureRule:
        edges = self.edges(omega_c, breakpoints, t_max, omega_max)
        x, w = leggauss(self.nodes_per_panel)
        lower, upper = edges[:-1], edges[1:]
        mid, half = (upper + lower) / 2.0, (upper - lower) / 2.0
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()

        width = self.panel_width(omega_c, t_max)
        panel_levels = np.where(upper <= width * (1 + 1e-12), np.floor(np.log2(width / upper) + 1e-9) + 1, 0)
        levels = np.repeat(panel_levels.astype(int), self.nodes_per_panel)
        return QuadratureRule(nodes=nodes, weights=weights, levels=levels, depth=int(levels.max()))


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """
    Frequency nodes with integration weights and the pair densities J_jj' at the nodes.

    Every bath integral (1/pi) int dw J_jj'(w) g(w) becomes (1/pi) sum weights * density * g.
    """

    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    rule: Optional[QuadratureRule] = field(default=None)

    @property
    def n_sites(self) -> int:
        return self.density.shape[0]

    def aux_density_1(self, j: int, jp: int, kp: int) -> np.ndarray:
        return aux_density_1(self.density, j, jp, kp)

    def aux_density_2(self, j: int, k: int, jp: int, kp: int) -> np.ndarray:
        return aux_density_2(self.density, j, k, jp, kp)

    def integrate(self, values, label: str = "integral"):
        values = np.asarray(values)
        if self.rule is not None:
            self.rule.check_convergence(values, label)
        return values @ self.weights


def integrate(
    integrand: Callable,
    scheme: QuadratureScheme,
    scale: float,
    breakpoints: Sequence[float] = (),
    t_max=None,
    omega_max=None,
    label: str = "integral",
):
    """Integrate a frequency function over [0, omega_max_factor * scale]."""
    rule = scheme.rule(scale, breakpoints=breakpoints, t_max=t_max, omega_max=omega_max)
    return rule.integrate(integrand(rule.nodes), label=label)
