"""
Run configuration: a YAML file validated against pydantic models.

Every physical quantity carries its unit in the key name. Sites are 1-based in the file
and 0-based everywhere else.
"""

import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from ppqme.bath import QuadratureScheme, SpectralDensityModel, WeightingFunction
from ppqme.errors import ConfigError
from ppqme.polaron import SiteHamiltonian
from ppqme.propagator import PropagationSettings, initial_state

SWEEP_PARAMETERS = ("omega_h", "omega_h_cm1", "alpha")
DEFAULT_SWEEP_VALUES = {"omega_h": [0.1, 1.0, 10.0], "alpha": [2.0, 3.0, 4.0]}


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemConfig(Section):
    n_sites: Optional[int] = None
    energies_cm1: List[float]
    # [j, k, J_cm1] with 1-based sites
    couplings: List[Tuple[int, int, float]] = Field(default_factory=list)


class BathConfig(Section):
    family: Literal["ohmic-exponential", "tabulated"] = "ohmic-exponential"
    eta: float = 1.0
    omega_c_cm1: float = 200.0
    ohmicity: float = 1.0
    # [j, k, kappa_jk] off-diagonal bath correlations, 1-based
    cross_pairs: List[Tuple[int, int, float]] = Field(default_factory=list)
    table_path: Optional[str] = None


class WeightingConfig(Section):
    kind: Literal["unity", "zero", "step", "smooth"] = "step"
    omega_h_cm1: Optional[float] = None
    alpha: Optional[float] = None


class QuadratureConfig(Section):
    nodes_per_panel: int = 16
    omega_max_factor: float = 50.0
    geometric_levels: int = 40


class RunSection(Section):
    temperature_K: float = 300.0
    t_max_fs: float = 1000.0
    dt_fs: float
    inhom_order: Literal[0, 1, 2] = 0
    initial_site: int = 1
    initial_matrix: Optional[List[List[float]]] = None
    stride: int = 10


class OutputConfig(Section):
    csv_path: Optional[str] = None
    json_path: Optional[str] = None


class RunConfig(Section):
    system: SystemConfig
    bath: BathConfig = Field(default_factory=BathConfig)
    weighting: WeightingConfig = Field(default_factory=WeightingConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    run: RunSection
    output: OutputConfig = Field(default_factory=OutputConfig)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @property
    def n_sites(self) -> int:
        n = len(self.system.energies_cm1)
        if self.system.n_sites is not None and self.system.n_sites != n:
            raise ConfigError(f"n_sites={self.system.n_sites} but {n} energies given", quantity="system.n_sites")
        return n

    def hamiltonian(self) -> SiteHamiltonian:
        pairs = []
        for position, (j, k, value) in enumerate(self.system.couplings):
            if not (1 <= j <= self.n_sites and 1 <= k <= self.n_sites) or j == k:
                raise ConfigError(f"invalid coupling pair ({j}, {k})", quantity=f"system.couplings.{position}")
            pairs.append((j - 1, k - 1, value))
        return SiteHamiltonian.from_pairs(self.system.energies_cm1, pairs)

    def site_correlation(self) -> np.ndarray:
        kappa = np.eye(self.n_sites)
        for position, (j, k, value) in enumerate(self.bath.cross_pairs):
            if not (1 <= j <= self.n_sites and 1 <= k <= self.n_sites) or j == k:
                raise ConfigError(f"invalid cross pair ({j}, {k})", quantity=f"bath.cross_pairs.{position}")
            kappa[j - 1, k - 1] = kappa[k - 1, j - 1] = value
        return kappa

    def density_model(self) -> SpectralDensityModel:
        table_omega = table_values = None
        if self.bath.family == "tabulated":
            if self.bath.table_path is None:
                raise ConfigError("tabulated density needs a table", quantity="bath.table_path")
            path = self._base_dir / self.bath.table_path
            try:
                table = pd.read_csv(path)
                table_omega, table_values = table["omega_cm1"].to_numpy(), table["J_cm1"].to_numpy()
            except (OSError, KeyError, ValueError) as exc:
                raise ConfigError(f"cannot read density table {path}: {exc}", quantity="bath.table_path") from exc
        return SpectralDensityModel(
            n_sites=self.n_sites,
            family=self.bath.family,
            eta=self.bath.eta,
            omega_c=self.bath.omega_c_cm1,
            ohmicity=self.bath.ohmicity,
            site_correlation=self.site_correlation(),
            table_omega=table_omega,
            table_values=table_values,
        )

    def weighting_function(self) -> WeightingFunction:
        return WeightingFunction(self.weighting.kind, self.weighting.omega_h_cm1, self.weighting.alpha)

    def quadrature_scheme(self) -> QuadratureScheme:
        q = self.quadrature
        return QuadratureScheme(
            nodes_per_panel=q.nodes_per_panel, omega_max_factor=q.omega_max_factor, geometric_levels=q.geometric_levels
        )

    def settings(self) -> PropagationSettings:
        return PropagationSettings(
            dt=self.run.dt_fs, t_max=self.run.t_max_fs, stride=self.run.stride, inhom_order=self.run.inhom_order
        )

    def sigma0(self) -> np.ndarray:
        return initial_state(self.n_sites, self.run.initial_site - 1, self.run.initial_matrix)

    def with_parameter(self, name: str, value: float) -> "RunConfig":
        """Copy with one weighting parameter replaced; omega_h values are ratios to omega_c."""
        if name not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {name!r}", quantity="--param")
        weighting = self.weighting.model_copy()
        if name == "omega_h":
            weighting.omega_h_cm1 = value * self.bath.omega_c_cm1
        elif name == "omega_h_cm1":
            weighting.omega_h_cm1 = value
        else:
            weighting.kind = "smooth"
            weighting.alpha = value
        if weighting.kind in ("unity", "zero"):
            raise ConfigError(f"cannot sweep omega_h of a {weighting.kind} weighting", quantity="weighting.kind")
        updated = self.model_copy(update={"weighting": weighting})
        updated._base_dir = self._base_dir
        return updated

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _dotted(location) -> str:
    return ".".join(str(part) for part in location)


def parse_config(data: dict, base_dir: Optional[Path] = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections", quantity="<root>")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], quantity=_dotted(first["loc"])) from exc
    if base_dir is not None:
        config._base_dir = Path(base_dir)
    # resolve derived quantities early so bad indices fail before any computation
    config.hamiltonian()
    config.density_model()
    config.weighting_function()
    config.sigma0()
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", quantity=str(path)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", quantity=str(path)) from exc
    return parse_config(data, base_dir=path.parent)


def output_dir(default: Optional[str] = None) -> Path:
    return Path(default or os.getenv("PPQME_OUTPUT_DIR") or ".")
