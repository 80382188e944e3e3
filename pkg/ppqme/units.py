"""
Fixed unit system (cm^-1, fs, K) and numerically safe thermal factors.

Energies and frequencies are both carried as wavenumbers: a frequency w stands for the
energy hbar*w expressed in cm^-1, so phases are w*t/HBAR_CMFS with t in fs.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants

from ppqme.errors import DomainError

# coth(x) switches to its Laurent series below this argument
COTH_SERIES_THRESHOLD = 1e-3


@dataclass(frozen=True)
class UnitSystem:
    energy_unit: str = "cm^-1"
    time_unit: str = "fs"
    temperature_unit: str = "K"
    # hbar in cm^-1 fs: 1 / (2 pi c) with c in cm/fs
    hbar_cmfs: float = 1.0 / (2.0 * np.pi * constants.c * 1e2 * 1e-15)
    # k_B / (h c) in cm^-1 / K
    kB_cmK: float = constants.k / (constants.h * constants.c * 1e2)


UNITS = UnitSystem()
HBAR_CMFS = UNITS.hbar_cmfs
KB_CMK = UNITS.kB_cmK


def thermal_coth(x):
    """coth(x) for x > 0, scalar or array."""
    values = np.asarray(x, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError("thermal_coth requires a positive argument", quantity=f"x={np.min(values)!r}")

    small = values < COTH_SERIES_THRESHOLD
    result = np.empty_like(values)
    xs = values[small]
    result[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    result[~small] = 1.0 / np.tanh(values[~small])

    if np.ndim(x) == 0:
        return float(result)
    return result


def beta_from_temperature(temperature_K: float) -> float:
    if not temperature_K > 0:
        raise DomainError("temperature must be positive", quantity=f"temperature_K={temperature_K!r}")
    return 1.0 / (KB_CMK * temperature_K)
