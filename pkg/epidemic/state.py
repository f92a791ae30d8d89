from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from errors import ParameterDomainError

# Relative tolerance for the R0 convention check on stored rates
_RATE_RTOL = 1e-9


class InfectionMode(Enum):
    P2P = "P2P"
    CS = "CS"
    HYBRID = "Hybrid"


def _readonly(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class EpidemicParams:
    """Generative description of one non-mutating strain"""

    mode: InfectionMode
    i0: float
    r0: float
    gamma: float
    population: float
    beta_p2p: float = 0.0
    beta_cs: float = 0.0

    def __post_init__(self):
        if self.i0 < 1:
            raise ParameterDomainError(f"i0 must be >= 1, got {self.i0}")
        if not self.population > self.i0:
            raise ParameterDomainError(f"population ({self.population}) must exceed i0 ({self.i0})")
        if not self.r0 > 0:
            raise ParameterDomainError(f"r0 must be > 0, got {self.r0}")
        if not self.gamma > 0:
            raise ParameterDomainError(f"gamma must be > 0, got {self.gamma}")
        if self.beta_p2p < 0 or self.beta_cs < 0:
            raise ParameterDomainError("infection rates must be non-negative")

        if self.mode is InfectionMode.P2P:
            if self.beta_cs != 0 or not self.beta_p2p > 0:
                raise ParameterDomainError("P2P mode carries exactly one positive rate (beta_p2p)")
        elif self.mode is InfectionMode.CS:
            if self.beta_p2p != 0 or not self.beta_cs > 0:
                raise ParameterDomainError("CS mode carries exactly one positive rate (beta_cs)")

        implied_r0 = (self.beta_p2p * self.susceptible_at_start + self.beta_cs) / self.gamma
        if not np.isclose(implied_r0, self.r0, rtol=_RATE_RTOL, atol=0.0):
            raise ParameterDomainError(
                f"rates imply r0={implied_r0:.12g}, inconsistent with r0={self.r0:.12g}"
            )

    @property
    def susceptible_at_start(self) -> float:
        return self.population - self.i0

    @classmethod
    def from_r0(cls, mode: InfectionMode, i0: float, r0: float, gamma: float,
                population: float) -> "EpidemicParams":
        """Derive the infection rate from R0: beta_cs = r0*gamma, beta_p2p = r0*gamma/S(0)"""
        if mode is InfectionMode.HYBRID:
            raise ParameterDomainError("Hybrid parameters need explicit rates, use EpidemicParams.hybrid")
        if population <= i0:
            raise ParameterDomainError(f"population ({population}) must exceed i0 ({i0})")
        if mode is InfectionMode.CS:
            return cls(mode, i0, r0, gamma, population, beta_cs=r0 * gamma)
        return cls(mode, i0, r0, gamma, population, beta_p2p=r0 * gamma / (population - i0))

    @classmethod
    def hybrid(cls, i0: float, gamma: float, population: float, beta_p2p: float,
               beta_cs: float) -> "EpidemicParams":
        """Hybrid strain with both rates given; r0 is the sum of the two contributions"""
        if population <= i0:
            raise ParameterDomainError(f"population ({population}) must exceed i0 ({i0})")
        if gamma <= 0:
            raise ParameterDomainError(f"gamma must be > 0, got {gamma}")
        r0 = (beta_p2p * (population - i0) + beta_cs) / gamma
        return cls(InfectionMode.HYBRID, i0, r0, gamma, population, beta_p2p=beta_p2p, beta_cs=beta_cs)

    @property
    def beta(self) -> float:
        """The rate of the active mechanism (P2P or CS); hybrid returns beta_cs + beta_p2p*S(0)"""
        if self.mode is InfectionMode.P2P:
            return self.beta_p2p
        if self.mode is InfectionMode.CS:
            return self.beta_cs
        return self.beta_cs + self.beta_p2p * self.susceptible_at_start

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "i0": self.i0,
            "r0": self.r0,
            "gamma": self.gamma,
            "population": self.population,
            "beta_p2p": self.beta_p2p,
            "beta_cs": self.beta_cs,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpidemicParams":
        return cls(
            mode=InfectionMode(data["mode"]),
            i0=float(data["i0"]),
            r0=float(data["r0"]),
            gamma=float(data["gamma"]),
            population=float(data["population"]),
            beta_p2p=float(data.get("beta_p2p", 0.0)),
            beta_cs=float(data.get("beta_cs", 0.0)),
        )


@dataclass(frozen=True)
class CompartmentTrajectory:
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    horizon_days: int
    population: float

    def __post_init__(self):
        for name in ("s", "i", "r"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        expected = self.horizon_days + 1
        if not (len(self.s) == len(self.i) == len(self.r) == expected):
            raise ParameterDomainError(f"trajectory sequences must have length {expected}")

    def conservation_drift(self) -> float:
        """max_t |s+i+r - N| / N"""
        total = self.s + self.i + self.r
        return float(np.max(np.abs(total - self.population)) / self.population)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "day": np.arange(self.horizon_days + 1),
            "s": self.s,
            "i": self.i,
            "r": self.r,
        })

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True)
class IncidenceSeries:
    """Daily counts of machines first infected; index 0 is the first day of appearance"""

    values: np.ndarray
    day0: Optional[date] = field(default=None, compare=False)

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 1:
            raise ParameterDomainError("incidence must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ParameterDomainError("incidence values must be finite")
        if np.any(values < 0):
            raise ParameterDomainError("incidence values must be non-negative")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def window(self, t_min: int, t_max: int) -> np.ndarray:
        """Values for days t_min..t_max inclusive; days beyond the series count as zero"""
        if t_min < 0 or t_max < t_min:
            raise ParameterDomainError(f"invalid window ({t_min}, {t_max})")
        out = np.zeros(t_max - t_min + 1)
        available = self.values[t_min:t_max + 1]
        out[:len(available)] = available
        return out

    def scaled(self, factor: float, offset: float = 0.0) -> "IncidenceSeries":
        return IncidenceSeries(self.values * factor + offset, self.day0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"day": np.arange(len(self.values)), "incidence": self.values})

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "IncidenceSeries":
        frame = pd.read_csv(path, float_precision="round_trip")
        frame = frame.sort_values("day")
        values = np.zeros(int(frame["day"].max()) + 1)
        values[frame["day"].to_numpy(dtype=int)] = frame["incidence"].to_numpy(dtype=float)
        return cls(values)
