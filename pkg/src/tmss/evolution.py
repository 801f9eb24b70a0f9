"""Time grids, the shared RK4 stepper and the TimeSeries container."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument
from .observables import COLUMNS, ObservableRecord

# RK4 is stable on the imaginary axis for |lambda h| < 2*sqrt(2)
RK4_STABILITY_MARGIN = 2.5


@dataclass(frozen=True)
class EvolutionConfig:
    """Uniform output grid on [0, t_max] integrated with fixed steps ``dt``."""

    t_max: float
    n_outputs: int
    dt: float

    def __post_init__(self):
        if not self.t_max > 0:
            raise InvalidArgument(f"t_max must be positive, got {self.t_max}")
        if int(self.n_outputs) != self.n_outputs or self.n_outputs < 2:
            raise InvalidArgument(f"n_outputs must be an integer >= 2, got {self.n_outputs}")
        if not self.dt > 0:
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        n = round(self.spacing / self.dt)
        if n < 1 or abs(n * self.dt - self.spacing) > 1e-12 * self.spacing:
            raise InvalidArgument(f"dt = {self.dt} does not divide the output spacing {self.spacing}")

    @property
    def spacing(self) -> float:
        return self.t_max / (self.n_outputs - 1)

    @property
    def substeps(self) -> int:
        return int(round(self.spacing / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, int(self.n_outputs))

    def refined(self, factor: int = 2) -> "EvolutionConfig":
        return EvolutionConfig(self.t_max, self.n_outputs, self.dt / factor)

    def capped(self, max_dt: float) -> "EvolutionConfig":
        """Same grid with dt reduced (if needed) to at most ``max_dt``."""
        if self.dt <= max_dt:
            return self
        return EvolutionConfig(self.t_max, self.n_outputs, snap_dt(max_dt, self.spacing))

    def as_dict(self) -> dict:
        return {"t_max": self.t_max, "n_outputs": int(self.n_outputs), "dt": self.dt}


def snap_dt(dt: float, spacing: float) -> float:
    """Largest step <= dt that divides ``spacing`` into an integer count."""
    n = max(1, math.ceil(spacing / dt - 1e-9))
    return spacing / n


def default_dt(theta: float, kappa: float = 0.0, spacing: Optional[float] = None,
               max_rate: Optional[float] = None) -> float:
    """min(0.005 * 2pi/Theta, 0.05/kappa, stability cap), snapped to the grid.

    ``max_rate`` bounds the spectral radius of the generator; the step is
    kept below ``RK4_STABILITY_MARGIN / max_rate``.
    """
    dt = 0.005 * 2 * math.pi / theta
    if kappa > 0:
        dt = min(dt, 0.05 / kappa)
    if max_rate:
        dt = min(dt, RK4_STABILITY_MARGIN / max_rate)
    return snap_dt(dt, spacing) if spacing else dt


def grid_config(theta: float, kappa: float = 0.0, t_max: float = None, n_outputs: int = 201,
                max_rate: Optional[float] = None) -> EvolutionConfig:
    """Default grid: [0, 2 T_pi] with the default step policy."""
    if t_max is None:
        t_max = 2 * math.pi / theta
    spacing = t_max / (n_outputs - 1)
    return EvolutionConfig(t_max, n_outputs, default_dt(theta, kappa, spacing, max_rate))


def rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + (0.5 * h) * k1)
    k3 = f(y + (0.5 * h) * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def params_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TimeSeries:
    """Observable records on an output grid plus provenance.

    ``errors`` maps column names to standard errors (trajectory ensembles
    only).
    """

    times: np.ndarray
    records: list[ObservableRecord]
    method: str
    params_hash: str
    errors: Optional[dict[str, np.ndarray]] = None
    meta: dict = field(default_factory=dict)
    final_state: object = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.records):
            raise InvalidArgument("times and records differ in length")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise InvalidArgument("times must start at 0 and increase strictly")

    def column(self, name: str) -> np.ndarray:
        """Column as a float array with NaN for undefined entries."""
        if name == "t":
            return self.times.copy()
        if name not in COLUMNS:
            raise InvalidArgument(f"unknown column {name!r}")
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records], dtype=float)

    def at(self, t: float) -> ObservableRecord:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.records[i]

    def __len__(self):
        return len(self.records)


def max_abs_difference(a: TimeSeries, b: TimeSeries, name: str) -> float:
    """Largest |a - b| of a column over points where both are defined."""
    x, y = a.column(name), b.column(name)
    if x.shape != y.shape:
        raise InvalidArgument("time series have different grids")
    both = ~(np.isnan(x) | np.isnan(y))
    if np.any(np.isnan(x) != np.isnan(y)):
        return math.inf
    return float(np.max(np.abs(x[both] - y[both]))) if both.any() else 0.0
