"""Idle-subtracted encoding energy from power-meter traces, and the
repetition stopping rule for energy measurements."""

import csv
import math
import statistics
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FormatError, InsufficientSamplesError, RangeError
from .tdist import t_ppf

QUANTILE_CONVENTION = "one-sided"


@dataclass(frozen=True)
class PowerTrace:
    times: np.ndarray
    power: np.ndarray
    label: str = "total"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        p = np.asarray(self.power, dtype=np.float64)
        if t.ndim != 1 or t.shape != p.shape or len(t) == 0:
            raise FormatError("trace needs equal-length, nonempty time and power columns")
        if np.any(np.diff(t) <= 0):
            raise FormatError(f"{self.label} trace timestamps are not strictly increasing")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise FormatError(f"{self.label} trace has negative or non-finite power")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "power", p)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_csv(cls, path, label: str = "total") -> "PowerTrace":
        """Read a ``t_s,power_w`` CSV; timestamps are rebased to start at 0."""
        times, power = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"t_s", "power_w"} <= set(reader.fieldnames):
                raise FormatError(f"{path}: trace CSV needs header t_s,power_w")
            for lineno, row in enumerate(reader, start=2):
                try:
                    times.append(float(row["t_s"]))
                    power.append(float(row["power_w"]))
                except (TypeError, ValueError):
                    raise FormatError(f"{path}:{lineno}: bad trace row") from None
        if not times:
            raise FormatError(f"{path}: trace is empty")
        t = np.asarray(times) - times[0]
        return cls(t, np.asarray(power), label)


def integrate_power(trace: PowerTrace, t_start: float, t_end: float) -> float:
    """Trapezoidal energy in joules over [t_start, t_end].

    Samples are joined by straight lines, so interval ends that fall between
    samples are linearly interpolated.
    """
    if t_end < t_start:
        raise RangeError(f"interval end {t_end} precedes start {t_start}")
    if t_start < trace.start or t_end > trace.end:
        raise RangeError(f"[{t_start}, {t_end}] s not covered by {trace.label} trace "
                         f"[{trace.start}, {trace.end}] s")
    if t_end == t_start:
        return 0.0
    inside = (trace.times > t_start) & (trace.times < t_end)
    t = np.concatenate(([t_start], trace.times[inside], [t_end]))
    p = np.interp(t, trace.times, trace.power)
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t)))


def encoding_energy(total: PowerTrace, idle: PowerTrace, duration: float) -> float:
    """Energy attributable to the encode: total minus idle over [0, duration]."""
    e = integrate_power(total, 0.0, duration) - integrate_power(idle, 0.0, duration)
    if e < 0:
        warnings.warn(f"negative encoding energy {e:.6g} J: idle exceeds total over the interval",
                      RuntimeWarning, stacklevel=2)
    return e


@dataclass(frozen=True)
class MeasurementSeries:
    values: Sequence[float]
    alpha_m: float = 0.99
    beta_m: float = 0.02

    def __post_init__(self):
        if len(self.values) == 0:
            raise InsufficientSamplesError("measurement series is empty")
        if not 0 < self.beta_m < 1:
            raise RangeError(f"beta_m must lie in (0, 1), got {self.beta_m}")
        if not 0.5 < self.alpha_m < 1:
            raise RangeError(f"alpha_m must lie in (0.5, 1), got {self.alpha_m}")

    @classmethod
    def from_csv(cls, path, alpha_m=0.99, beta_m=0.02) -> "MeasurementSeries":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "energy_j" not in reader.fieldnames:
                raise FormatError(f"{path}: series CSV needs header energy_j")
            try:
                values = [float(row["energy_j"]) for row in reader]
            except (TypeError, ValueError):
                raise FormatError(f"{path}: bad energy_j value") from None
        return cls(values, alpha_m, beta_m)


@dataclass(frozen=True)
class ConfidenceResult:
    satisfied: bool
    lhs: float
    rhs: float
    m: int
    mean: float
    std: float
    t_critical: float
    quantile_convention: str = QUANTILE_CONVENTION


def confidence_satisfied(series: MeasurementSeries) -> ConfidenceResult:
    """Check 2 * (std / sqrt(m)) * t(m-1) < beta * mean for the repetitions."""
    m = len(series.values)
    if m < 2:
        raise InsufficientSamplesError(f"stopping rule needs at least 2 repetitions, got {m}")
    mean = statistics.fmean(series.values)
    std = statistics.stdev(series.values)
    t_crit = t_ppf(series.alpha_m, m - 1)
    lhs = 2.0 * std / math.sqrt(m) * t_crit
    rhs = series.beta_m * mean
    return ConfidenceResult(lhs < rhs, lhs, rhs, m, mean, std, t_crit)
