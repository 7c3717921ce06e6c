"""Shared helpers for comparability bands and decay-law fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EnvelopeBand", "fit_loglog_slope", "fit_exponential_rate"]


@dataclass(frozen=True)
class EnvelopeBand:
    """Observed range of a ratio that a two-sided bound keeps of order one.

    ``lower`` and ``upper`` are the calibrated limits the ratio must stay
    inside; ``observed_min`` and ``observed_max`` are the measured extremes
    over the grid the check ran on.
    """

    name: str
    lower: float
    upper: float
    observed_min: float
    observed_max: float

    @property
    def passed(self) -> bool:
        return self.lower <= self.observed_min and self.observed_max <= self.upper

    @property
    def spread(self) -> float:
        """Ratio of the observed extremes, always >= 1."""
        return self.observed_max / self.observed_min

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return (
            f"{self.name}: observed [{self.observed_min:.6g}, {self.observed_max:.6g}]"
            f" within [{self.lower:.6g}, {self.upper:.6g}]: {status}"
        )


def band_from_ratios(name: str, ratios, lower: float, upper: float) -> EnvelopeBand:
    """Build an EnvelopeBand from an array of observed ratios."""
    arr = np.asarray(ratios, dtype=float)
    if arr.size == 0:
        raise ValueError("no ratios to summarize")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("ratios must be finite and positive")
    return EnvelopeBand(name, lower, upper, float(arr.min()), float(arr.max()))


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ValueError("need two 1-d arrays of equal length >= 2")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("log-log fit needs positive data")
    coef = np.polyfit(np.log(x), np.log(y), 1)
    return float(coef[0]), float(coef[1])


def fit_exponential_rate(t, y) -> tuple[float, float]:
    """Fit log y = c + rate * t + power * log t.

    Separates the exponential rate from an algebraic prefactor, for data
    following a t**power * exp(rate * t) law. Returns (rate, power).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.ndim != 1 or t.shape != y.shape or t.size < 3:
        raise ValueError("need at least 3 points to separate rate and power")
    if np.any(t <= 0.0) or np.any(y <= 0.0):
        raise ValueError("fit needs positive data")
    design = np.column_stack([np.ones_like(t), t, np.log(t)])
    coef, *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    return float(coef[1]), float(coef[2])
