"""Summary statistics, goodness of fit and log-slope regression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass
class PointStats:
    """Mean / std / count of one statistic at one parameter point."""

    parameter: str
    point: float
    mean: float | None
    std: float | None
    count: int
    censored_rate: float = 0.0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, parameter, point, samples, censored_rate=0.0, **extra):
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            return cls(parameter, float(point), None, None, 0, censored_rate, extra)
        std = float(x.std(ddof=1)) if x.size > 1 else 0.0
        return cls(parameter, float(point), float(x.mean()), std, int(x.size), censored_rate, extra)

    @property
    def stderr(self):
        if not self.count:
            return None
        return self.std / math.sqrt(self.count)


def ks_statistic(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf`` must accept an array.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("KS statistic of an empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(x, y) -> float:
    """Sup distance between two empirical CDFs."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise DomainError("KS statistic of an empty sample")
    pts = np.concatenate((x, y))
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    r_squared: float


def fit_log_slope(points) -> LogFit:
    """Ordinary least squares of ``energy`` against ``log T`` for ``(T, energy)`` pairs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DomainError("need at least three (T, energy) points")
    T, y = pts[:, 0], pts[:, 1]
    if np.any(T <= 1) or np.unique(T).size != T.size:
        raise DomainError("T values must be distinct and greater than 1")
    x = np.log(T)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise DomainError("degenerate abscissas")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return LogFit(slope, intercept, r2)
