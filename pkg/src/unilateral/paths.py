"""Seeded Wiener paths, grids, and the Ornstein-Uhlenbeck / scaling transforms.

Every random draw in the package goes through :func:`make_rng`, which accepts
either a plain integer seed or a :class:`numpy.random.SeedSequence`.  Experiment
replication ``k`` under master seed ``s`` uses :func:`replication_seed` so that
results do not depend on the order or process in which replications run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DomainError, MalformedInputError

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A continuous function known at strictly increasing time knots.

    Between knots the function is taken to be linear.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=float)
        v = np.ascontiguousarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise MalformedInputError("times and values must be 1-d arrays of equal length")
        if t.size < 2:
            raise MalformedInputError("a path needs at least two knots")
        if not np.all(np.diff(t) > 0):
            raise MalformedInputError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise MalformedInputError("non-finite knot")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def restrict(self, horizon: float) -> "SamplePath":
        """Knots with ``t <= horizon`` (``horizon`` should itself be a knot)."""
        k = int(np.searchsorted(self.times, horizon, side="right"))
        return SamplePath(self.times[:k], self.values[:k])

    def subsample(self, step: int, keep=()) -> "SamplePath":
        """Every ``step``-th knot plus the endpoints and any times in ``keep``."""
        mask = np.zeros(self.times.size, dtype=bool)
        mask[::step] = True
        mask[-1] = True
        if len(keep):
            mask[np.searchsorted(self.times, keep)] = True
        return SamplePath(self.times[mask], self.values[mask])

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class GridSpec:
    """Time grid on ``[0, horizon]``.

    ``uniform`` grids have step ``horizon / (point_count - 1)``.  ``geometric``
    grids have cells ``h0 * ratio**k`` for ``k = 0 .. point_count - 2``, with the
    first cell ``h0`` fixed by the requirement that the cells sum to ``horizon``.
    """

    kind: str
    horizon: float
    point_count: int
    geometric_ratio: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric"):
            raise ConfigurationError(f"unknown grid kind {self.kind!r}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigurationError("grid horizon must be positive and finite")
        if int(self.point_count) != self.point_count or self.point_count < 2:
            raise ConfigurationError("point_count must be an integer >= 2")
        if self.kind == "geometric":
            if self.geometric_ratio is None or not self.geometric_ratio > 1:
                raise ConfigurationError("geometric grids need geometric_ratio > 1")

    @classmethod
    def uniform(cls, horizon: float, point_count: int) -> "GridSpec":
        return cls("uniform", horizon, point_count)

    @classmethod
    def geometric(cls, horizon: float, point_count: int, first_cell: float) -> "GridSpec":
        """Geometric grid whose first cell has width ``first_cell``.

        The ratio is found by root finding; ``first_cell`` must be smaller than
        the uniform step, otherwise no ratio > 1 exists.
        """
        if point_count < 3:
            raise ConfigurationError("geometric grids need at least three points")
        cells = point_count - 1
        if not 0 < first_cell < horizon / cells:
            raise ConfigurationError("first_cell must lie in (0, horizon / (point_count - 1))")

        # log of first cell as a function of u = log(ratio)
        def gap(u):
            return math.log(horizon) + _log_expm1(u) - _log_expm1(cells * u) - math.log(first_cell)

        hi = 1.0
        while gap(hi) > 0:
            hi *= 2.0
        u = brentq(gap, 1e-300, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return cls("geometric", horizon, point_count, math.exp(u))

    @property
    def first_cell(self) -> float:
        if self.kind == "uniform":
            return self.horizon / (self.point_count - 1)
        u = math.log(self.geometric_ratio)
        return self.horizon * math.expm1(u) / math.expm1((self.point_count - 1) * u)

    def times(self) -> np.ndarray:
        n = self.point_count
        if self.kind == "uniform":
            t = np.linspace(0.0, self.horizon, n)
        else:
            u = math.log(self.geometric_ratio)
            k = np.arange(n, dtype=float)
            # t_k = horizon * (ratio**k - 1) / (ratio**(n-1) - 1), evaluated stably
            t = self.horizon * np.exp(_log_expm1_array(k[1:] * u) - _log_expm1((n - 1) * u))
            t = np.concatenate(([0.0], t))
        t[-1] = self.horizon
        return t


def _log_expm1(x: float) -> float:
    return x + math.log(-math.expm1(-x)) if x > 30 else math.log(math.expm1(x))


def _log_expm1_array(x: np.ndarray) -> np.ndarray:
    return x + np.log(-np.expm1(-x))


def grid_times(grid, extra=()) -> np.ndarray:
    """Knot times of ``grid`` (a GridSpec or an array), merged with ``extra``."""
    t = grid.times() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    if len(extra):
        t = np.union1d(t, np.asarray(extra, dtype=float))
    return t


@lru_cache(maxsize=8)
def cached_times(grid: GridSpec, extra: tuple = ()) -> np.ndarray:
    """Read-only knot array of ``grid`` merged with ``extra``, memoised per process."""
    t = grid_times(grid, extra)
    t.setflags(write=False)
    return t


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replication_seed(master_seed: int, index: int, stream: int | None = None) -> np.random.SeedSequence:
    """Independent stream for replication ``index`` of an experiment.

    ``stream`` separates families of replications within one experiment.
    """
    key = (int(index),) if stream is None else (int(stream), int(index))
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def sample_wiener(grid, seed: SeedLike) -> SamplePath:
    """Standard Wiener path on the knots of ``grid``.

    ``grid`` is a :class:`GridSpec` or an increasing array of times starting
    at 0.  Increments are drawn exactly, ``N(0, dt)`` per cell; there is no
    bridge correction, so suprema between knots are not represented.
    """
    t = grid_times(grid)
    if t.ndim != 1 or t.size < 2:
        raise ConfigurationError("a grid needs at least two points")
    if t[0] != 0.0:
        raise ConfigurationError("Wiener grids must start at t = 0")
    dt = np.diff(t)
    if not np.all(dt > 0):
        raise ConfigurationError("grid times must be strictly increasing")
    z = make_rng(seed).standard_normal(dt.size)
    w = np.empty_like(t)
    w[0] = 0.0
    np.cumsum(np.sqrt(dt) * z, out=w[1:])
    return SamplePath(t, w)


def to_ou(path: SamplePath) -> SamplePath:
    """``U(s) = exp(-s/2) W(exp(s))`` on the knots with ``t >= 1``."""
    keep = path.times >= 1.0
    if np.count_nonzero(keep) < 2:
        raise DomainError("the Ornstein-Uhlenbeck transform needs at least two knots with t >= 1")
    tau = np.log(path.times[keep])
    return SamplePath(tau, np.exp(-0.5 * tau) * path.values[keep])


def brownian_scaling(path: SamplePath, c: float) -> SamplePath:
    """Map knots ``(t, w)`` to ``(t / c, w / sqrt(c))``.

    This preserves the law of a Wiener path and the energy of every polyline.
    """
    if not c > 0:
        raise DomainError("scaling factor must be positive")
    if c == 1:
        return SamplePath(path.times.copy(), path.values.copy())
    return SamplePath(path.times / c, path.values / math.sqrt(c))
