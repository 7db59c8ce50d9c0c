"""Concave majorants, the optimal unilateral approximant and its energy.

For a path ``w`` on ``[0, T]`` and a start height ``r > w(0)`` the function of
least kinetic energy that starts at ``r`` and stays above ``w`` is

* the constant ``r`` when ``r >= max w``;
* otherwise the line from ``(0, r)`` tangent to the minimal concave majorant of
  ``w``, then the majorant itself up to the first time ``w`` reaches its
  maximum, then a constant.

Sampled paths are piecewise linear, so their minimal concave majorant is the
upper hull of the knots and every quantity here is exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._hull import prefix_majorant_energies, upper_hull_indices
from .errors import DomainError, MalformedInputError, OracleError, PreconditionError
from .paths import SamplePath

__all__ = [
    "PolylineFunction",
    "MajorantDecomposition",
    "energy",
    "concave_majorant",
    "tangent_from_point",
    "optimal_unilateral_majorant",
    "prefix_optimal_energies",
    "qp_oracle_min_energy",
]


@dataclass(frozen=True, eq=False)
class PolylineFunction:
    """Piecewise-linear function through ``knots`` (shape ``(k, 2)``)."""

    knots: np.ndarray
    concave: bool = False

    def __post_init__(self):
        k = np.array(self.knots, dtype=float)
        if k.ndim != 2 or k.shape[1] != 2 or k.shape[0] < 2:
            raise MalformedInputError("knots must be an array of at least two (t, y) pairs")
        if not np.all(np.diff(k[:, 0]) > 0):
            raise MalformedInputError("knot times must be strictly increasing")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)

    @classmethod
    def from_path(cls, path: SamplePath) -> "PolylineFunction":
        return cls(np.column_stack((path.times, path.values)))

    @property
    def times(self) -> np.ndarray:
        return self.knots[:, 0]

    @property
    def values(self) -> np.ndarray:
        return self.knots[:, 1]

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.times)

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def is_concave(self, rtol: float = 1e-12) -> bool:
        s = self.slopes
        scale = np.maximum(np.abs(s[:-1]), np.abs(s[1:]))
        return bool(np.all(np.diff(s) <= rtol * scale))

    def __eq__(self, other):
        if not isinstance(other, PolylineFunction):
            return NotImplemented
        return np.array_equal(self.knots, other.knots)

    __hash__ = None


@dataclass(frozen=True)
class MajorantDecomposition:
    """Structure of the optimal majorant ``chi``.

    ``case`` is ``"constant"`` or ``"three_segment"``.  In the three-segment
    case ``chi`` is affine on ``[0, tangent_end]``, equals the concave majorant
    on ``[tangent_end, max_time]`` and is constant afterwards.  In the constant
    case both times are 0.
    """

    chi: PolylineFunction
    case: str
    tangent_end: float
    max_time: float
    energy: float


def energy(f) -> float:
    """Kinetic energy ``sum (dy)**2 / dt`` of a polyline or sampled path."""
    if isinstance(f, SamplePath):
        t, y = f.times, f.values
    else:
        k = np.asarray(f.knots if isinstance(f, PolylineFunction) else f, dtype=float)
        t, y = k[:, 0], k[:, 1]
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise MalformedInputError("duplicate or decreasing time knots")
    return float(np.sum(np.diff(y) ** 2 / dt))


def concave_majorant(path) -> PolylineFunction:
    """Minimal concave majorant (upper hull) of the knots of ``path``."""
    t, y = path.times, path.values
    idx = upper_hull_indices(t, y)
    return PolylineFunction(np.column_stack((t[idx], y[idx])), concave=True)


def tangent_from_point(hull: PolylineFunction, r: float):
    """Line through ``(0, r)`` that touches ``hull`` from above.

    Returns ``(slope, touch_time)`` where the slope is the smallest one for
    which ``r + slope * t`` dominates the hull, i.e. the largest chord slope
    ``(hull(t_k) - r) / t_k`` over vertices ``t_k > 0``.  Ties go to the latest
    vertex.  Returns ``None`` when ``r >= max(hull)``: the constant ``r``
    already dominates and no tangent is needed.
    """
    t, y = hull.times, hull.values
    if not r > y[0]:
        raise PreconditionError("start height must exceed the hull at t = 0")
    top = int(np.argmax(y))
    if r >= y[top]:
        return None
    tk, yk = t[1 : top + 1], y[1 : top + 1]
    ratio = (yk - r) / tk
    best = ratio.max()
    k = int(np.flatnonzero(ratio == best)[-1])
    return float(best), float(tk[k])


def optimal_unilateral_majorant(path: SamplePath, r: float) -> MajorantDecomposition:
    """Least-energy function ``h`` with ``h(0) = r`` and ``h >= path`` on ``[0, T]``."""
    if not r > path.values[0]:
        raise PreconditionError("start height r must exceed the path value at t = 0")
    T = path.horizon
    hull = concave_majorant(path)
    t, y = hull.times, hull.values
    # first argmax: hull vertices keep the earliest of equal maxima of the path
    top = int(np.argmax(y))
    if r >= y[top]:
        chi = PolylineFunction([[0.0, r], [T, r]], concave=True)
        return MajorantDecomposition(chi, "constant", 0.0, 0.0, 0.0)

    slope, touch = tangent_from_point(hull, r)
    k = int(np.searchsorted(t, touch))
    knots = [(0.0, r)]
    knots.extend(zip(t[k : top + 1], y[k : top + 1]))
    if t[top] < T:
        knots.append((T, y[top]))
    chi = PolylineFunction(knots, concave=True)
    e = slope * slope * touch
    if top > k:
        e += energy(hull.knots[k : top + 1])
    return MajorantDecomposition(chi, "three_segment", touch, float(t[top]), float(e))


def prefix_optimal_energies(path: SamplePath, r: float, horizons) -> np.ndarray:
    """Optimal unilateral energy on ``[0, H]`` for each ``H`` in ``horizons``.

    Every ``H`` must be a knot of ``path``; one hull pass serves them all.
    """
    horizons = np.asarray(horizons, dtype=float)
    cuts = np.searchsorted(path.times, horizons)
    if np.any(cuts >= path.times.size) or not np.array_equal(path.times[cuts], horizons):
        raise DomainError("every horizon must be a knot of the path")
    if np.any(np.diff(cuts) < 0):
        raise DomainError("horizons must be increasing")
    if not r > path.values[0]:
        raise PreconditionError("start height r must exceed the path value at t = 0")
    return prefix_majorant_energies(path.times, path.values, float(r), cuts.astype(np.int64))


def qp_oracle_min_energy(path: SamplePath, r: float, max_knots: int = 200) -> float:
    """Minimal discrete energy by a primal active-set QP solve.

    Minimises ``sum (h[i+1] - h[i])**2 / dt[i]`` over knot values with
    ``h[0] = r`` and ``h[i] >= w[i]``.  Knows nothing about hulls; it is the
    independent check for :func:`optimal_unilateral_majorant`.
    """
    t, w = path.times, path.values
    n = t.size
    if n > max_knots:
        raise DomainError(f"oracle limited to {max_knots} knots, got {n}")
    c = 1.0 / np.diff(t)
    m = n - 1
    # objective 1/2 x'Hx + g'x + const over x = h[1:]
    H = np.zeros((m, m))
    idx = np.arange(m)
    H[idx, idx] = 2.0 * c
    H[idx[:-1], idx[:-1]] += 2.0 * c[1:]
    H[idx[:-1], idx[1:]] = -2.0 * c[1:]
    H[idx[1:], idx[:-1]] = -2.0 * c[1:]
    g = np.zeros(m)
    g[0] = -2.0 * c[0] * r
    lb = w[1:]

    def objective(x):
        h = np.concatenate(([r], x))
        return float(np.sum(np.diff(h) ** 2 * c))

    x = np.full(m, max(r, lb.max()))
    active = np.zeros(m, dtype=bool)
    scale = 1.0 + np.abs(x).max()
    for _ in range(20 * m + 100):
        free = ~active
        target = x.copy()
        if free.any():
            rhs = -g[free] - H[np.ix_(free, active)] @ x[active]
            target[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        p = target - x
        if np.max(np.abs(p)) <= 1e-13 * scale:
            lam = H @ x + g
            if not active.any() or lam[active].min() >= -1e-10 * (1.0 + np.abs(lam).max()):
                return objective(x)
            j = np.flatnonzero(active)[np.argmin(lam[active])]
            active[j] = False
            continue
        # largest feasible step towards the equality-constrained minimiser
        blocking = free & (p < 0)
        alpha, j = 1.0, -1
        if blocking.any():
            steps = (lb[blocking] - x[blocking]) / p[blocking]
            k = int(np.argmin(steps))
            if steps[k] < 1.0:
                alpha, j = max(steps[k], 0.0), int(np.flatnonzero(blocking)[k])
        x = x + alpha * p
        if j >= 0:
            x[j] = lb[j]
            active[j] = True
    raise OracleError("active-set iteration cap reached")
