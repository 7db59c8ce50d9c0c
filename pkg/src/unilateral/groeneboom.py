"""Statistics of the global concave majorant of a Wiener path.

``tau(a)`` is the last time at which ``W(t) - t/a`` reaches its supremum,
equivalently where the slope of the majorant crosses ``1/a``.  ``tau(a)/a**2``
has density ``q`` for every ``a``, and the majorant energy between ``tau(a)``
and ``tau(b)`` grows like ``log(b/a)`` on average.

The global majorant lives on ``[0, inf)``; simulations use a finite horizon
``K * a**2`` (``K = 40``, tail mass of ``q`` beyond 40 is about 1e-11) and mark
samples whose argmax falls in the last 10% of the horizon as truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DomainError
from .majorant import PolylineFunction, concave_majorant
from .paths import GridSpec, SamplePath, cached_times, replication_seed, sample_wiener
from .stats import PointStats

HORIZON_FACTOR = 40.0
TRUNCATION_ZONE = 0.1
FIRST_CELL_FACTOR = 1e-4

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TauSample:
    a: float
    tau: float
    truncated: bool


@dataclass(frozen=True)
class LValue:
    a: float
    b: float
    value: float


def tau(path: SamplePath, a: float) -> TauSample:
    """Last knot time maximising ``W(t) - t/a``.

    The tilt is linear, so the maximum over a polyline is attained at a knot.
    """
    if not a > 0:
        raise DomainError("a must be positive")
    tilted = path.values - path.times / a
    # last argmax: the definition takes the supremum of maximising times
    k = tilted.size - 1 - int(np.argmax(tilted[::-1]))
    t = float(path.times[k])
    return TauSample(float(a), t, t > (1.0 - TRUNCATION_ZONE) * path.horizon)


def q_density(t):
    """Density of ``tau(a)/a**2``: ``2 E(X/sqrt(t) - 1)_+`` with ``X ~ N(0, 1)``.

    Closed form ``2 (phi(sqrt t)/sqrt t - (1 - Phi(sqrt t)))``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("q is defined for t > 0")
    s = np.sqrt(t)
    out = 2.0 * (np.exp(-0.5 * t) / (_SQRT_2PI * s) - ndtr(-s))
    return out if out.ndim else float(out)


def q_cdf(t):
    """Distribution function of ``tau(a)/a**2``.

    Integrating the density in closed form gives, with ``s = sqrt(t)``,
    ``2 Phi(s) - 1 + 2 s phi(s) - 2 t (1 - Phi(s))``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("q_cdf is defined for t >= 0")
    s = np.sqrt(t)
    tail = ndtr(-s)
    out = (1.0 - 2.0 * tail) + 2.0 * s * np.exp(-0.5 * t) / _SQRT_2PI - 2.0 * t * tail
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def majorant_energy_between(hull: PolylineFunction, t1: float, t2: float) -> float:
    """Integral of the squared slope of ``hull`` over ``[t1, t2]``."""
    t = hull.times
    if not (t[0] <= t1 <= t2 <= t[-1]):
        raise DomainError(f"[{t1}, {t2}] is not inside [{t[0]}, {t[-1]}]")
    lo = np.maximum(t[:-1], t1)
    hi = np.minimum(t[1:], t2)
    return float(np.sum(hull.slopes**2 * np.clip(hi - lo, 0.0, None)))


def l_value(path: SamplePath, a: float, b: float, hull: PolylineFunction | None = None) -> LValue:
    """Majorant energy between ``tau(a)`` and ``tau(b)`` on one path."""
    if not 0 < a <= b:
        raise DomainError("need 0 < a <= b")
    if hull is None:
        hull = concave_majorant(path)
    ta, tb = tau(path, a).tau, tau(path, b).tau
    return LValue(float(a), float(b), majorant_energy_between(hull, ta, tb))


def tau_grid(a_min: float, a_max: float, point_count: int) -> GridSpec:
    """Geometric grid for tau statistics with ``a`` in ``[a_min, a_max]``.

    Horizon ``40 a_max**2`` and first cell ``1e-4 a_min**2``.
    """
    return GridSpec.geometric(HORIZON_FACTOR * a_max**2, point_count, FIRST_CELL_FACTOR * a_min**2)


def _slln_replication(args):
    seed, grid, V = args
    path = sample_wiener(cached_times(grid), seed)
    hull = concave_majorant(path)
    t1 = tau(path, 1.0)
    out, cens = [], [t1.truncated]
    for v in V:
        tv = tau(path, v)
        cens.append(tv.truncated)
        out.append(majorant_energy_between(hull, t1.tau, tv.tau) / math.log(v))
    return out, any(cens)


def slln_experiment(V_list, replications: int, master_seed: int, point_count: int = 100_000,
                    mapper=map) -> list[PointStats]:
    """Mean and std of ``L(1, V) / log V`` over independent paths.

    One path per replication serves every ``V``; its horizon is ``40 V_max**2``
    and its first cell ``1e-4``.
    """
    V = [float(v) for v in V_list]
    if not V:
        return []
    if any(v <= 1 for v in V) or any(np.diff(V) <= 0):
        raise ConfigurationError("V_list must be increasing with every V > 1")
    grid = tau_grid(1.0, V[-1], point_count)
    jobs = ((replication_seed(master_seed, k), grid, V) for k in range(replications))
    results = list(mapper(_slln_replication, jobs))
    vals = np.array([r[0] for r in results]).reshape(len(results), len(V))
    cens = float(np.mean([r[1] for r in results])) if results else 0.0
    return [PointStats.from_samples("V", v, vals[:, i], cens) for i, v in enumerate(V)]


def _sandwich_replication(args):
    seed, grid, T_list, delta = args
    path = sample_wiener(cached_times(grid, tuple(T_list)), seed)
    hits, cens = [], False
    for T in T_list:
        hi = tau(path, T ** (0.5 + delta))
        lo = tau(path, T ** (0.5 - delta))
        cens = cens or hi.truncated or lo.truncated
        hits.append(hi.tau > T > lo.tau)
    return hits, cens


def tau_sandwich_experiment(T_list, delta: float, replications: int, master_seed: int,
                            point_count: int = 40_000, mapper=map) -> list[PointStats]:
    """Frequency of ``tau(T**(1/2 + delta)) > T > tau(T**(1/2 - delta))`` per ``T``."""
    if not 0 < delta < 0.5:
        raise ConfigurationError("delta must lie in (0, 1/2)")
    T_list = [float(T) for T in T_list]
    if not T_list:
        return []
    if any(T <= 1 for T in T_list):
        raise ConfigurationError("T values must exceed 1")
    a_min = min(T ** (0.5 - delta) for T in T_list)
    a_max = max(T ** (0.5 + delta) for T in T_list)
    grid = tau_grid(a_min, a_max, point_count)
    jobs = ((replication_seed(master_seed, k), grid, T_list, delta) for k in range(replications))
    results = list(mapper(_sandwich_replication, jobs))
    hits = np.array([r[0] for r in results], dtype=float).reshape(len(results), len(T_list))
    cens = float(np.mean([r[1] for r in results])) if results else 0.0
    return [
        PointStats.from_samples("T", T, hits[:, i], cens, exact_frequency_bound=sandwich_upper_bound(T, delta))
        for i, T in enumerate(T_list)
    ]


def sandwich_upper_bound(T: float, delta: float) -> float:
    """``1 - q_cdf(T**(-2 delta))``: exact probability of ``tau(T**(1/2 + delta)) > T``.

    The double inequality cannot hold more often than this.
    """
    return 1.0 - q_cdf(T ** (-2.0 * delta))


def _tau_replication(args):
    seed, grid, a = args
    s = tau(sample_wiener(cached_times(grid), seed), a)
    return s.tau / a**2, s.truncated


def tau_samples(a: float, n: int, master_seed: int, point_count: int = 20_000, stream: int | None = None,
                mapper=map):
    """``n`` independent draws of ``tau(a)/a**2`` and the censored fraction."""
    a = float(a)
    grid = tau_grid(a, a, point_count)
    jobs = ((replication_seed(master_seed, k, stream), grid, a) for k in range(n))
    results = list(mapper(_tau_replication, jobs))
    samples = np.array([r[0] for r in results], dtype=float)
    cens = float(np.mean([r[1] for r in results])) if results else 0.0
    return samples, cens
