"""Adaptive pursuit of a Wiener path by diffusion strategies.

A strategy drives the approximant by

    h'(t) = t**-0.5 * b_tilde((h(t) - W(t)) / sqrt(t)),

which in Ornstein-Uhlenbeck coordinates (``s = log t``, ``z = h / sqrt(t)``,
``U = W / sqrt(t)``) makes the rescaled gap ``Z = z - U`` a time-homogeneous
diffusion ``dZ = b(Z) ds - dW~`` with ``b(x) = b_tilde(x) - x/2``.  The energy
rate is ``E b_tilde(Z)**2`` under the stationary law of ``Z``.  The optimal
drift is ``b_tilde(x) = 1/x``, i.e. ``h' = 1/(h - W)``, with stationary density
``sqrt(2/pi) x**2 exp(-x**2/2)`` and unit energy rate per ``log T``.

Both integrators are compiled with numba when the drift functions are numba
dispatchers and fall back to the identical Python code otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher
from scipy import integrate

from .errors import (
    ConfigurationError,
    IntegrationError,
    NoStationaryDensityError,
    PreconditionError,
)
from .paths import GridSpec, SamplePath, cached_times, make_rng, replication_seed, sample_wiener
from .stats import LogFit, PointStats, fit_log_slope

GAP_FLOOR = 1e-12
MAX_GAP_CHANGE = 0.25
# tighter per-step limit in the pursuit integrator, for RK4 accuracy near contact
PURSUIT_GAP_CHANGE = 0.1
MAX_HALVINGS = 60


@dataclass(frozen=True)
class StrategyDrift:
    """Drift pair of a diffusion strategy.

    ``b_tilde`` acts in original coordinates, ``b = b_tilde - x/2`` in OU
    coordinates.  ``time_homogeneous`` marks drifts of the form ``c/x``, for
    which ``t**-0.5 b_tilde(g / sqrt(t)) == b_tilde(g)`` and the pursuit may
    start at ``t = 0``.  ``log_p0`` is an optional closed form of
    ``B(x) = 2 * integral of b`` (any additive constant).
    """

    b_tilde: Callable[[float], float]
    b: Callable[[float], float]
    name: str
    time_homogeneous: bool = False
    log_p0: Callable | None = None

    @classmethod
    def from_b_tilde(cls, b_tilde, name, **kw):
        if isinstance(b_tilde, CPUDispatcher):

            @njit
            def b(x):
                return b_tilde(x) - 0.5 * x

        else:

            def b(x):
                return b_tilde(x) - 0.5 * x

        return cls(b_tilde, b, name, **kw)

    @classmethod
    def from_b(cls, b, name, **kw):
        if isinstance(b, CPUDispatcher):

            @njit
            def b_tilde(x):
                return b(x) + 0.5 * x

        else:

            def b_tilde(x):
                return b(x) + 0.5 * x

        return cls(b_tilde, b, name, **kw)

    @property
    def compiled(self) -> bool:
        return isinstance(self.b_tilde, CPUDispatcher) and isinstance(self.b, CPUDispatcher)


@njit(cache=True)
def _inverse(x):
    return 1.0 / x


@njit(cache=True)
def _inverse_minus_half(x):
    return 1.0 / x - 0.5 * x


def _optimal_log_p0(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 * np.log(x) - 0.5 * x * x


def optimal_drift() -> StrategyDrift:
    """``b(x) = 1/x - x/2``, ``b_tilde(x) = 1/x``: the pursuit ``h' = 1/(h - W)``."""
    return StrategyDrift(_inverse, _inverse_minus_half, "optimal", True, _optimal_log_p0)


def constant_drift(c: float) -> StrategyDrift:
    """``b_tilde == c``.  Not admissible: it stays bounded as the gap closes."""
    c = float(c)

    @njit
    def b_tilde(x):
        return c

    return StrategyDrift.from_b_tilde(b_tilde, f"constant({c:g})")


def is_admissible(drift: StrategyDrift) -> bool:
    """Whether ``b_tilde`` blows up as the gap closes (probed down to 1e-12)."""
    x = [1e-4, 1e-8, 1e-12]
    v = [drift.b_tilde(xi) for xi in x]
    return bool(v[0] < v[1] < v[2] and v[2] > 1e6)


@dataclass(frozen=True)
class PursuitTrace:
    """Knot-wise record of a pursuit run.

    For :func:`simulate_pursuit` the columns are ``t, W, h, h - W`` and the
    running energy ``int h'**2 dt``.  For :func:`simulate_gap_diffusion` they
    are ``s, U, z, Z`` in OU coordinates with energy ``int (z' + z/2)**2 ds``.
    """

    times: np.ndarray
    w: np.ndarray
    h: np.ndarray
    gap: np.ndarray
    cumulative_energy: np.ndarray
    substeps: int = 0

    @property
    def energy(self) -> float:
        return float(self.cumulative_energy[-1])


def _pursuit_kernel(t, w, r, b_tilde, homogeneous, gap_floor, max_change, max_halvings):
    n = t.size
    h = np.empty(n)
    e = np.empty(n)
    h[0] = w[0] + r
    e[0] = 0.0
    substeps = 0
    for k in range(n - 1):
        t0 = t[k]
        t1 = t[k + 1]
        slope = (w[k + 1] - w[k]) / (t1 - t0)
        s = t0
        hk = h[k]
        ek = e[k]
        dt = t1 - t0
        halvings = 0
        while s < t1:
            if s + dt >= t1:
                dt = t1 - s
            # classical RK4 on (h, energy) with W linear inside the cell
            ok = True
            hv = hk
            hn = hk
            v = 0.0
            acc_h = 0.0
            acc_e = 0.0
            for stage in range(4):
                if stage == 0:
                    ts = s
                    hv = hk
                elif stage == 1:
                    ts = s + 0.5 * dt
                    hv = hk + 0.5 * dt * v
                elif stage == 2:
                    ts = s + 0.5 * dt
                    hv = hk + 0.5 * dt * v
                else:
                    ts = s + dt
                    hv = hk + dt * v
                g = hv - (w[k] + slope * (ts - t0))
                if not g > gap_floor:
                    ok = False
                    break
                if homogeneous:
                    v = b_tilde(g)
                else:
                    rt = math.sqrt(ts)
                    v = b_tilde(g / rt) / rt
                wgt = 1.0 if (stage == 0 or stage == 3) else 2.0
                acc_h += wgt * v
                acc_e += wgt * v * v
            if ok:
                g0 = hk - (w[k] + slope * (s - t0))
                hn = hk + dt * acc_h / 6.0
                gn = hn - (w[k] + slope * (s + dt - t0))
                if not gn > gap_floor or abs(gn - g0) > max_change * g0:
                    ok = False
            if not ok:
                halvings += 1
                # a step below the resolution of s means the gap is closing in finite time
                if halvings > max_halvings or s + 0.5 * dt == s:
                    return h, e, 1, substeps, s
                dt *= 0.5
                continue
            hk = hn
            ek += dt * acc_e / 6.0
            s = t1 if s + dt >= t1 else s + dt
            substeps += 1
            halvings = 0
            dt *= 2.0
        h[k + 1] = hk
        e[k + 1] = ek
    return h, e, 0, substeps, t[n - 1]


_pursuit_kernel_jit = njit(cache=True)(_pursuit_kernel)


def simulate_pursuit(path: SamplePath, r: float, drift: StrategyDrift | None = None) -> PursuitTrace:
    """Run the pursuit strategy ``drift`` against ``path`` from gap ``r``.

    The path is linear between knots; each cell is integrated by RK4 with
    sub-steps halved until the gap changes by at most 10% per step.  The
    pursuit starts at ``path.times[0]``; that must be positive unless the
    drift is time-homogeneous.
    """
    drift = optimal_drift() if drift is None else drift
    if not r > 0:
        raise PreconditionError("initial gap r must be positive")
    if path.times[0] <= 0 and not drift.time_homogeneous:
        raise PreconditionError("time-inhomogeneous strategies need a path starting at t > 0")
    kernel = _pursuit_kernel_jit if drift.compiled else _pursuit_kernel
    h, e, status, substeps, t_fail = kernel(
        path.times, path.values, float(r), drift.b_tilde, bool(drift.time_homogeneous),
        GAP_FLOOR, PURSUIT_GAP_CHANGE, MAX_HALVINGS,
    )
    if status:
        why = "" if is_admissible(drift) else f" (drift {drift.name!r} is inadmissible: b_tilde stays bounded at 0)"
        raise IntegrationError(f"gap collapsed below {GAP_FLOOR:g} near t = {t_fail:.6g}{why}")
    return PursuitTrace(path.times, path.values, h, h - path.values, e, int(substeps))


def ou_coordinates(trace: PursuitTrace):
    """``(s, U, z, Z)`` for the knots of ``trace`` with ``t >= 1``."""
    keep = trace.times >= 1.0
    s = np.log(trace.times[keep])
    scale = np.exp(-0.5 * s)
    U = scale * trace.w[keep]
    z = scale * trace.h[keep]
    return s, U, z, z - U


def ou_energy(trace: PursuitTrace) -> float:
    """``int (z' + z/2)**2 ds`` from the trace, by differences on its knots.

    Equals ``int_1^T h'(t)**2 dt`` after the change of variables.
    """
    s, _, z, _ = ou_coordinates(trace)
    ds = np.diff(s)
    dz = np.diff(z) / ds
    zm = 0.5 * (z[1:] + z[:-1])
    return float(np.sum((dz + 0.5 * zm) ** 2 * ds))


def _gap_kernel(b, z0, tau_max, dt, seed, noise, record_every, max_depth, max_change):
    np.random.seed(seed)
    nsteps = int(round(tau_max / dt))
    nrec = nsteps // record_every + 1
    rec_s = np.empty(nrec)
    rec_u = np.empty(nrec)
    rec_z = np.empty(nrec)
    rec_e = np.empty(nrec)
    stack_h = np.empty(max_depth + 2)
    stack_w = np.empty(max_depth + 2)
    stack_l = np.empty(max_depth + 2, dtype=np.int64)
    z = z0
    u = 0.0
    en = 0.0
    rec_s[0] = 0.0
    rec_u[0] = u
    rec_z[0] = z
    rec_e[0] = en
    j = 1
    sq = math.sqrt(dt)
    splits = 0
    for i in range(nsteps):
        dw = sq * np.random.standard_normal() if noise else 0.0
        top = 0
        stack_h[0] = dt
        stack_w[0] = dw
        stack_l[0] = 0
        while top >= 0:
            hh = stack_h[top]
            ww = stack_w[top]
            lvl = stack_l[top]
            top -= 1
            bz = b(z)
            zn = z + bz * hh - ww
            if not zn > 0.0 or abs(zn - z) > max_change * z:
                if lvl >= max_depth:
                    return rec_s[:j], rec_u[:j], rec_z[:j], rec_e[:j], 1, splits, i * dt
                # Brownian bridge split of the increment over two halves
                w1 = 0.5 * ww
                if noise:
                    w1 += 0.5 * math.sqrt(hh) * np.random.standard_normal()
                top += 1
                stack_h[top] = 0.5 * hh
                stack_w[top] = ww - w1
                stack_l[top] = lvl + 1
                top += 1
                stack_h[top] = 0.5 * hh
                stack_w[top] = w1
                stack_l[top] = lvl + 1
                splits += 1
                continue
            en += (bz + 0.5 * z) ** 2 * hh
            u += -0.5 * u * hh + ww
            z = zn
        if (i + 1) % record_every == 0:
            rec_s[j] = (i + 1) * dt
            rec_u[j] = u
            rec_z[j] = z
            rec_e[j] = en
            j += 1
    return rec_s[:j], rec_u[:j], rec_z[:j], rec_e[:j], 0, splits, tau_max


_gap_kernel_jit = njit(cache=True)(_gap_kernel)


def simulate_gap_diffusion(drift: StrategyDrift | None, z0: float, tau_max: float, dt: float, seed,
                           noise: bool = True, record_every: int = 1) -> PursuitTrace:
    """Euler-Maruyama run of ``dZ = b(Z) ds - dW~`` in OU time ``s``.

    A step whose proposal leaves ``(0, inf)`` or moves ``Z`` by more than 25%
    is split in two with a Brownian-bridge draw of the midpoint increment.
    Every ``record_every``-th step is kept.  The OU process ``U`` driven by
    the same noise is carried along (starting at 0) so that ``z = Z + U``.
    """
    drift = optimal_drift() if drift is None else drift
    if not z0 > 0:
        raise PreconditionError("initial gap must be positive")
    if not (dt > 0 and tau_max > 0):
        raise ConfigurationError("dt and tau_max must be positive")
    if record_every < 1:
        raise ConfigurationError("record_every must be >= 1")
    if isinstance(seed, (int, np.integer)):
        seed = np.random.SeedSequence(int(seed))
    s32 = int(make_rng(seed).integers(0, 2**32 - 1))
    kernel = _gap_kernel_jit if drift.compiled else _gap_kernel
    s, u, z, e, status, splits, t_fail = kernel(
        drift.b, float(z0), float(tau_max), float(dt), s32, bool(noise), int(record_every),
        MAX_HALVINGS, MAX_GAP_CHANGE,
    )
    if status:
        raise IntegrationError(f"gap diffusion could not keep Z > 0 near s = {t_fail:.6g}")
    return PursuitTrace(s, u, z + u, z, e, int(splits))


@dataclass(frozen=True)
class StationaryDensity:
    """Normalised ``exp(B(x)) / Q`` on ``(0, inf)``."""

    drift: StrategyDrift
    log_p0: Callable
    normalizer: float
    x_max: float
    _grid: np.ndarray
    _cdf: np.ndarray

    def B(self, x):
        return self.log_p0(x)

    def p0(self, x):
        return np.exp(self.log_p0(x))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(self.log_p0(x[pos])) / self.normalizer
        return out if out.ndim else float(out)

    __call__ = pdf

    def cdf(self, x):
        out = np.interp(x, self._grid, self._cdf, left=0.0, right=1.0)
        return out if np.ndim(out) else float(out)


def _numeric_log_p0(drift: StrategyDrift):
    b = drift.b

    def log_p0(x):
        def one(xi):
            if xi <= 0:
                return -np.inf
            # 2 * int_1^x b, with u = log(y) so both ends are smooth
            val, _ = integrate.quad(lambda v: b(math.exp(v)) * math.exp(v), 0.0, math.log(xi), limit=200)
            return 2.0 * val

        x = np.asarray(x, dtype=float)
        out = np.vectorize(one, otypes=[float])(x)
        return out if out.ndim else float(out)

    return log_p0


def _log_p0_for(drift):
    return drift.log_p0 if drift.log_p0 is not None else _numeric_log_p0(drift)


def entrance_boundary_check(drift: StrategyDrift):
    """Probe whether ``int_0 dx / p0(x)`` diverges, i.e. 0 is not an exit boundary.

    Evaluates ``I(eps) = int_eps^1 dx / p0`` for ``eps = 1e-2, 1e-4, ..., 1e-10``.
    Returns ``True`` when the increments between successive probes do not
    shrink (growth at least logarithmic), ``False`` when they fall below 1e-6
    (Cauchy convergence) and ``None`` when neither pattern is clear.
    """
    log_p0 = _log_p0_for(drift)

    def integrand(v):
        return math.exp(v - float(log_p0(math.exp(v))))

    eps = [10.0**-k for k in (2, 4, 6, 8, 10)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        vals = [integrate.quad(integrand, math.log(e), 0.0, limit=200)[0] for e in eps]
    d = np.diff(vals)
    if abs(d[-1]) < 1e-6:
        return False
    if np.all(d > 0) and np.all(d[1:] >= 0.5 * d[:-1]):
        return True
    return None


def stationary_density(drift: StrategyDrift | None = None, table_points: int = 20001) -> StationaryDensity:
    """Stationary law ``p = exp(B)/Q`` of the gap diffusion."""
    drift = optimal_drift() if drift is None else drift
    if entrance_boundary_check(drift) is not True:
        raise PreconditionError("0 is not an entrance boundary for this drift")
    log_p0 = _log_p0_for(drift)

    def p0(x):
        return math.exp(float(log_p0(x))) if x > 0 else 0.0

    # integrability probe on growing windows
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        masses = []
        for X in (10.0, 100.0, 1000.0):
            pts = [p for p in (1.0, 5.0, 20.0, 100.0) if p < X]
            masses.append(integrate.quad(p0, 0.0, X, points=pts, limit=400, epsabs=0.0, epsrel=1e-13)[0])
    if not np.all(np.isfinite(masses)) or masses[-1] - masses[-2] > 1e-9 * max(masses[-1], 1.0):
        raise NoStationaryDensityError(f"exp(B) is not integrable for drift {drift.name!r}")
    Q = masses[-1]

    # right end of the CDF table where the remaining mass is negligible
    x_max = 1.0
    while x_max < 1000.0 and integrate.quad(p0, x_max, 1000.0, limit=200)[0] > 1e-14 * Q:
        x_max *= 1.25
    grid = np.linspace(0.0, x_max, table_points)
    dens = np.zeros_like(grid)
    dens[1:] = np.exp(log_p0(grid[1:])) / Q
    cdf = integrate.cumulative_simpson(dens, x=grid, initial=0.0)
    cdf = np.clip(cdf / cdf[-1], 0.0, 1.0)
    return StationaryDensity(drift, log_p0, float(Q), float(x_max), grid, cdf)


def energy_rate(drift: StrategyDrift | None = None) -> float:
    """``E b_tilde(Z)**2`` under the stationary law: the energy per unit of ``log T``."""
    dens = stationary_density(drift)
    bt = dens.drift.b_tilde
    val, _ = integrate.quad(lambda x: bt(x) ** 2 * dens.pdf(x), 0.0, dens.x_max, limit=400)
    return float(val)


def _pursuit_replication(args):
    seed, grid, r, T = args
    times = cached_times(grid, tuple(T))
    path = sample_wiener(times, seed)
    trace = simulate_pursuit(path, r)
    idx = np.searchsorted(times, T)
    return trace.cumulative_energy[idx]


@dataclass
class AdaptiveSlopeReport:
    points: list
    fit: LogFit | None
    control_fit: LogFit | None


def adaptive_energy_slope_experiment(T_list, r: float, replications: int, master_seed: int,
                                     point_count: int = 2**20, first_cell: float = 1e-4,
                                     mapper=map) -> AdaptiveSlopeReport:
    """Mean energy of the optimal pursuit at each ``T`` and its slope in ``log T``.

    The control fit regresses the noiseless energy ``log(1 + 2T/r**2)/2`` on
    the same ``T`` values.
    """
    T = np.array(sorted(float(x) for x in T_list))
    if T.size == 0:
        return AdaptiveSlopeReport([], None, None)
    if not r > 0:
        raise ConfigurationError("r must be positive")
    grid = GridSpec.geometric(T[-1], point_count, first_cell * r * r)
    jobs = ((replication_seed(master_seed, k), grid, float(r), T) for k in range(replications))
    energies = np.array(list(mapper(_pursuit_replication, jobs))).reshape(-1, T.size)
    points = [PointStats.from_samples("T", Ti, energies[:, i]) for i, Ti in enumerate(T)]
    fit = None
    if replications and T.size >= 3:
        fit = fit_log_slope(np.column_stack((T, energies.mean(axis=0))))
    control = None
    if T.size >= 3:
        control = fit_log_slope(np.column_stack((T, 0.5 * np.log1p(2.0 * T / r**2))))
    return AdaptiveSlopeReport(points, fit, control)
