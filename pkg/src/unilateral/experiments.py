"""Seeded experiment runner and JSON / CSV reports.

Each experiment is a function of an :class:`ExperimentConfig`.  Replication
``k`` always draws from ``replication_seed(master_seed, k)``, so a report is
reproducible bit for bit whatever the worker count.  Only the JSON report
carries the wall-clock time; the CSV is a pure function of the config.

Finite Monte Carlo runs certify mean-level behaviour (slopes of mean energy
in ``log T``, frequencies, distributional fits), not the almost-sure pathwise
limits themselves.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .groeneboom import (
    HORIZON_FACTOR,
    TRUNCATION_ZONE,
    majorant_energy_between,
    q_cdf,
    slln_experiment,
    tau_samples,
    tau_sandwich_experiment,
)
from .majorant import (
    PolylineFunction,
    concave_majorant,
    optimal_unilateral_majorant,
    prefix_optimal_energies,
    tangent_from_point,
)
from .oscillator import (
    DensityCandidate,
    GridFunction,
    hermite_psi,
    j_functional,
    optimal_candidate,
    oscillator_eigenvalue,
    quadratic_form_G,
    random_admissible_function,
    rayleigh_quotient,
    solve_sturm_liouville,
)
from .paths import GridSpec, brownian_scaling, cached_times, make_rng, replication_seed, sample_wiener
from .pursuit import adaptive_energy_slope_experiment, simulate_gap_diffusion, stationary_density
from .stats import PointStats, fit_log_slope, ks_statistic, ks_two_sample

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "main-theorem",
    "mcm-energy",
    "slln",
    "tau-sandwich",
    "tau-ks",
    "adaptive-slope",
    "stationary-fit",
    "oscillator",
    "variational",
)

_DEFAULTS = {
    "main-theorem": dict(replications=200, T_list=[2.0**k for k in range(10, 25)], grid_points=2**22, first_cell=1e-4),
    "mcm-energy": dict(replications=200, T_list=[2.0**k for k in range(4, 17)], grid_points=2**20, first_cell=1e-4),
    "slln": dict(replications=10_000, V_list=[math.e**k for k in (1, 2, 3, 4)], grid_points=100_000),
    "tau-sandwich": dict(replications=2000, T_list=[1e1, 1e2, 1e3, 1e4, 1e5, 1e6], grid_points=40_000),
    "tau-ks": dict(replications=2000, grid_points=20_000),
    "adaptive-slope": dict(replications=200, T_list=[2.0**k for k in range(10, 21)], grid_points=2**20, first_cell=1e-4),
    "stationary-fit": dict(replications=1),
    "oscillator": dict(replications=1),
    "variational": dict(replications=100),
}


@dataclass
class ExperimentConfig:
    """Parameters of one experiment run; ``None`` fields take per-experiment defaults."""

    experiment: str
    master_seed: int = 20240601
    replications: int | None = None
    T_list: list | None = None
    V_list: list | None = None
    delta: float = 0.25
    r: float = 1.0
    grid_points: int | None = None
    first_cell: float | None = None
    tau_max: float = 1e4
    dt: float = 1e-3
    burn_in: float = 100.0
    cutoff: float = 14.0
    fd_cells: int = 8000
    eigen_count: int = 3
    workers: int = 1
    out: str | None = None

    def resolved(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        cfg = dataclasses.replace(self)
        for key, value in _DEFAULTS[self.experiment].items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, value)
        cfg.validate()
        return cfg

    def validate(self):
        if self.replications is not None and (int(self.replications) != self.replications or self.replications < 0):
            raise ConfigurationError("replications must be a non-negative integer")
        for name in ("T_list", "V_list"):
            vals = getattr(self, name)
            if vals is not None:
                if any(not (v > 1 and math.isfinite(v)) for v in vals):
                    raise ConfigurationError(f"{name} entries must be finite and > 1")
                if any(b <= a for a, b in zip(vals, vals[1:])):
                    raise ConfigurationError(f"{name} must be strictly increasing")
        if not 0 < self.delta < 0.5:
            raise ConfigurationError("delta must lie in (0, 1/2)")
        if not self.r > 0:
            raise ConfigurationError("r must be positive")
        if self.grid_points is not None and self.grid_points < 3:
            raise ConfigurationError("grid_points must be >= 3")
        if self.first_cell is not None and not self.first_cell > 0:
            raise ConfigurationError("first_cell must be positive")
        if not (self.tau_max > self.burn_in >= 0 and self.dt > 0):
            raise ConfigurationError("need tau_max > burn_in >= 0 and dt > 0")
        if not (self.cutoff > 0 and self.fd_cells >= 10 and 1 <= self.eigen_count <= 6):
            raise ConfigurationError("oscillator parameters out of range")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    points: list = field(default_factory=list)
    fit: dict | None = None
    ks: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    censored_rate: float | None = None
    notes: str = ""
    wall_clock_seconds: float = 0.0
    version: str = __version__

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "experiment": self.experiment,
            "config": self.config,
            "points": [_point_dict(p) for p in self.points],
            "fit": self.fit,
            "ks": self.ks,
            "scalars": {k: _json_float(v) for k, v in self.scalars.items()},
            "censored_rate": self.censored_rate,
            "notes": self.notes,
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, allow_nan=False)

    def csv_rows(self):
        yield ("experiment", "parameter", "point", "statistic", "value")
        e = self.experiment
        for p in self.points:
            for stat in ("mean", "std", "count", "censored_rate"):
                yield (e, p.parameter, _fmt(p.point), stat, _fmt(getattr(p, stat)))
            for key, value in p.extra.items():
                yield (e, p.parameter, _fmt(p.point), key, _fmt(value))
        if self.fit:
            for key, value in self.fit.items():
                yield (e, "fit", "", key, _fmt(value))
        for key, value in self.ks.items():
            yield (e, "ks", "", key, _fmt(value))
        for key, value in self.scalars.items():
            yield (e, "scalar", "", key, _fmt(value))
        if self.censored_rate is not None:
            yield (e, "censoring", "", "censored_rate", _fmt(self.censored_rate))

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        return buf.getvalue()

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath = out / f"{self.experiment}.json"
        cpath = out / f"{self.experiment}.csv"
        jpath.write_text(self.to_json() + "\n")
        cpath.write_text(self.to_csv())
        return jpath, cpath


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_float(v):
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return str(float(v))
    if isinstance(v, np.floating):
        return float(v)
    return v


def _point_dict(p: PointStats) -> dict:
    d = {
        "parameter": p.parameter,
        "point": p.point,
        "mean": p.mean,
        "std": p.std,
        "count": p.count,
        "censored_rate": p.censored_rate,
    }
    d.update({k: _json_float(v) for k, v in p.extra.items()})
    return d


def _fit_dict(fit) -> dict | None:
    return None if fit is None else {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}


def _mean_fit(points) -> dict | None:
    pts = [(p.point, p.mean) for p in points if p.count]
    if len(pts) < 3:
        return None
    return _fit_dict(fit_log_slope(pts))


class _Mapper:
    """``map`` over replications, optionally in a process pool (order preserved)."""

    def __init__(self, workers: int):
        self.workers = workers
        self.pool = None

    def __enter__(self):
        if self.workers > 1:
            self.pool = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()

    def __call__(self, fn, jobs):
        if self.pool is None:
            return map(fn, jobs)
        return self.pool.map(fn, jobs, chunksize=16)


# -- unilateral minimal energy ----------------------------------------------------------


def _main_theorem_replication(args):
    seed, grid, T, r, scaling_check = args
    times = cached_times(grid, tuple(T))
    path = sample_wiener(times, seed)
    fine = prefix_optimal_energies(path, r, T)
    coarse = prefix_optimal_energies(path.subsample(2, keep=T), r, T)
    scaled = None
    if scaling_check:
        # same path mapped to [0, 1] with start height r / sqrt(T)
        scaled = np.array([
            optimal_unilateral_majorant(brownian_scaling(path.restrict(Ti), Ti), r / math.sqrt(Ti)).energy
            for Ti in T
        ])
    return fine, coarse, scaled


def run_main_theorem(cfg: ExperimentConfig, mapper) -> ExperimentReport:
    T = np.asarray(cfg.T_list, dtype=float)
    grid = GridSpec.geometric(T[-1], cfg.grid_points, cfg.first_cell)
    n_check = min(cfg.replications, 10)
    jobs = ((replication_seed(cfg.master_seed, k), grid, T, cfg.r, k < n_check) for k in range(cfg.replications))
    res = list(mapper(_main_theorem_replication, jobs))
    fine = np.array([x[0] for x in res]).reshape(-1, T.size)
    coarse = np.array([x[1] for x in res]).reshape(-1, T.size)
    points = [
        PointStats.from_samples(
            "T", Ti, fine[:, i],
            coarse_mean=float(coarse[:, i].mean()) if len(res) else None,
            ratio_to_log=float(fine[:, i].mean() / math.log(Ti)) if len(res) else None,
        )
        for i, Ti in enumerate(T)
    ]
    rep = ExperimentReport("main-theorem", cfg.to_dict(), points, _mean_fit(points))
    if len(res) and T.size >= 3:
        rep.scalars["coarse_grid_slope"] = fit_log_slope(np.column_stack((T, coarse.mean(axis=0)))).slope
        rep.scalars["grid_points"] = int(cached_times(grid, tuple(T)).size)
        rep.scalars["coarse_grid_points"] = int((cached_times(grid, tuple(T)).size + 1) // 2)
        scaled = np.array([x[2] for x in res[:n_check]])
        rep.scalars["scaling_route_slope"] = fit_log_slope(np.column_stack((T, scaled.mean(axis=0)))).slope
        rep.scalars["direct_route_slope_same_paths"] = fit_log_slope(
            np.column_stack((T, fine[:n_check].mean(axis=0)))).slope
    rep.notes = ("I_W(T, r) = energy of the optimal unilateral majorant on [0, T]; slope of mean vs log T. "
                 "This certifies the mean-level slope, not the pathwise almost-sure limit.")
    return rep


def global_majorant_from_height(path, r: float):
    """Global concave majorant from height ``r`` on the simulated horizon.

    Tangent line from ``(0, r)`` followed by the full hull.  ``None`` when the
    path never rises above ``r`` within the horizon.
    """
    hull = concave_majorant(path)
    tangent = tangent_from_point(hull, r)
    if tangent is None:
        return None
    slope, touch = tangent
    k = int(np.searchsorted(hull.times, touch))
    return PolylineFunction(np.vstack(([[0.0, r]], hull.knots[k:])), concave=True)


def _mcm_replication(args):
    seed, grid, T, r = args
    path = sample_wiener(cached_times(grid, tuple(T)), seed)
    chi = global_majorant_from_height(path, r)
    if chi is None:
        return np.full(T.size, np.nan), True
    # the part of the majorant on [0, T] is final only if the next vertex is well inside the horizon
    nxt = chi.times[min(np.searchsorted(chi.times, T[-1]), chi.times.size - 1)]
    cens = nxt > (1.0 - TRUNCATION_ZONE) * path.horizon
    return np.array([majorant_energy_between(chi, 0.0, Ti) for Ti in T]), bool(cens)


def run_mcm_energy(cfg, mapper):
    T = np.asarray(cfg.T_list, dtype=float)
    grid = GridSpec.geometric(HORIZON_FACTOR * T[-1], cfg.grid_points, cfg.first_cell)
    jobs = ((replication_seed(cfg.master_seed, k), grid, T, cfg.r) for k in range(cfg.replications))
    res = list(mapper(_mcm_replication, jobs))
    e = np.array([x[0] for x in res]).reshape(-1, T.size)
    ok = ~np.isnan(e).any(axis=1)
    cens = float(np.mean([x[1] for x in res])) if res else 0.0
    points = [PointStats.from_samples("T", Ti, e[ok, i], cens) for i, Ti in enumerate(T)]
    rep = ExperimentReport("mcm-energy", cfg.to_dict(), points, _mean_fit(points), censored_rate=cens)
    rep.notes = "Energy on [0, T] of the global concave majorant started at height r."
    return rep


# -- majorant statistics ----------------------------------------------------------------


def run_slln(cfg, mapper):
    points = slln_experiment(cfg.V_list, cfg.replications, cfg.master_seed, cfg.grid_points, mapper=mapper)
    cens = points[0].censored_rate if points else None
    rep = ExperimentReport("slln", cfg.to_dict(), points, censored_rate=cens)
    rep.notes = "Statistic L(1, V) / log V; its mean is 1 for every V."
    return rep


def run_tau_sandwich(cfg, mapper):
    points = tau_sandwich_experiment(cfg.T_list, cfg.delta, cfg.replications, cfg.master_seed, cfg.grid_points,
                                     mapper=mapper)
    cens = points[0].censored_rate if points else None
    rep = ExperimentReport("tau-sandwich", cfg.to_dict(), points, censored_rate=cens)
    rep.notes = ("Frequency of tau(T^(1/2+delta)) > T > tau(T^(1/2-delta)); "
                 "exact_frequency_bound = 1 - q_cdf(T^(-2 delta)) caps it.")
    return rep


def run_tau_ks(cfg, mapper):
    a_values = (0.5, 1.0, 2.0)
    samples, cens = {}, []
    for i, a in enumerate(a_values):
        s, c = tau_samples(a, cfg.replications, cfg.master_seed, cfg.grid_points, stream=i, mapper=mapper)
        samples[a] = s
        cens.append(c)
    points = [PointStats.from_samples("a", a, samples[a], cens[i]) for i, a in enumerate(a_values)]
    rep = ExperimentReport("tau-ks", cfg.to_dict(), points, censored_rate=max(cens))
    if cfg.replications:
        rep.ks = {
            "tau1_vs_q_cdf": ks_statistic(samples[1.0], q_cdf),
            "a0.5_vs_a1": ks_two_sample(samples[0.5], samples[1.0]),
            "a2_vs_a1": ks_two_sample(samples[2.0], samples[1.0]),
            "a0.5_vs_a2": ks_two_sample(samples[0.5], samples[2.0]),
        }
    rep.notes = "Samples of tau(a)/a^2 compared with the density q and across a."
    return rep


# -- adaptive pursuit -------------------------------------------------------------------


def run_adaptive_slope(cfg, mapper):
    res = adaptive_energy_slope_experiment(cfg.T_list, cfg.r, cfg.replications, cfg.master_seed, cfg.grid_points,
                                           cfg.first_cell, mapper=mapper)
    rep = ExperimentReport("adaptive-slope", cfg.to_dict(), res.points, _fit_dict(res.fit))
    if res.control_fit is not None:
        rep.scalars["control_slope"] = res.control_fit.slope
    rep.notes = "Mean energy of h' = 1/(h - W) vs log T; control is the noiseless energy log(1 + 2T/r^2)/2."
    return rep


def run_stationary_fit(cfg, mapper):
    rep = ExperimentReport("stationary-fit", cfg.to_dict())
    if cfg.replications == 0:
        return rep
    thin = 100
    trace = simulate_gap_diffusion(None, math.sqrt(2.0), cfg.tau_max, cfg.dt, replication_seed(cfg.master_seed, 0),
                                   record_every=thin)
    z = trace.gap[trace.times > cfg.burn_in]
    ks_sample = z[::10]
    dens = stationary_density()
    rep.points = [PointStats.from_samples("moment", 2.0, z**2)]
    rep.ks = {"gap_vs_stationary": ks_statistic(ks_sample, dens.cdf), "ks_sample_size": int(ks_sample.size)}
    rep.scalars = {
        "mean_Z2": float(np.mean(z**2)),
        "energy_rate": float((trace.cumulative_energy[-1] - np.interp(cfg.burn_in, trace.times,
                                                                      trace.cumulative_energy))
                             / (cfg.tau_max - cfg.burn_in)),
        "bridge_splits": trace.substeps,
    }
    rep.notes = "Gap diffusion dZ = (1/Z - Z/2) ds - dW after burn-in, thinned."
    return rep


# -- variational problem ----------------------------------------------------------------


def run_oscillator(cfg, mapper):
    sol = solve_sturm_liouville(cfg.cutoff, cfg.fd_cells, cfg.eigen_count)
    with warnings.catch_warnings():
        # the half-resolution run exists only for the convergence ratio
        warnings.simplefilter("ignore", UserWarning)
        half = solve_sturm_liouville(cfg.cutoff, cfg.fd_cells // 2, 1)
    points = []
    for j, lam in enumerate(sol.eigenvalues):
        k = 2 * j + 1
        points.append(PointStats("k", k, float(lam), 0.0, 1, extra={"exact": oscillator_eigenvalue(k),
                                                                     "error": float(lam - oscillator_eigenvalue(k))}))
    rep = ExperimentReport("oscillator", cfg.to_dict(), points)
    rep.scalars = {
        "gamma1": float(sol.eigenvalues[0]),
        "psi1_max_error": float(np.abs(sol.eigenvectors[0] - hermite_psi(1, sol.x)).max()),
        "gamma1_error_half_grid": float(half.eigenvalues[0] - 6.0),
        "convergence_ratio": float((half.eigenvalues[0] - 6.0) / (sol.eigenvalues[0] - 6.0)),
    }
    rep.notes = "Finite differences for -4y'' + x^2 y = gamma y, y(0) = 0 on [0, L]."
    return rep


def run_variational(cfg, mapper):
    x = np.linspace(0.0, cfg.cutoff, 40001)
    psi1 = GridFunction.sample(lambda s: hermite_psi(1, s), x)
    psi3 = GridFunction.sample(lambda s: hermite_psi(3, s), x)
    rng = make_rng(replication_seed(cfg.master_seed, 0))
    rq = [rayleigh_quotient(random_admissible_function(rng, x)) for _ in range(cfg.replications)]
    rep = ExperimentReport("variational", cfg.to_dict())
    rep.scalars = {
        "J_optimal": j_functional(optimal_candidate()),
        "J_x2_exp": j_functional(DensityCandidate(lambda s: 0.5 * s * s * np.exp(-s))),
        "J_x_exp": j_functional(DensityCandidate(lambda s: s * np.exp(-s))),
        "G_psi1_psi1": quadratic_form_G(psi1, psi1),
        "G_psi1_psi3": quadratic_form_G(psi1, psi3),
        "G_psi3_psi3": quadratic_form_G(psi3, psi3),
        "min_rayleigh_random": min(rq) if rq else None,
    }
    rep.notes = "J(p) and the form G; the minimum over admissible functions is 6."
    return rep


_RUNNERS = {
    "main-theorem": run_main_theorem,
    "mcm-energy": run_mcm_energy,
    "slln": run_slln,
    "tau-sandwich": run_tau_sandwich,
    "tau-ks": run_tau_ks,
    "adaptive-slope": run_adaptive_slope,
    "stationary-fit": run_stationary_fit,
    "oscillator": run_oscillator,
    "variational": run_variational,
}


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run ``config`` and, if it names an output directory, write JSON and CSV there."""
    cfg = config.resolved()
    log.info("running %s with %s replications", cfg.experiment, cfg.replications)
    start = time.perf_counter()
    with _Mapper(cfg.workers) as mapper:
        report = _RUNNERS[cfg.experiment](cfg, mapper)
    report.wall_clock_seconds = time.perf_counter() - start
    if write and cfg.out:
        try:
            report.write(cfg.out)
        except OSError as exc:
            raise ConfigurationError(f"cannot write report to {cfg.out}: {exc}") from exc
    return report
