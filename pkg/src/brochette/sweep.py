"""Monte Carlo orchestration: replicate sweeps, exponent fits, sanity checks.

Replicate ``r`` at size ``n`` always uses the environment seed
``mix_seed(master_seed, n, r)``, so adding replicates or grid points never
changes existing rows, and results do not depend on scheduling.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence, TextIO

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_from_header, header_lines
from .constructions import (
    DegenerateInput,
    DiscAnnulusSpec,
    build_detour_a_positive,
    build_detour_a_zero,
    rho_trace,
    wandering_exponent,
)
from .env import Constant, mix_seed
from .geodesic import BoxCapExceeded, max_height_geodesic
from .lattice import Box
from .stats import Ecdf, WeibullLaw, fit_exponent, ks_distance, medians_by_n, scaled_min_sample, slope_bounds

THREADS_ENV = "BROCHETTE_THREADS"


def resolve_threads(flag: Optional[int], cfg: Optional[ExperimentConfig] = None) -> int:
    """--threads flag, then $BROCHETTE_THREADS, then the config, then the CPU count."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if cfg is not None and cfg.threads:
        return cfg.threads
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """``[fn(x) for x in items]`` on a thread pool; result order follows ``items``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def replicate_seed(cfg: ExperimentConfig, n: int, rep: int) -> int:
    return mix_seed(cfg.master_seed, n, rep)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRecord:
    """One replicate. ``cap_exceeded`` rows keep ``T_lower <= T(0, n e_1) <= T``
    from the largest box tried, with heights unknown (-1)."""

    n: int
    replicate: int
    T: float
    H_max: int
    H_min: int
    half_width: int
    touched_boundary: bool
    status: str = "ok"
    wall_time: float = 0.0
    T_lower: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def T_bounds(self) -> tuple[float, float]:
        """Interval holding the unrestricted T: a point for ok rows."""
        if self.ok:
            return self.T, self.T
        if self.status == "cap_exceeded" and math.isfinite(self.T):
            return self.T_lower, self.T
        return 0.0, math.inf


CSV_FIELDS = ["n", "replicate", "T", "T_lower", "H_max", "H_min", "half_width", "touched_boundary", "status"]


def run_replicate(cfg: ExperimentConfig, n: int, rep: int) -> SweepRecord:
    env = cfg.environment(replicate_seed(cfg, n, rep))
    t0 = time.perf_counter()
    try:
        res = max_height_geodesic(env, n, cfg.box, cfg.tie_tolerance, certify=cfg.certify)
    except BoxCapExceeded as exc:
        p = exc.partial
        if p is None:
            return SweepRecord(n, rep, math.nan, -1, -1, -1, True, "cap_exceeded", time.perf_counter() - t0)
        return SweepRecord(
            n, rep, float(p.T), -1, -1, int(p.half_width), bool(p.touched_boundary), "cap_exceeded",
            time.perf_counter() - t0, float(p.T_lower),
        )
    except Exception as exc:  # a failed row is reported, not fatal to the sweep
        return SweepRecord(n, rep, math.nan, -1, -1, -1, False, f"error:{type(exc).__name__}", time.perf_counter() - t0)
    return SweepRecord(
        n=n,
        replicate=rep,
        T=float(res.T),
        H_max=int(res.H_max),
        H_min=int(res.H_min),
        half_width=int(res.half_width),
        touched_boundary=bool(res.touched_boundary),
        wall_time=time.perf_counter() - t0,
        T_lower=float(res.T_lower),
    )


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[SweepRecord]:
    tasks = [(n, r) for n in sorted(cfg.n_grid) for r in range(cfg.replicates)]
    rows = parallel_map(lambda t: run_replicate(cfg, *t), tasks, threads)
    return sorted(rows, key=lambda rec: (rec.n, rec.replicate))


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_records(records: Iterable[SweepRecord], fh: TextIO, cfg: ExperimentConfig, timings: bool = False) -> None:
    """CSV with a '#' provenance header. ``timings`` adds the non-deterministic wall_time column."""
    for line in header_lines(cfg, __version__):
        fh.write(line + "\n")
    cols = CSV_FIELDS + (["wall_time"] if timings else [])
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for rec in records:
        row = asdict(rec)
        w.writerow([_cell(row[c]) for c in cols])


def read_records(path: str) -> tuple[Optional[ExperimentConfig], list[SweepRecord]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    cfg = config_from_header(lines)
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.DictReader(body)
    missing = set(CSV_FIELDS) - set(reader.fieldnames or [])
    if missing:
        raise ConfigError(f"malformed sweep CSV {path}: missing columns {sorted(missing)}")
    out = []
    try:
        for row in reader:
            out.append(
                SweepRecord(
                    n=int(row["n"]),
                    replicate=int(row["replicate"]),
                    T=float(row["T"]),
                    T_lower=float(row["T_lower"]),
                    H_max=int(row["H_max"]),
                    H_min=int(row["H_min"]),
                    half_width=int(row["half_width"]),
                    touched_boundary=row["touched_boundary"] == "1",
                    status=row["status"],
                    wall_time=float(row.get("wall_time") or 0.0),
                )
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed sweep CSV {path}: {exc}") from exc
    return cfg, out


# ---------------------------------------------------------------------------
# exponents


def target_exponent(cfg: ExperimentConfig) -> Optional[float]:
    """Predicted height exponent, or None where no prediction is available."""
    dist = cfg.distribution
    if dist.infimum > 0:
        return wandering_exponent(dist.beta, cfg.dim) if math.isfinite(dist.beta) else 0.0
    if cfg.dim == 2:
        return 1.0
    return None


def height_medians(records: Sequence[SweepRecord]) -> tuple[list, list]:
    """Median H_max per n with unknown heights (failed rows) set to 0 and to +inf."""
    rows = [r for r in records if r.n > 0]
    lo = medians_by_n((r.n, r.H_max if r.ok else 0) for r in rows)
    hi = medians_by_n((r.n, r.H_max if r.ok else math.inf) for r in rows)
    return lo, hi


def mean_times(records: Sequence[SweepRecord]) -> tuple[list, list]:
    """Mean T per n using the lower and the upper end of every row's T interval."""
    groups: dict[int, list[tuple[float, float]]] = {}
    for r in records:
        groups.setdefault(r.n, []).append(r.T_bounds)
    lo = [(n, float(np.mean([b[0] for b in groups[n]]))) for n in sorted(groups)]
    hi = [(n, float(np.mean([b[1] for b in groups[n]]))) for n in sorted(groups)]
    return lo, hi


def _within(bounds: tuple[float, float], target: float, tol: float) -> bool:
    return bool(abs(bounds[0] - target) <= tol and abs(bounds[1] - target) <= tol)


def exponent_report(records: Sequence[SweepRecord], cfg: ExperimentConfig, tolerance: Optional[float] = None) -> dict:
    """Median-H_max slope over ok rows, plus the slope range once failed rows may hold any height."""
    good = [r for r in records if r.ok and r.n > 0]
    pairs = medians_by_n((r.n, r.H_max) for r in good)
    fit = fit_exponent(pairs)
    bounds = slope_bounds(*height_medians(records))
    target = target_exponent(cfg)
    tol = cfg.checks.exponent_tolerance if tolerance is None else tolerance
    return {
        "slope": fit.slope,
        "slope_range": list(bounds),
        "stderr": fit.stderr_slope,
        "r_squared": fit.r_squared,
        "target_exponent": target,
        "tolerance": tol,
        "pass": None if target is None else _within(bounds, target, tol),
        "medians": [[n, v] for n, v in pairs],
        "failed_rows": sum(1 for r in records if not r.ok),
    }


# ---------------------------------------------------------------------------
# checks


def _check(name: str, value, target, tolerance, passed, **extra) -> dict:
    out = {"name": name, "value": value, "target": target, "tolerance": tolerance, "pass": passed}
    out.update(extra)
    return out


def time_constant_check(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Median T(0, n e_1)/n at the largest grid point against the infimum."""
    n = max(cfg.n_grid)
    reps = cfg.checks.time_constant_reps
    a = cfg.distribution.infimum
    tol = cfg.checks.time_constant_tolerance
    if n == 0:
        return _check("time_constant", None, a, tol, None, note="largest n is 0")
    rows = parallel_map(lambda r: run_replicate(cfg, n, r), list(range(reps)), threads)
    bounds = np.array([r.T_bounds for r in rows]) / n
    med = float(np.median(bounds[:, 1]))
    med_lo = float(np.median(bounds[:, 0]))
    # Every edge costs at least a, so T/n >= a holds exactly.
    passed = bool(a <= med_lo and med <= a * (1 + tol)) if a > 0 else bool(med <= tol)
    return _check(
        "time_constant", med, a, tol, passed, n=n, replicates=reps,
        min_excess=float(bounds[:, 0].min() - a), failed_rows=sum(1 for r in rows if not r.ok),
    )


def weibull_check(cfg: ExperimentConfig) -> dict:
    dist = cfg.distribution
    c = cfg.checks
    if isinstance(dist, Constant):
        return _check("weibull_minimum", None, 0.0, c.ks_tolerance, None, note="constant law")
    sample = scaled_min_sample(dist, c.weibull_m, c.weibull_reps, seed=cfg.master_seed)
    ks = ks_distance(Ecdf.of(sample), WeibullLaw(dist.beta))
    return _check("weibull_minimum", ks, 0.0, c.ks_tolerance, bool(ks < c.ks_tolerance), m=c.weibull_m, reps=c.weibull_reps)


def mean_time_check(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """log E[T(0, n e_1)] against log n; target 1 - 1/beta for a = 0, beta > 1."""
    dist = cfg.distribution
    c = cfg.checks
    if dist.infimum != 0 or not (1 < dist.beta < math.inf):
        return _check("mean_time_exponent", None, None, c.mean_time_tolerance, None, note="needs a = 0 and 1 < beta < inf")
    target = 1.0 - 1.0 / dist.beta
    tasks = [(n, r) for n in c.mean_time_grid for r in range(c.mean_time_reps)]
    rows = parallel_map(lambda t: run_replicate(cfg, *t), tasks, threads)
    lo, hi = mean_times(rows)
    fit = fit_exponent(hi)
    bounds = slope_bounds(lo, hi)
    return _check(
        "mean_time_exponent", fit.slope, target, c.mean_time_tolerance,
        _within(bounds, target, c.mean_time_tolerance), means=[list(p) for p in hi],
        slope_range=list(bounds), failed_rows=sum(1 for r in rows if not r.ok),
    )


def rho_summary(cfg: ExperimentConfig, threads: int = 1, seeds: Optional[int] = None, radii: Optional[Sequence[int]] = None) -> dict:
    """Median T(0, boundary of B(r)) per radius over seeds, with growth per step.

    Passes when the last step grows by < 5% (plateau, expected for beta < 1)
    or by > 20% (divergence, expected for beta > 1), matching the regime
    predicted by beta; at beta = 1 or a > 0 only divergence counts.
    """
    seeds = cfg.checks.rho_seeds if seeds is None else seeds
    radii = sorted(cfg.checks.rho_radii if radii is None else radii)
    R = radii[-1]
    idx = np.asarray(radii) - 1

    def one(s):
        env = cfg.environment(mix_seed(cfg.master_seed, R, s))
        return rho_trace(env, R).boundary_T[idx]

    table = np.array(parallel_map(one, list(range(seeds)), threads))
    med = np.median(table, axis=0)
    growth = (med[1:] / med[:-1] - 1.0).tolist()
    dist = cfg.distribution
    last = growth[-1] if growth else None
    if last is None:
        passed, regime = None, None
    elif dist.infimum == 0 and dist.beta < 1:
        passed, regime = bool(last < 0.05), "plateau"
    else:
        passed, regime = bool(last > 0.20), "divergence"
    return _check("rho_trace", last, regime, None, passed, radii=list(radii), median_T=med.tolist(), growth=growth, seeds=seeds)


def run_checks(cfg: ExperimentConfig, threads: int = 1) -> dict:
    checks = [
        time_constant_check(cfg, threads),
        weibull_check(cfg),
        mean_time_check(cfg, threads),
        rho_summary(cfg, threads),
    ]
    return {"checks": checks, "pass": all(c["pass"] is not False for c in checks)}


# ---------------------------------------------------------------------------
# single runs


def geodesic_document(cfg: ExperimentConfig, n: int, seed: Optional[int] = None) -> dict:
    env = cfg.environment(seed)
    res = max_height_geodesic(env, n, cfg.box, cfg.tie_tolerance, with_path=True, certify=cfg.certify)
    out = res.as_dict()
    out["seed"] = env.master_seed
    return out


def detour_instance(cfg: ExperimentConfig, n: int, rep: int, epsilon: Optional[float] = None) -> dict:
    """One detour construction plus an independent H_max on the same environment.

    ``violation`` is True when the comparison event holds but the measured
    H_max does not exceed the constraint height; it must never happen.
    """
    eps = cfg.checks.epsilon if epsilon is None else epsilon
    env = cfg.environment(replicate_seed(cfg, n, rep))
    res = max_height_geodesic(env, n, cfg.box, cfg.tie_tolerance, certify=cfg.certify)
    try:
        if env.infimum > 0:
            need = DiscAnnulusSpec(n, eps, env.dim, env.dist.beta).radius_outer + 1
            box = Box.around(n, max(res.half_width, need), env.dim)
            rep_ = build_detour_a_positive(env, n, eps, box=box)
        else:
            need = math.floor(math.sqrt(eps) * n) + 1
            box = Box.around(n, max(res.half_width, need), env.dim)
            rep_ = build_detour_a_zero(env, n, eps, box=box)
    except DegenerateInput as exc:
        return {"n": n, "replicate": rep, "status": "degenerate", "note": str(exc)}
    doc = rep_.as_dict()
    doc.update(
        replicate=rep,
        status="ok",
        H_max=res.H_max,
        T=res.T,
        violation=bool(rep_.comparison_event and res.H_max <= rep_.height_bound),
    )
    return doc
