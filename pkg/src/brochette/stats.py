"""Empirical CDFs, Kolmogorov-Smirnov distance to Weibull laws, and log-log fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _sps

from .env import Environment

__all__ = [
    "Ecdf",
    "ExponentFit",
    "WeibullLaw",
    "weibull_cdf",
    "ks_distance",
    "scaled_min_sample",
    "fit_exponent",
    "slope_bounds",
    "medians_by_n",
    "dkw_epsilon",
]


@dataclass(frozen=True)
class Ecdf:
    values: np.ndarray

    @classmethod
    def of(cls, sample: Iterable[float]) -> "Ecdf":
        v = np.sort(np.asarray(list(sample) if not isinstance(sample, np.ndarray) else sample, dtype=float))
        return cls(v)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __call__(self, t):
        return np.searchsorted(self.values, t, side="right") / self.size


@dataclass(frozen=True)
class WeibullLaw:
    """Weibull law of shape ``beta`` and scale 1: CDF 1 - exp(-t^beta)."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def cdf(self, t):
        return weibull_cdf(self.beta, t)


def weibull_cdf(beta: float, t):
    if not beta > 0:
        raise ValueError("beta must be positive")
    t = np.asarray(t, dtype=float)
    out = -np.expm1(-(np.clip(t, 0.0, None) ** beta))
    out = np.where(t > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def ks_distance(sample: Ecdf, law: WeibullLaw) -> float:
    """sup_t |ECDF(t) - CDF(t)|, evaluated on both sides of every jump."""
    if sample.size == 0:
        raise ValueError("empty sample")
    m = sample.size
    cdf = law.cdf(sample.values)
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max(), 0.0))


def scaled_min_sample(
    dist,
    m_lines: int,
    reps: int,
    seed: int = 0,
    chunk: int = 200,
) -> np.ndarray:
    """``m^(1/beta) (min of m iid draws - a)`` for ``reps`` replicates.

    Draws go through the environment's line sampler: replicate r uses the
    e_1-lines with transversal coordinates ``r * m_lines + j``.
    """
    if m_lines < 1 or reps < 1:
        raise ValueError("m_lines and reps must be positive")
    env = Environment(2, dist, seed)
    out = np.empty(reps)
    scale = m_lines ** (1.0 / dist.beta)
    for r0 in range(0, reps, chunk):
        r1 = min(reps, r0 + chunk)
        keys = np.arange(r0 * m_lines, r1 * m_lines, dtype=np.int64)
        vals = env.line_times(1, [keys]).reshape(r1 - r0, m_lines)
        out[r0:r1] = scale * (vals.min(axis=1) - dist.infimum)
    return out


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    stderr_slope: float
    r_squared: float
    points: tuple

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr_slope": self.stderr_slope,
            "r_squared": self.r_squared,
            "points": [list(p) for p in self.points],
        }


def fit_exponent(pairs: Sequence[tuple[float, float]]) -> ExponentFit:
    """Ordinary least squares of log(value) on log(n)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 (n, value) pairs")
    ns = [p[0] for p in pairs]
    if len(set(ns)) != len(ns):
        raise ValueError("duplicate n in exponent fit")
    if any(p[1] <= 0 for p in pairs) or any(n <= 0 for n in ns):
        raise ValueError("exponent fit needs positive n and values")
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray([p[1] for p in pairs], dtype=float))
    res = _sps.linregress(x, y)
    r2 = res.rvalue**2 if np.isfinite(res.rvalue) else 1.0
    return ExponentFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        stderr_slope=float(res.stderr),
        r_squared=float(r2),
        points=tuple((float(a), float(b)) for a, b in zip(x, y)),
    )


def slope_bounds(lower: Sequence[tuple[float, float]], upper: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Smallest and largest log-log OLS slope when each value lies in [lower, upper].

    The slope is linear in the log values, so each extreme takes every value at
    one end of its interval. Zero lower or infinite upper values give infinite slopes.
    """
    ns = [p[0] for p in lower]
    if ns != [p[0] for p in upper]:
        raise ValueError("lower and upper pairs must share their n")
    if len(ns) < 3 or len(set(ns)) != len(ns) or any(n <= 0 for n in ns):
        raise ValueError("need at least 3 distinct positive n")
    lo = np.array([p[1] for p in lower], dtype=float)
    hi = np.array([p[1] for p in upper], dtype=float)
    if np.any(lo < 0) or np.any(lo > hi):
        raise ValueError("need 0 <= lower <= upper")
    x = np.log(np.asarray(ns, dtype=float))
    c = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    with np.errstate(divide="ignore"):
        ylo, yhi = np.log(lo), np.log(hi)
    pos = c > 0
    neg = c < 0
    smin = np.sum(c[pos] * ylo[pos]) + np.sum(c[neg] * yhi[neg])
    smax = np.sum(c[pos] * yhi[pos]) + np.sum(c[neg] * ylo[neg])
    return float(smin), float(smax)


def medians_by_n(rows: Iterable[tuple[int, float]]) -> list[tuple[int, float]]:
    """Median value per n, sorted by n."""
    groups: dict[int, list[float]] = {}
    for n, v in rows:
        groups.setdefault(int(n), []).append(float(v))
    return [(n, float(np.median(groups[n]))) for n in sorted(groups)]


def dkw_epsilon(m: int, alpha: float) -> float:
    """Radius with P(KS > radius) <= alpha under the DKW inequality."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))
