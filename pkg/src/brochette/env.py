"""Passage-time environments for Brochette first-passage percolation.

Every axis-parallel integer line of Z^d carries one random passage time,
shared by all of its edges. Times are produced by a counter-based hash of
``(master_seed, line)`` so that any window of the lattice can be sampled
independently, in any order, and always agrees with every other window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "LineId",
    "ShiftedWeibull",
    "BoundedPower",
    "Constant",
    "Distribution",
    "Environment",
    "LineTable",
    "line_of_edge",
    "tau",
    "edge_time",
    "hash_keys",
    "uniform_from_hash",
    "mix_seed",
    "distribution_from_spec",
]

_M64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)

# Domain tags keep line keys, edge keys and derived seeds in separate hash streams.
_TAG_LINE = 0x4C494E45
_TAG_EDGE = 0x45444745
_TAG_SEED = 0x53454544


def _fmix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps modulo 2**64.
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def hash_keys(seed: int, tag: int, components: Sequence[np.ndarray | int]) -> np.ndarray:
    """Hash integer key tuples to uint64, vectorised over broadcastable components."""
    arrays = [np.asarray(c, dtype=np.int64) for c in components]
    shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
    with np.errstate(over="ignore"):
        h = np.full(shape, (seed + tag * 0x9E3779B97F4A7C15) & _M64, dtype=np.uint64)
        h = _fmix(h)
        for a in arrays:
            h = _fmix((h ^ a.astype(np.uint64)) + _GOLDEN)
    return h


def uniform_from_hash(h: np.ndarray) -> np.ndarray:
    """Map uint64 hashes to bin midpoints (k + 1/2) / 2^52, strictly inside (0, 1).

    52 bits rather than 53: (2^53 - 1/2) / 2^53 is not a double and rounds to 1.
    """
    return ((h >> np.uint64(12)).astype(np.float64) + 0.5) * (1.0 / 4503599627370496.0)


def mix_seed(master_seed: int, *parts: int) -> int:
    """Derive a child seed from a master seed and integer labels.

    Used for per-replicate seeds ``mix_seed(master, n, replicate)``: a child
    depends only on its own labels, so adding replicates never changes
    existing ones.
    """
    return int(hash_keys(master_seed, _TAG_SEED, list(parts))[()])


# ---------------------------------------------------------------------------
# Lines


@dataclass(frozen=True, order=True)
class LineId:
    """An axis-parallel integer line: 1-based ``axis`` plus the other coordinates."""

    axis: int
    transversal: tuple[int, ...]

    def __post_init__(self):
        if self.axis < 1 or self.axis > len(self.transversal) + 1:
            raise ValueError(f"axis {self.axis} out of range for dimension {len(self.transversal) + 1}")

    @property
    def dim(self) -> int:
        return len(self.transversal) + 1


def line_of_edge(u: Sequence[int], v: Sequence[int]) -> LineId:
    """Return the integer line containing the lattice edge ``{u, v}``."""
    if len(u) != len(v):
        raise ValueError("vertices of different dimension")
    diff = [i for i, (a, b) in enumerate(zip(u, v)) if a != b]
    if len(diff) != 1 or abs(u[diff[0]] - v[diff[0]]) != 1:
        raise ValueError(f"{tuple(u)} and {tuple(v)} are not lattice neighbours")
    k = diff[0]
    return LineId(k + 1, tuple(int(c) for i, c in enumerate(u) if i != k))


# ---------------------------------------------------------------------------
# Distributions


@dataclass(frozen=True)
class ShiftedWeibull:
    """F(t) = 1 - exp(-((t - a) / lambda)^beta) for t >= a."""

    a: float = 1.0
    beta: float = 1.0
    lam: float = 1.0
    family = "shifted_weibull"

    def __post_init__(self):
        if self.a < 0 or self.beta <= 0 or self.lam <= 0:
            raise ValueError(f"invalid ShiftedWeibull parameters {self}")

    @property
    def infimum(self) -> float:
        return self.a

    @property
    def c(self) -> float:
        return self.lam ** (-self.beta)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        z = np.clip(t - self.a, 0.0, None) / self.lam
        return -np.expm1(-(z**self.beta))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self.a + self.lam * (-np.log1p(-u)) ** (1.0 / self.beta)

    def to_spec(self) -> dict:
        return {"family": self.family, "a": self.a, "beta": self.beta, "lambda": self.lam}


@dataclass(frozen=True)
class BoundedPower:
    """F(t) = (t / b)^beta on [0, b]; infimum 0, bounded support."""

    b: float = 1.0
    beta: float = 2.0
    family = "bounded_power"

    def __post_init__(self):
        if self.b <= 0 or self.beta <= 0:
            raise ValueError(f"invalid BoundedPower parameters {self}")

    @property
    def infimum(self) -> float:
        return 0.0

    @property
    def c(self) -> float:
        return self.b ** (-self.beta)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip(t / self.b, 0.0, 1.0) ** self.beta

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self.b * u ** (1.0 / self.beta)

    def to_spec(self) -> dict:
        return {"family": self.family, "b": self.b, "beta": self.beta}


@dataclass(frozen=True)
class Constant:
    """Degenerate law at ``value``; a debugging aid with no randomness."""

    value: float = 1.0
    family = "constant"

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("constant passage time must be positive")

    @property
    def infimum(self) -> float:
        return self.value

    @property
    def beta(self) -> float:
        return math.inf

    def cdf(self, t):
        return (np.asarray(t, dtype=float) >= self.value).astype(float)

    def quantile(self, u):
        return np.full(np.shape(u), self.value, dtype=float)

    def to_spec(self) -> dict:
        return {"family": self.family, "value": self.value}


Distribution = Union[ShiftedWeibull, BoundedPower, Constant]


def distribution_from_spec(spec: Mapping[str, object]) -> Distribution:
    """Build a distribution from a ``{family, a|b, beta, lambda}`` mapping."""
    family = str(spec.get("family", "")).strip().lower().replace("-", "_")
    try:
        if family in ("shifted_weibull", "weibull"):
            return ShiftedWeibull(
                a=float(spec.get("a", 1.0)),
                beta=float(spec.get("beta", 1.0)),
                lam=float(spec.get("lambda", spec.get("lam", 1.0))),
            )
        if family in ("bounded_power", "power"):
            return BoundedPower(b=float(spec.get("b", 1.0)), beta=float(spec.get("beta", 2.0)))
        if family == "constant":
            return Constant(value=float(spec.get("value", spec.get("a", 1.0))))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad distribution parameters {dict(spec)}: {exc}") from None
    raise ValueError(f"unknown distribution family {family!r}")


# ---------------------------------------------------------------------------
# Environments


@dataclass(frozen=True)
class Environment:
    """Immutable random environment: a pure map from lines (or edges) to times.

    ``mode="brochette"`` shares one time per integer line. ``mode="iid"`` is the
    classical model, one independent time per edge, kept for baseline runs.
    """

    dim: int
    dist: Distribution
    master_seed: int = 0
    mode: str = "brochette"

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")
        if self.mode not in ("brochette", "iid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.master_seed <= _M64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")

    @property
    def infimum(self) -> float:
        return self.dist.infimum

    @property
    def per_edge(self) -> bool:
        return self.mode == "iid"

    def line_times(self, axis: int, transversal: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorised ``tau`` for lines along 1-based ``axis`` at the given transversal coords."""
        h = hash_keys(self.master_seed, _TAG_LINE, [axis, *transversal])
        return self.dist.quantile(uniform_from_hash(h))

    def edge_times(self, axis: int, lower: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorised iid-mode times for edges ``{x, x + e_axis}`` keyed by lower endpoint ``x``."""
        h = hash_keys(self.master_seed, _TAG_EDGE, [axis, *lower])
        return self.dist.quantile(uniform_from_hash(h))


def tau(env: Environment, line: LineId) -> float:
    """Passage time of one integer line."""
    if line.dim != env.dim:
        raise ValueError(f"line of dimension {line.dim} in a {env.dim}-dimensional environment")
    return float(env.line_times(line.axis, list(line.transversal))[()])


def edge_time(env, u: Sequence[int], v: Sequence[int]) -> float:
    """Passage time of the edge ``{u, v}``; symmetric in its arguments."""
    line = line_of_edge(u, v)
    if isinstance(env, LineTable):
        return env.time_of(line)
    if env.per_edge:
        lower = tuple(min(a, b) for a, b in zip(u, v))
        return float(env.edge_times(line.axis, list(lower))[()])
    return tau(env, line)


@dataclass(frozen=True)
class LineTable:
    """Hand-set Brochette environment: explicit line times with a default.

    Used for exact small-scale checks and hand-worked examples; it exposes the
    same vectorised ``line_times`` hook as :class:`Environment`.
    """

    dim: int
    times: Mapping[LineId, float] = field(default_factory=dict)
    default: float = 1.0

    per_edge = False

    @classmethod
    def from_pairs(cls, dim: int, pairs: Iterable[tuple[int, Sequence[int], float]], default: float = 1.0):
        """Build from ``(axis, transversal, time)`` triples."""
        return cls(dim, {LineId(ax, tuple(tr)): float(t) for ax, tr, t in pairs}, default)

    @property
    def infimum(self) -> float:
        return min([self.default, *self.times.values()])

    def time_of(self, line: LineId) -> float:
        return float(self.times.get(line, self.default))

    def line_times(self, axis: int, transversal: Sequence[np.ndarray]) -> np.ndarray:
        arrays = np.broadcast_arrays(*[np.asarray(t, dtype=np.int64) for t in transversal])
        out = np.full(arrays[0].shape if arrays else (), self.default, dtype=float)
        flat = [a.ravel() for a in arrays]
        res = out.ravel()
        for i in range(res.size):
            key = LineId(axis, tuple(int(a[i]) for a in flat))
            res[i] = self.times.get(key, self.default)
        return res.reshape(out.shape)
