"""Lattice geometry: boxes, l1 balls, neighbour iteration and heights."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "Box",
    "L1Ball",
    "height",
    "neighbors",
    "ball_cardinality",
    "ball_constant",
    "sphere_cardinality",
    "boundary_vertices",
    "l1_sphere",
]

Vertex = tuple[int, ...]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of lattice vertices with inclusive bounds ``lo``..``hi``.

    Vertices are indexed row-major (last axis fastest).
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo}..{self.hi}")
        object.__setattr__(self, "lo", tuple(int(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(int(c) for c in self.hi))
        if self.size >= 2**62:
            raise ValueError("box too large to index")

    @classmethod
    def around(cls, n: int, h: int, dim: int) -> "Box":
        """Box ``[-h, n + h] x [-h, h]^(d-1)`` enclosing the segment from 0 to n e_1."""
        return cls((-h,) + (-h,) * (dim - 1), (n + h,) + (h,) * (dim - 1))

    @classmethod
    def cube(cls, r: int, dim: int) -> "Box":
        return cls((-r,) * dim, (r,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @cached_property
    def strides(self) -> tuple[int, ...]:
        s = [1] * self.dim
        for k in range(self.dim - 2, -1, -1):
            s[k] = s[k + 1] * self.shape[k + 1]
        return tuple(s)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.dim and all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def index(self, x: Sequence[int]) -> int:
        if not self.contains(x):
            raise ValueError(f"vertex {tuple(x)} outside box {self.lo}..{self.hi}")
        return sum((c - a) * s for c, a, s in zip(x, self.lo, self.strides))

    def vertex(self, idx: int) -> Vertex:
        out = []
        for a, s, m in zip(self.lo, self.strides, self.shape):
            out.append(a + (idx // s) % m)
        return tuple(int(c) for c in out)

    def coords(self, idx: np.ndarray) -> np.ndarray:
        """Absolute coordinates of an index array, shape ``(len(idx), d)``."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty((idx.size, self.dim), dtype=np.int64)
        for k, (a, s, m) in enumerate(zip(self.lo, self.strides, self.shape)):
            out[:, k] = a + (idx // s) % m
        return out

    def on_boundary(self, x: Sequence[int]) -> bool:
        return any(c == a or c == b for a, c, b in zip(self.lo, x, self.hi))

    def axis_ranges(self) -> list[np.ndarray]:
        return [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(self.lo, self.hi)]

    def vertices(self):
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))


@dataclass(frozen=True)
class L1Ball:
    center: tuple[int, ...]
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    def contains(self, x: Sequence[int]) -> bool:
        return sum(abs(a - b) for a, b in zip(x, self.center)) <= self.radius


def height(x: Sequence[int]) -> int:
    """Transversal l1 distance of ``x`` from the e_1 axis."""
    return int(sum(abs(int(c)) for c in x[1:]))


def neighbors(x: Sequence[int], box: Box) -> list[Vertex]:
    """Lattice neighbours of ``x`` inside ``box``, axis-major, minus before plus."""
    if not box.contains(x):
        raise ValueError(f"vertex {tuple(x)} outside box")
    out = []
    for k in range(box.dim):
        for step in (-1, 1):
            y = list(x)
            y[k] += step
            if box.lo[k] <= y[k] <= box.hi[k]:
                out.append(tuple(y))
    return out


def sphere_cardinality(d: int, n: int) -> int:
    """Number of points of Z^d with l1 norm exactly n."""
    if n < 0:
        return 0
    if n == 0:
        return 1
    # Choose k non-zero coordinates with signs, split n into k positive parts.
    return sum(math.comb(d, k) * 2**k * math.comb(n - 1, k - 1) for k in range(1, min(d, n) + 1))


def ball_cardinality(d: int, n: int) -> int:
    """Number of points of Z^d with l1 norm at most n (a Delannoy number)."""
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    return sum(math.comb(d, k) * math.comb(n, k) * 2**k for k in range(0, min(d, n) + 1))


def ball_constant(d: int) -> float:
    """Leading constant 2^d / d! of the ball cardinality."""
    return 2.0**d / math.factorial(d)


def l1_sphere(d: int, r: int) -> list[Vertex]:
    """All points of Z^d with l1 norm exactly ``r``, in lexicographic order."""
    if r == 0:
        return [(0,) * d]
    if d == 1:
        return [(-r,), (r,)]
    out = []
    for first in range(-r, r + 1):
        for rest in l1_sphere(d - 1, r - abs(first)):
            out.append((first,) + rest)
    return out


def boundary_vertices(ball: L1Ball) -> list[Vertex]:
    """Members of the ball with a lattice neighbour outside it (the l1 sphere)."""
    if ball.radius < 1:
        raise ValueError("radius must be at least 1")
    d = len(ball.center)
    return [tuple(c + o for c, o in zip(ball.center, p)) for p in l1_sphere(d, ball.radius)]
