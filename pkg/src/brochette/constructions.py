"""Executable versions of the comparison paths used to bound geodesic heights.

Each builder compares a height-constrained optimal path (``Gamma^1``) with an
explicit detour (``Gamma^2``) that reaches above the constraint. Whenever the
detour is no slower, every geodesic must exceed the constraint, so
``comparison_event`` is a certified lower-bound witness for ``H_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geodesic import (
    BoxPolicy,
    constrained_optimum,
    dijkstra,
    path_height,
    path_time,
)
from .lattice import Box, ball_cardinality

__all__ = [
    "DegenerateInput",
    "DiscAnnulusSpec",
    "ConstructionReport",
    "RhoTrace",
    "build_detour_a_positive",
    "build_detour_a_zero",
    "rho_trace",
    "wandering_exponent",
]


class DegenerateInput(ValueError):
    """The requested construction has an empty region at this (n, epsilon)."""


def wandering_exponent(beta: float, dim: int) -> float:
    """beta / (beta + d - 1), the height exponent when the infimum is positive."""
    return beta / (beta + dim - 1)


def _ceil(x: float) -> int:
    # Guard against 2.0000000000000004-style rounding pushing a radius up by one.
    return math.ceil(x - 1e-9)


def _transversal_points(dim: int, r: int) -> np.ndarray:
    """All points of Z^(d-1) with l1 norm <= r, lexicographic, shape (m, d-1)."""
    axes = [np.arange(-r, r + 1)] * (dim - 1)
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return grid[np.abs(grid).sum(axis=1) <= r]


@dataclass(frozen=True)
class DiscAnnulusSpec:
    """Transversal disc D(x) and annulus A(x) in the hyperplane y_1 = x_1.

    Radii are ``ceil(epsilon n^xi)`` and ``ceil(sqrt(epsilon) n^xi)`` with
    ``xi = beta / (beta + d - 1)``.
    """

    n: int
    epsilon: float
    dim: int
    beta: float
    center: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.center is None:
            object.__setattr__(self, "center", (0,) * self.dim)

    @property
    def scale(self) -> float:
        return self.n ** wandering_exponent(self.beta, self.dim)

    @property
    def radius_inner(self) -> int:
        return _ceil(self.epsilon * self.scale)

    @property
    def radius_outer(self) -> int:
        return _ceil(math.sqrt(self.epsilon) * self.scale)

    @property
    def degenerate(self) -> bool:
        return self.radius_inner >= self.radius_outer

    def _offset(self, y) -> Optional[int]:
        if y[0] != self.center[0]:
            return None
        return sum(abs(a - b) for a, b in zip(y[1:], self.center[1:]))

    def in_disc(self, y) -> bool:
        r = self._offset(y)
        return r is not None and r <= self.radius_inner

    def in_annulus(self, y) -> bool:
        r = self._offset(y)
        return r is not None and self.radius_inner < r <= self.radius_outer

    def disc_offsets(self) -> np.ndarray:
        return _transversal_points(self.dim, self.radius_inner)

    def annulus_offsets(self) -> np.ndarray:
        pts = _transversal_points(self.dim, self.radius_outer)
        return pts[np.abs(pts).sum(axis=1) > self.radius_inner]


@dataclass
class ConstructionReport:
    """Comparison of the constrained optimum with the detour path."""

    n: int
    epsilon: float
    height_bound: int
    T_gamma1: float
    T_gamma2: float
    detour_line_min: float
    inner_min: float
    height_gamma1: int
    height_gamma2: int
    comparison_event: bool
    crossing_costs: Optional[tuple[float, float]] = None
    proof_bound: Optional[float] = None
    bound_applies: bool = False
    box: Optional[Box] = None
    anchors: dict = field(default_factory=dict)
    gamma2: Optional[list] = field(default=None, repr=False)

    @property
    def measured_gap(self) -> float:
        return self.T_gamma2 - self.T_gamma1

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "height_bound": self.height_bound,
            "T_gamma1": self.T_gamma1,
            "T_gamma2": self.T_gamma2,
            "measured_gap": self.measured_gap,
            "detour_line_min": self.detour_line_min,
            "inner_min": self.inner_min,
            "crossing_costs": list(self.crossing_costs) if self.crossing_costs else None,
            "proof_bound": self.proof_bound,
            "bound_applies": self.bound_applies,
            "height_gamma1": self.height_gamma1,
            "height_gamma2": self.height_gamma2,
            "comparison_event": self.comparison_event,
            "anchors": {k: list(v) if isinstance(v, tuple) else v for k, v in self.anchors.items()},
        }


def _e1_line_times(env, offsets: np.ndarray) -> np.ndarray:
    return np.asarray(env.line_times(1, [offsets[:, j] for j in range(offsets.shape[1])]), dtype=float)


def build_detour_a_positive(
    env,
    n: int,
    epsilon: float,
    box: Optional[Box] = None,
    policy: Optional[BoxPolicy] = None,
) -> ConstructionReport:
    """Detour through the cheapest e_1-line of the annulus A(0), for a > 0.

    Gamma^2 = geodesic 0 -> m, straight m -> m + n e_1, geodesic back to n e_1,
    where m minimises the e_1-line time over the annulus. Gamma^1 is the
    optimum among paths of height at most the inner radius.
    """
    if env.infimum <= 0:
        raise ValueError("build_detour_a_positive needs a positive infimum")
    d = env.dim
    beta = env.dist.beta
    spec = DiscAnnulusSpec(n, epsilon, d, beta)
    annulus = spec.annulus_offsets()
    if spec.degenerate or len(annulus) == 0:
        raise DegenerateInput(f"annulus empty at n={n}, epsilon={epsilon}")
    disc = spec.disc_offsets()
    rho = float(_e1_line_times(env, disc).min())
    ann_times = _e1_line_times(env, annulus)
    j = int(np.argmin(ann_times))  # first minimum = lexicographic tie-break
    sigma = float(ann_times[j])
    m = (0,) + tuple(int(c) for c in annulus[j])
    m_far = (n,) + m[1:]
    target = (n,) + (0,) * (d - 1)

    if box is None:
        h = max((policy or BoxPolicy()).initial_half_width(env, n), spec.radius_outer + 1)
        box = Box.around(n, h, d)
    if not (box.contains(m) and box.contains(m_far)):
        raise ValueError("box does not contain the annulus")

    t1, path1 = constrained_optimum(env, n, spec.radius_inner, box=box)
    out = dijkstra(env, box, (0,) * d, [m], parents=True)
    back = dijkstra(env, box, target, [m_far], parents=True)
    g1 = out.path_to(m)
    g3 = list(reversed(back.path_to(m_far)))
    g2 = [(x,) + m[1:] for x in range(n + 1)]
    gamma2 = g1 + g2[1:] + g3[1:]
    t2 = path_time(env, gamma2)
    return ConstructionReport(
        n=n,
        epsilon=epsilon,
        height_bound=spec.radius_inner,
        T_gamma1=t1,
        T_gamma2=t2,
        detour_line_min=sigma,
        inner_min=rho,
        height_gamma1=path_height(path1),
        height_gamma2=path_height(gamma2),
        comparison_event=t2 <= t1,
        box=box,
        anchors={"m": m, "radius_inner": spec.radius_inner, "radius_outer": spec.radius_outer},
        gamma2=gamma2,
    )


def build_detour_a_zero(env, n: int, epsilon: float, box: Optional[Box] = None) -> ConstructionReport:
    """Splice of the constrained optimum onto a cheap high horizontal line, a = 0, d = 2.

    Gamma^1 is followed to its first visit of the column x_1, climbs to the
    cheapest horizontal line of the strip ``(floor(eps n), floor(sqrt(eps) n)]``,
    runs to column x_2, descends to Gamma^1's last visit of that column and
    follows Gamma^1 to n e_1. x_1 and x_2 are the cheapest vertical lines in
    ``[0, n/3]`` and ``[2n/3, n]``.
    """
    if env.dim != 2:
        raise ValueError("build_detour_a_zero is defined for d = 2")
    if env.infimum != 0:
        raise ValueError("build_detour_a_zero needs a zero infimum")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    k_in = math.floor(epsilon * n)
    k_out = math.floor(math.sqrt(epsilon) * n)
    if k_in >= k_out:
        raise DegenerateInput(f"strip ({k_in}, {k_out}] is empty at n={n}, epsilon={epsilon}")

    inner = np.arange(-k_in, k_in + 1)
    strip = np.arange(k_in + 1, k_out + 1)
    left = np.arange(0, n // 3 + 1)
    right = np.arange(-(-2 * n // 3), n + 1)
    rho = float(env.line_times(1, [inner]).min())
    strip_t = env.line_times(1, [strip])
    left_t = env.line_times(2, [left])
    right_t = env.line_times(2, [right])
    y_n = int(strip[np.argmin(strip_t)])
    x1 = int(left[np.argmin(left_t)])
    x2 = int(right[np.argmin(right_t)])
    sigma = float(strip_t.min())
    mu = float(left_t.min())
    nu = float(right_t.min())

    if box is None:
        h = max(n, k_out + 1)
        box = Box.around(n, h, 2)
    if box.hi[1] < y_n:
        raise ValueError("box does not reach the detour line")

    _, path1 = constrained_optimum(env, n, k_in, box=box)
    xs = [v[0] for v in path1]
    i1 = xs.index(x1)
    i2 = len(xs) - 1 - xs[::-1].index(x2)
    ya = path1[i1][1]
    yb = path1[i2][1]
    up = [(x1, y) for y in range(ya, y_n + 1)]
    across = [(x, y_n) for x in range(x1, x2 + 1)]
    down = [(x2, y) for y in range(y_n, yb - 1, -1)]
    gamma2 = path1[: i1 + 1] + up[1:] + across[1:] + down[1:] + path1[i2 + 1 :]
    t1 = path_time(env, path1)
    t2 = path_time(env, gamma2)
    bound = (n / 3) * (sigma - rho) + (epsilon + math.sqrt(epsilon)) * n * (mu + nu)
    return ConstructionReport(
        n=n,
        epsilon=epsilon,
        height_bound=k_in,
        T_gamma1=t1,
        T_gamma2=t2,
        detour_line_min=sigma,
        inner_min=rho,
        height_gamma1=path_height(path1),
        height_gamma2=path_height(gamma2),
        comparison_event=t2 <= t1,
        crossing_costs=(mu, nu),
        proof_bound=bound,
        bound_applies=sigma < rho,
        box=box,
        anchors={"x1": (x1, 0), "x2": (x2, 0), "y": (0, y_n)},
        gamma2=gamma2,
    )


@dataclass
class RhoTrace:
    """Running minimum of edge times over growing l1 balls, and T(0, boundary of B(i)).

    ``N[i-1]`` is the smallest time of an edge with both endpoints in B(i).
    ``renewal_times`` are the indices i with N_{i+1} < N_i.
    """

    dim: int
    radii: np.ndarray
    N: np.ndarray
    renewal_times: list[int]
    boundary_T: np.ndarray
    new_lines: list[int]
    line_counts: list[int]

    @property
    def new_lines_per_step(self) -> int:
        return 2 * self.dim * (self.dim - 1)

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "radii": self.radii.tolist(),
            "N": self.N.tolist(),
            "renewal_times": self.renewal_times,
            "boundary_T": self.boundary_T.tolist(),
            "new_lines": self.new_lines,
            "new_lines_per_step": self.new_lines_per_step,
        }


def rho_trace(env, R: int) -> RhoTrace:
    """N_i, renewal indices and T(0, boundary of B(i)) for i = 1..R."""
    if R < 1:
        raise ValueError("R must be at least 1")
    d = env.dim
    N = np.empty(R)
    new_lines = []
    line_counts = []
    running = math.inf
    for i in range(1, R + 1):
        # Lines with an edge inside B(i) have transversal norm <= i - 1; the
        # ones entering at step i sit exactly at norm i - 1.
        shell = _transversal_points(d, i - 1)
        shell = shell[np.abs(shell).sum(axis=1) == i - 1]
        for axis in range(1, d + 1):
            times = env.line_times(axis, [shell[:, j] for j in range(d - 1)])
            running = min(running, float(np.min(times)))
        N[i - 1] = running
        new_lines.append(d * len(shell))
        line_counts.append(d * ball_cardinality(d - 1, i - 1))
    renewals = [i for i in range(1, R) if N[i] < N[i - 1]]

    box = Box.cube(R, d)
    norms = np.abs(box.coords(np.arange(box.size))).sum(axis=1)
    sphere = (norms == R).astype(np.uint8)
    f = dijkstra(env, box, (0,) * d, stop="any", target_mask=sphere)
    inside = norms <= R
    bT = np.full(R + 1, np.inf)
    np.minimum.at(bT, norms[inside], f.dist[inside])
    return RhoTrace(
        dim=d,
        radii=np.arange(1, R + 1),
        N=N,
        renewal_times=renewals,
        boundary_T=bT[1:],
        new_lines=new_lines,
        line_counts=line_counts,
    )
