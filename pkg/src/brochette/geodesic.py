"""Box-restricted passage times, geodesic DAGs and geodesic heights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .lattice import Box, height, l1_sphere

__all__ = [
    "BoxPolicy",
    "BoxCapExceeded",
    "GeodesicCycleError",
    "UnreachableTarget",
    "DistanceField",
    "GeodesicDag",
    "GeodesicResult",
    "weight_table",
    "dijkstra",
    "geodesic_dag",
    "geodesic_heights",
    "representative_path",
    "max_height_geodesic",
    "exit_certificate",
    "constrained_optimum",
    "boundary_passage_time",
    "path_time",
    "path_height",
]

DEFAULT_TIE_TOLERANCE = 1e-9


class GeodesicCycleError(RuntimeError):
    """The tie-tolerant geodesic edge set contains a directed cycle."""


class BoxCapExceeded(RuntimeError):
    """Adaptive boxing needed a box above the configured cap.

    ``partial`` is the uncertified result from the largest box tried, if any.
    Its ``T`` and ``T_lower`` bracket the unrestricted passage time. Its
    heights describe that box only: a cheaper route may leave through the
    ends of the box at any height.
    """

    def __init__(self, needed: int, cap: int, what: str = "half-width", partial: Optional["GeodesicResult"] = None):
        super().__init__(f"box {what} {needed} exceeds cap {cap}; raise the cap")
        self.needed = needed
        self.cap = cap
        self.partial = partial


class UnreachableTarget(RuntimeError):
    pass


def weight_table(env, box: Box) -> tuple[np.ndarray, np.ndarray, bool]:
    """Pack the times of every line (or edge) meeting ``box`` into one array.

    Returns ``(w, off, per_edge)`` in the layout expected by the kernels.
    """
    ranges = box.axis_ranges()
    per_edge = bool(getattr(env, "per_edge", False))
    parts = []
    for k in range(box.dim):
        if per_edge:
            grids = np.meshgrid(*ranges, indexing="ij")
            parts.append(np.ascontiguousarray(env.edge_times(k + 1, [g.ravel() for g in grids]), dtype=float))
        else:
            others = [r for i, r in enumerate(ranges) if i != k]
            grids = np.meshgrid(*others, indexing="ij")
            parts.append(np.ascontiguousarray(env.line_times(k + 1, [g.ravel() for g in grids]), dtype=float).ravel())
    off = np.zeros(box.dim, dtype=np.int64)
    for k in range(1, box.dim):
        off[k] = off[k - 1] + parts[k - 1].size
    return np.concatenate(parts), off, per_edge


def _index_dtype(box: Box):
    return np.int32 if box.size < 2**31 - 1 else np.int64


@dataclass
class DistanceField:
    """Box-restricted passage times from ``source``; +inf where not settled."""

    box: Box
    source: tuple[int, ...]
    dist: np.ndarray
    parent: Optional[np.ndarray] = None
    settled: int = 0

    def __getitem__(self, x: Sequence[int]) -> float:
        return float(self.dist[self.box.index(x)])

    def path_to(self, x: Sequence[int]) -> list[tuple[int, ...]]:
        """Parent-pointer path from the source to ``x``."""
        if self.parent is None:
            raise ValueError("distance field was computed without parents")
        i = self.box.index(x)
        if not math.isfinite(self.dist[i]):
            raise UnreachableTarget(f"{tuple(x)} not reached")
        out = [i]
        while self.parent[i] >= 0:
            i = int(self.parent[i])
            out.append(i)
        return [self.box.vertex(j) for j in reversed(out)]


def dijkstra(
    env,
    box: Box,
    source: Sequence[int],
    targets: Optional[Iterable[Sequence[int]]] = None,
    *,
    stop: str = "all",
    stop_at: float = math.inf,
    allowed: Optional[np.ndarray] = None,
    prune: Optional[np.ndarray] = None,
    prune_threshold: float = math.inf,
    parents: bool = False,
    table=None,
    _threshold_vertex: int = -1,
    _threshold_factor: float = 1.0,
    target_mask: Optional[np.ndarray] = None,
    out: Optional[np.ndarray] = None,
) -> DistanceField:
    """Exact single-source passage times inside ``box``.

    With ``targets`` the search stops once all of them (``stop="all"``) or the
    first of them (``stop="any"``) is settled. ``allowed`` is a per-vertex
    0/1 mask; ``prune`` drops relaxations with ``prune[v] + d > prune_threshold``.
    ``out`` is an optional float64 buffer of box size that receives the distances.
    """
    source = tuple(int(c) for c in source)
    src = box.index(source)
    w, off, per_edge = table if table is not None else weight_table(env, box)
    nv = box.size
    idt = _index_dtype(box)
    shape = np.asarray(box.shape, dtype=np.int64)
    strides = np.asarray(box.strides, dtype=np.int64)
    tmark = np.zeros(0, dtype=np.uint8)
    mode = K.TARGETS_NONE
    if target_mask is not None:
        tmark = target_mask
        mode = K.TARGETS_ANY if stop == "any" else K.TARGETS_ALL
    elif targets is not None:
        tmark = np.zeros(nv, dtype=np.uint8)
        for t in targets:
            tmark[box.index(t)] = 1
        if tmark.any():
            mode = K.TARGETS_ANY if stop == "any" else K.TARGETS_ALL
    mask = np.zeros(0, dtype=np.uint8) if allowed is None else np.ascontiguousarray(allowed, dtype=np.uint8)
    if allowed is not None and not mask[src]:
        raise ValueError("source excluded by the mask")
    prune_arr = np.zeros(0) if prune is None else prune
    dist = np.empty(nv, dtype=np.float64) if out is None else out
    pos = np.empty(nv, dtype=idt)
    heap = np.empty(nv, dtype=idt)
    hkey = np.empty(nv, dtype=np.float64)
    parent = np.empty(nv if parents else 0, dtype=np.int64)
    settled = K.dijkstra_kernel(
        shape, strides, w, off, per_edge, src,
        mask, allowed is not None, float(stop_at),
        tmark, mode,
        prune_arr, float(prune_threshold), prune is not None,
        parents, _threshold_vertex, float(_threshold_factor),
        dist, pos, heap, hkey, parent,
    )
    return DistanceField(box, source, dist, parent if parents else None, int(settled))


@dataclass
class GeodesicDag:
    """Union of all (tie-tolerant) geodesic edges from ``source`` to ``target``.

    ``edges_u``/``edges_v`` hold box indices of directed edges u->v.
    """

    box: Box
    source: tuple[int, ...]
    target: tuple[int, ...]
    T: float
    tie_tolerance: float
    edges_u: np.ndarray
    edges_v: np.ndarray
    from_source: DistanceField = field(repr=False)
    from_target: DistanceField = field(repr=False)
    table: tuple = field(repr=False, default=None)

    def __len__(self) -> int:
        return int(self.edges_u.size)

    def edges(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return [(self.box.vertex(int(u)), self.box.vertex(int(v))) for u, v in zip(self.edges_u, self.edges_v)]

    def vertex_indices(self) -> np.ndarray:
        s = self.box.index(self.source)
        t = self.box.index(self.target)
        return np.unique(np.concatenate([self.edges_u, self.edges_v, [s, t]]).astype(np.int64))

    def touches_boundary(self) -> bool:
        xyz = self.box.coords(self.vertex_indices())
        lo = np.asarray(self.box.lo)
        hi = np.asarray(self.box.hi)
        return bool(np.any((xyz == lo) | (xyz == hi)))


def _dag_from_fields(box, table, ds: DistanceField, dt: DistanceField, source, target, tol) -> GeodesicDag:
    w, off, per_edge = table
    T = float(ds.dist[box.index(target)])
    thr = T * (1.0 + tol)
    shape = np.asarray(box.shape, dtype=np.int64)
    strides = np.asarray(box.strides, dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)
    m = K.dag_edges_kernel(shape, strides, w, off, per_edge, ds.dist, dt.dist, thr, True, empty, empty)
    eu = np.empty(m, dtype=np.int64)
    ev = np.empty(m, dtype=np.int64)
    K.dag_edges_kernel(shape, strides, w, off, per_edge, ds.dist, dt.dist, thr, False, eu, ev)
    return GeodesicDag(box, tuple(source), tuple(target), T, tol, eu, ev, ds, dt, table)


def geodesic_dag(
    env,
    box: Box,
    source: Sequence[int],
    target: Sequence[int],
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE,
) -> GeodesicDag:
    """All directed edges u->v with d_s(u) + t(u, v) + d_t(v) <= T (1 + tie_tolerance)."""
    source = tuple(int(c) for c in source)
    target = tuple(int(c) for c in target)
    table = weight_table(env, box)
    ti = box.index(target)
    ds = dijkstra(env, box, source, table=table, _threshold_vertex=ti, _threshold_factor=1.0 + tie_tolerance)
    T = float(ds.dist[ti])
    if not math.isfinite(T):
        raise UnreachableTarget(f"{target} unreachable from {source} inside the box")
    thr = T * (1.0 + tie_tolerance)
    # Vertices on near-geodesics satisfy d_s + d_t <= thr, and so does every
    # vertex on their shortest paths to the target: pruning on d_s is exact.
    dt = dijkstra(env, box, target, table=table, stop_at=thr, prune=ds.dist, prune_threshold=thr)
    return _dag_from_fields(box, table, ds, dt, source, target, tie_tolerance)


def _height_dp(dag: GeodesicDag):
    box = dag.box
    s = box.index(dag.source)
    t = box.index(dag.target)
    nodes = dag.vertex_indices()
    order = np.argsort(dag.edges_u, kind="stable")
    eu = np.searchsorted(nodes, dag.edges_u[order])
    ev = np.searchsorted(nodes, dag.edges_v[order])
    hloc = np.abs(box.coords(nodes)[:, 1:]).sum(axis=1).astype(np.int64)
    si = int(np.searchsorted(nodes, s))
    tj = int(np.searchsorted(nodes, t))
    acyclic, reached, hmax, hmin, pred = K.height_dp_kernel(nodes.size, eu, ev, hloc, si, tj)
    if not acyclic:
        raise GeodesicCycleError(
            f"geodesic edge set has a cycle at tie_tolerance={dag.tie_tolerance}; rerun with a smaller tolerance"
        )
    if not reached:
        raise UnreachableTarget("target not reachable through the geodesic edge set")
    path = [tj]
    while path[-1] != si:
        path.append(int(pred[path[-1]]))
    verts = [box.vertex(int(nodes[i])) for i in reversed(path)]
    return int(hmax), int(hmin), verts


def geodesic_heights(dag: GeodesicDag) -> tuple[int, int]:
    """``(H_max, H_min)``: largest and smallest height over all paths in the DAG."""
    hmax, hmin, _ = _height_dp(dag)
    return hmax, hmin


def representative_path(dag: GeodesicDag) -> list[tuple[int, ...]]:
    """One source-to-target path through the DAG, attaining the maximal height."""
    return _height_dp(dag)[2]


def path_time(env, path: Sequence[Sequence[int]]) -> float:
    """Passage time of a vertex path, summed left to right in path order."""
    pts = np.asarray(path, dtype=np.int64)
    if len(pts) < 2:
        return 0.0
    step = np.diff(pts, axis=0)
    if np.any(np.abs(step).sum(axis=1) != 1):
        raise ValueError("consecutive path vertices must be lattice neighbours")
    axis = np.argmax(step != 0, axis=1)
    lower = np.minimum(pts[:-1], pts[1:])
    times = np.empty(len(step))
    per_edge = bool(getattr(env, "per_edge", False))
    for k in np.unique(axis):
        sel = axis == k
        if per_edge:
            times[sel] = env.edge_times(int(k) + 1, [lower[sel, j] for j in range(pts.shape[1])])
        else:
            cols = [lower[sel, j] for j in range(pts.shape[1]) if j != k]
            times[sel] = env.line_times(int(k) + 1, cols)
    # cumsum is sequential, matching the order in which Dijkstra accumulates.
    return float(np.cumsum(times)[-1])


def path_height(path: Sequence[Sequence[int]]) -> int:
    return max(height(x) for x in path)


@dataclass(frozen=True)
class BoxPolicy:
    """Initial transversal half-width, growth factor and hard cap for adaptive boxes.

    ``h0=None`` picks ``max(min_half_width, ceil(scale * n^xi))`` with
    ``xi = beta / (beta + d - 1)`` when the infimum is positive, and
    ``max(min_half_width, ceil(zero_fraction * n))`` when it is zero.
    """

    h0: Optional[int] = None
    scale: float = 4.0
    zero_fraction: float = 1.0
    min_half_width: int = 8
    growth: int = 2
    cap: int = 1 << 14
    max_vertices: Optional[int] = 100_000_000

    def initial_half_width(self, env, n: int) -> int:
        if self.h0 is not None:
            return max(1, int(self.h0))
        dim = env.dim
        a = env.infimum
        dist = getattr(env, "dist", None)
        beta = getattr(dist, "beta", math.inf)
        if a > 0:
            xi = beta / (beta + dim - 1) if math.isfinite(beta) else 0.0
            return max(self.min_half_width, math.ceil(self.scale * n**xi))
        return max(self.min_half_width, math.ceil(self.zero_fraction * n))


@dataclass
class GeodesicResult:
    n: int
    T: float
    H_max: int
    H_min: int
    dag_edge_count: int
    box: Box
    touched_boundary: bool
    tie_tolerance: float
    half_width: int = 0
    retries: int = 0
    certified: bool = False
    T_lower: float = math.nan
    path: Optional[list] = None

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "T": self.T,
            "H_max": self.H_max,
            "H_min": self.H_min,
            "dag_edge_count": self.dag_edge_count,
            "box": {"lo": list(self.box.lo), "hi": list(self.box.hi)},
            "half_width": self.half_width,
            "touched_boundary": self.touched_boundary,
            "retries": self.retries,
            "certified": self.certified,
            "T_lower": self.T_lower,
            "tie_tolerance": self.tie_tolerance,
        }
        if self.path is not None:
            out["path"] = [list(v) for v in self.path]
        return out


def _heights_with_fallback(dag: GeodesicDag) -> tuple[GeodesicDag, tuple]:
    try:
        return dag, _height_dp(dag)
    except GeodesicCycleError:
        if dag.tie_tolerance == 0:
            raise
    # Both fields stay exact on the smaller threshold; only the edge set shrinks.
    exact = _dag_from_fields(dag.box, dag.table, dag.from_source, dag.from_target, dag.source, dag.target, 0.0)
    return exact, _height_dp(exact)


def _boundary_mask(box: Box) -> np.ndarray:
    mask = np.zeros(box.shape, dtype=np.bool_)
    for k in range(box.dim):
        sl = [slice(None)] * box.dim
        sl[k] = 0
        mask[tuple(sl)] = True
        sl[k] = -1
        mask[tuple(sl)] = True
    return mask.ravel()


def exit_certificate(env, dag: GeodesicDag, _consume: bool = False) -> bool:
    """True when no path leaving the box can be within the tie tolerance of T."""
    return exit_bound(env, dag, _consume)[0]


def exit_bound(env, dag: GeodesicDag, _consume: bool = False) -> tuple[bool, float]:
    """``(certified, lower)``: ``lower`` bounds the cost of every path that leaves
    the box, and ``certified`` says it exceeds T by more than the tie tolerance.

    Two sufficient conditions are tried. With infimum ``a > 0`` any path
    through a vertex outside ``[-h, n + h] x [-h, h]^(d-1)`` has at least
    ``n + 2h + 2`` edges. In general, a path that leaves the box costs at
    least ``min_b d_s(b) + min_b' d_t(b') + 2a`` over boundary vertices b, b'.
    ``_consume=True`` reuses the DAG's target-distance buffer, which is then invalid.
    """
    box = dag.box
    a = float(env.infimum)
    thr = dag.T * (1.0 + dag.tie_tolerance)
    n = dag.target[0] - dag.source[0]
    h = min(min(-c for c in box.lo), box.hi[0] - n, *box.hi[1:])
    lb = a * (n + 2 * h + 2)
    if lb > thr:
        return True, lb
    bmask = _boundary_mask(box)
    ds = dag.from_source.dist
    lo_s = float(ds[bmask].min())
    budget = thr - lo_s - 2 * a
    if budget < 0:
        return True, max(lb, lo_s + 2 * a)
    buf = dag.from_target.dist if _consume else None
    f = dijkstra(
        env, box, dag.target, table=dag.table, stop_at=budget,
        target_mask=bmask.view(np.uint8), stop="any", out=buf,
    )
    hit = f.dist[bmask]
    hit = hit[np.isfinite(hit)]
    if hit.size == 0:
        return True, max(lb, thr)
    # the first boundary vertex settled from the target is the nearest one
    return False, max(lb, lo_s + float(hit.min()) + 2 * a)


def max_height_geodesic(
    env,
    n: int,
    policy: Optional[BoxPolicy] = None,
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE,
    *,
    with_path: bool = False,
    certify: bool = True,
) -> GeodesicResult:
    """T(0, n e_1) with H_n and its min-height counterpart, on a self-enlarging box.

    The box ``[-h, n + h] x [-h, h]^(d-1)`` grows by ``policy.growth`` while a
    vertex of the geodesic DAG lies on its boundary, or (``certify=True``)
    while :func:`exit_certificate` cannot rule out a cheaper route outside it.
    When the next box would break ``policy.cap`` or ``policy.max_vertices``,
    :class:`BoxCapExceeded` carries the bounds from the last box as ``partial``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    policy = policy or BoxPolicy()
    d = env.dim
    h = policy.initial_half_width(env, n)
    source = (0,) * d
    target = (n,) + (0,) * (d - 1)
    retries = 0
    partial = None
    box = Box.around(n, h, d)
    while True:
        if h > policy.cap:
            raise BoxCapExceeded(h, policy.cap, partial=partial)
        if policy.max_vertices is not None and box.size > policy.max_vertices:
            raise BoxCapExceeded(box.size, policy.max_vertices, "vertex count", partial=partial)
        dag = None  # release the previous box before allocating the next
        dag = geodesic_dag(env, box, source, target, tie_tolerance)
        dag, (hmax, hmin, path) = _heights_with_fallback(dag)
        touched = dag.touches_boundary()
        next_h = h * policy.growth
        next_box = Box.around(n, next_h, d)
        last = next_h > policy.cap or (policy.max_vertices is not None and next_box.size > policy.max_vertices)
        certified, lower = False, math.nan
        if (certify and not touched) or last:
            certified, lower = exit_bound(env, dag, _consume=True)
            certified = certified and not touched
        accept = not touched and (certified or not certify)
        if accept or last:
            if certified:
                lower = dag.T
            elif accept:
                lower = math.nan  # accepted without a certificate: no bound computed
            else:
                lower = min(lower, dag.T)
            result = GeodesicResult(
                n=n, T=dag.T, H_max=hmax, H_min=hmin, dag_edge_count=len(dag), box=box,
                touched_boundary=touched, tie_tolerance=dag.tie_tolerance, half_width=h,
                retries=retries, certified=certified, T_lower=lower, path=path if with_path else None,
            )
            if accept:
                return result
            partial = result
        h, box = next_h, next_box
        retries += 1


def constrained_optimum(
    env,
    n: int,
    height_bound: int,
    side: str = "both",
    box: Optional[Box] = None,
) -> tuple[float, list[tuple[int, ...]]]:
    """Fastest path from 0 to n e_1 among those whose vertices all have height <= bound.

    ``side="upper-half"`` additionally requires x_2 >= 0 (d = 2 only).
    """
    if height_bound < 0:
        raise ValueError("height_bound must be non-negative")
    if side not in ("both", "upper-half"):
        raise ValueError(f"unknown side {side!r}")
    d = env.dim
    if side == "upper-half" and d != 2:
        raise ValueError("upper-half constraint is defined for d = 2")
    if box is None:
        m = max(int(height_bound), 1)
        box = Box((-m,) + (-height_bound,) * (d - 1), (n + m,) + (height_bound,) * (d - 1))
    coords = np.meshgrid(*box.axis_ranges()[1:], indexing="ij")
    transversal = sum(np.abs(c) for c in coords)
    ok = transversal <= height_bound
    if side == "upper-half":
        ok &= coords[0] >= 0
    allowed = np.broadcast_to(ok.ravel()[None, :], (box.shape[0], ok.size)).ravel().astype(np.uint8)
    target = (n,) + (0,) * (d - 1)
    field_ = dijkstra(env, box, (0,) * d, [target], allowed=allowed, parents=True)
    T = field_[target]
    if not math.isfinite(T):
        raise UnreachableTarget("no path satisfies the height constraint")
    return T, field_.path_to(target)


def boundary_passage_time(env, r: int) -> float:
    """T(0, boundary of the l1 ball of radius r), computed inside [-r, r]^d."""
    if r < 1:
        raise ValueError("r must be at least 1")
    d = env.dim
    box = Box.cube(r, d)
    sphere = l1_sphere(d, r)
    f = dijkstra(env, box, (0,) * d, sphere, stop="any")
    idx = np.fromiter((box.index(x) for x in sphere), dtype=np.int64, count=len(sphere))
    return float(f.dist[idx].min())
