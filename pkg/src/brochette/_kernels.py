"""Compiled inner loops for shortest paths on an implicit box lattice.

Edge weights are never materialised per edge. For an edge between box
indices ``lo`` and ``lo + strides[k]`` the weight is ``w[off[k] + line]``
where ``line`` is the row-major index of ``lo`` with coordinate ``k`` removed
(Brochette mode) or ``lo`` itself (per-edge mode).
"""

import numpy as np
from numba import njit

FINAL = -2
ABSENT = -1

TARGETS_NONE = 0
TARGETS_ALL = 1
TARGETS_ANY = 2


@njit(cache=True, nogil=True, inline="always")
def _weight(w, off, per_edge, strides, shape, k, lo):
    if per_edge:
        return w[off[k] + lo]
    sk = strides[k]
    return w[off[k] + (lo // (sk * shape[k])) * sk + lo % sk]


@njit(cache=True, nogil=True, inline="always")
def _less(ka, a, kb, b):
    return ka < kb or (ka == kb and a < b)


@njit(cache=True, nogil=True)
def _sift_up(heap, hkey, pos, i):
    item = heap[i]
    key = hkey[i]
    while i > 0:
        p = (i - 1) >> 1
        q = heap[p]
        if _less(key, item, hkey[p], q):
            heap[i] = q
            hkey[i] = hkey[p]
            pos[q] = i
            i = p
        else:
            break
    heap[i] = item
    hkey[i] = key
    pos[item] = i


@njit(cache=True, nogil=True)
def _sift_down(heap, hkey, pos, i, size):
    item = heap[i]
    key = hkey[i]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        r = c + 1
        if r < size and _less(hkey[r], heap[r], hkey[c], heap[c]):
            c = r
        q = heap[c]
        if _less(hkey[c], q, key, item):
            heap[i] = q
            hkey[i] = hkey[c]
            pos[q] = i
            i = c
        else:
            break
    heap[i] = item
    hkey[i] = key
    pos[item] = i


@njit(cache=True, nogil=True)
def dijkstra_kernel(
    shape,
    strides,
    w,
    off,
    per_edge,
    src,
    allowed,
    use_mask,
    stop_dist,
    tmark,
    target_mode,
    prune,
    prune_thr,
    use_prune,
    want_parent,
    thr_vertex,
    thr_factor,
    dist,
    pos,
    heap,
    hkey,
    parent,
):
    """Indexed-heap Dijkstra; ties in the queue break on vertex index.

    Stops when the next key exceeds ``stop_dist``, when the target set is
    settled (``target_mode``), or once keys exceed ``thr_factor`` times the
    distance of ``thr_vertex``. Returns the number of finalised vertices;
    non-finalised entries of ``dist`` are reset to +inf.
    """
    d = shape.shape[0]
    nv = dist.shape[0]
    for i in range(nv):
        dist[i] = np.inf
        pos[i] = ABSENT
    if want_parent:
        for i in range(nv):
            parent[i] = -1
    remaining = 0
    if target_mode != TARGETS_NONE:
        for i in range(nv):
            if tmark[i]:
                remaining += 1
    dist[src] = 0.0
    heap[0] = src
    hkey[0] = 0.0
    pos[src] = 0
    size = 1
    done = 0
    while size > 0:
        u = heap[0]
        du = dist[u]
        if du > stop_dist:
            break
        size -= 1
        if size > 0:
            heap[0] = heap[size]
            hkey[0] = hkey[size]
            pos[heap[0]] = 0
            _sift_down(heap, hkey, pos, 0, size)
        pos[u] = FINAL
        done += 1
        if u == thr_vertex:
            limit = du * thr_factor
            if limit < stop_dist:
                stop_dist = limit
        if target_mode != TARGETS_NONE and tmark[u]:
            remaining -= 1
            if target_mode == TARGETS_ANY or remaining == 0:
                break
        for k in range(d):
            sk = strides[k]
            c = (u // sk) % shape[k]
            for step in range(2):
                if step == 0:
                    if c == 0:
                        continue
                    v = u - sk
                    lo = v
                else:
                    if c == shape[k] - 1:
                        continue
                    v = u + sk
                    lo = u
                pv = pos[v]
                if pv == FINAL:
                    continue
                if use_mask and allowed[v] == 0:
                    continue
                nd = du + _weight(w, off, per_edge, strides, shape, k, lo)
                if use_prune and prune[v] + nd > prune_thr:
                    continue
                if nd < dist[v]:
                    dist[v] = nd
                    if want_parent:
                        parent[v] = u
                    if pv == ABSENT:
                        heap[size] = v
                        hkey[size] = nd
                        pos[v] = size
                        size += 1
                        _sift_up(heap, hkey, pos, size - 1)
                    else:
                        hkey[pv] = nd
                        _sift_up(heap, hkey, pos, pv)
    for i in range(nv):
        if pos[i] != FINAL:
            dist[i] = np.inf
    return done


@njit(cache=True, nogil=True)
def dag_edges_kernel(shape, strides, w, off, per_edge, ds, dt, thr, count_only, eu, ev):
    """Directed edges u->v with ds[u] + w(u, v) + dt[v] <= thr."""
    d = shape.shape[0]
    nv = ds.shape[0]
    m = 0
    for u in range(nv):
        su = ds[u]
        if su + dt[u] > thr:
            continue
        for k in range(d):
            sk = strides[k]
            c = (u // sk) % shape[k]
            for step in range(2):
                if step == 0:
                    if c == 0:
                        continue
                    v = u - sk
                    lo = v
                else:
                    if c == shape[k] - 1:
                        continue
                    v = u + sk
                    lo = u
                if su + _weight(w, off, per_edge, strides, shape, k, lo) + dt[v] <= thr:
                    if not count_only:
                        eu[m] = u
                        ev[m] = v
                    m += 1
    return m


@njit(cache=True, nogil=True)
def height_dp_kernel(nloc, eu, ev, hloc, src, tgt):
    """Max/min path height over all source->target paths of a DAG.

    ``eu``/``ev`` are local ids sorted by ``eu``. Returns
    ``(acyclic, reached, h_max, h_min, pred_max)``; a path's height is the
    maximum of ``hloc`` over its vertices.
    """
    m = eu.shape[0]
    start = np.zeros(nloc + 1, dtype=np.int64)
    for i in range(m):
        start[eu[i] + 1] += 1
    for i in range(nloc):
        start[i + 1] += start[i]
    indeg = np.zeros(nloc, dtype=np.int64)
    for i in range(m):
        indeg[ev[i]] += 1
    order = np.empty(nloc, dtype=np.int64)
    head = 0
    tail = 0
    for i in range(nloc):
        if indeg[i] == 0:
            order[tail] = i
            tail += 1
    reach = np.zeros(nloc, dtype=np.bool_)
    mmax = np.full(nloc, -1, dtype=np.int64)
    mmin = np.full(nloc, np.iinfo(np.int64).max, dtype=np.int64)
    pred = np.full(nloc, -1, dtype=np.int64)
    reach[src] = True
    mmax[src] = hloc[src]
    mmin[src] = hloc[src]
    while head < tail:
        u = order[head]
        head += 1
        for j in range(start[u], start[u + 1]):
            v = ev[j]
            if reach[u]:
                hv = hloc[v]
                cmax = mmax[u] if mmax[u] > hv else hv
                cmin = mmin[u] if mmin[u] > hv else hv
                if not reach[v] or cmax > mmax[v]:
                    mmax[v] = cmax
                    pred[v] = u
                if cmin < mmin[v]:
                    mmin[v] = cmin
                reach[v] = True
            indeg[v] -= 1
            if indeg[v] == 0:
                order[tail] = v
                tail += 1
    acyclic = tail == nloc
    return acyclic, reach[tgt], mmax[tgt], mmin[tgt], pred
