"""Hierarchical navigable small world graph over one segment's vectors.

The hot loops (layer search, neighbour selection, insertion) are compiled
with numba and operate on flat arrays:

* ``l0`` / ``l0n``: layer-0 neighbour lists, ``(cap, 2m)`` padded with -1.
* ``up`` / ``upn``: neighbour lists of layers 1.. for the few nodes that
  reach them, addressed through ``uidx``.

Node levels come from a hash of ``(seed, ordinal)`` rather than a stateful
RNG, so rebuilding from the same insert sequence reproduces the graph.
"""

from __future__ import annotations

import heapq
import math

import numba
import numpy as np

from .distance import METRIC_CODES

MAX_LEVEL = 16
DEFAULT_M = 16
DEFAULT_EF_CONSTRUCTION = 200
DEFAULT_EF_SEARCH = 64

# meta slots
_N, _ENTRY, _MAXLEV, _UCOUNT, _STAMP = range(5)

_MASK64 = (1 << 64) - 1


def node_level(seed: int, ordinal: int, m: int) -> int:
    """Deterministic geometric level draw (splitmix64 of seed and ordinal)."""
    z = (seed * 0x9E3779B97F4A7C15 + (ordinal + 1) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    u = ((z >> 11) + 0.5) / float(1 << 53)
    return min(int(-math.log(u) / math.log(max(m, 2))), MAX_LEVEL)


# -- compiled kernels ---------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _dist(vecs, i, q, metric):
    s = 0.0
    if metric == 1:
        for t in range(q.shape[0]):
            d = vecs[i, t] - q[t]
            s += d * d
        return s
    for t in range(q.shape[0]):
        s += vecs[i, t] * q[t]
    if metric == 0:
        return 1.0 - s
    return -s


@numba.njit(cache=True, nogil=True)
def _links(level, node, l0, l0n, uidx, up, upn):
    if level == 0:
        return l0[node, :l0n[node]]
    u = uidx[node]
    return up[u, level - 1, :upn[u, level - 1]]


@numba.njit(cache=True, nogil=True)
def _greedy(vecs, q, metric, ep, level, l0, l0n, uidx, up, upn):
    cur = ep
    dcur = _dist(vecs, cur, q, metric)
    changed = True
    while changed:
        changed = False
        nbrs = _links(level, cur, l0, l0n, uidx, up, upn)
        for j in range(nbrs.shape[0]):
            nb = nbrs[j]
            d = _dist(vecs, nb, q, metric)
            if d < dcur:
                dcur = d
                cur = nb
                changed = True
    return cur


@numba.njit(cache=True, nogil=True)
def _search_layer(vecs, q, metric, eps, ef, level, l0, l0n, uidx, up, upn,
                  visited, stamp, allowed, use_allowed):
    """Beam search on one layer.

    Returns (ids, dists) of up to ``ef`` accepted nodes sorted by distance,
    plus the number of nodes visited.  Non-accepted nodes are traversed but
    never enter the result set.
    """
    d0 = _dist(vecs, eps[0], q, metric)
    cand = [(d0, np.int64(eps[0]))]
    res = [(-d0, np.int64(eps[0]))]
    res.pop()
    nvisit = 0
    for i in range(eps.shape[0]):
        e = eps[i]
        if visited[e] == stamp:
            continue
        visited[e] = stamp
        nvisit += 1
        d = _dist(vecs, e, q, metric)
        if i > 0:
            heapq.heappush(cand, (d, np.int64(e)))
        if (not use_allowed) or allowed[e]:
            heapq.heappush(res, (-d, np.int64(e)))
            if len(res) > ef:
                heapq.heappop(res)
    while len(cand) > 0:
        d, c = heapq.heappop(cand)
        if len(res) >= ef and d > -res[0][0]:
            break
        nbrs = _links(level, c, l0, l0n, uidx, up, upn)
        for j in range(nbrs.shape[0]):
            nb = nbrs[j]
            if visited[nb] == stamp:
                continue
            visited[nb] = stamp
            nvisit += 1
            dn = _dist(vecs, nb, q, metric)
            if len(res) < ef or dn < -res[0][0]:
                heapq.heappush(cand, (dn, np.int64(nb)))
                if (not use_allowed) or allowed[nb]:
                    heapq.heappush(res, (-dn, np.int64(nb)))
                    if len(res) > ef:
                        heapq.heappop(res)
    n = len(res)
    ids = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        nd, nid = heapq.heappop(res)
        ids[i] = nid
        dists[i] = -nd
    return ids, dists, nvisit


@numba.njit(cache=True, nogil=True)
def _select(vecs, metric, ids, dists, m):
    """Diversity heuristic: keep a candidate only if it is closer to the base
    than to every neighbour already kept.  ``ids`` are sorted by ``dists``."""
    out = np.empty(m, dtype=np.int64)
    k = 0
    for i in range(ids.shape[0]):
        if k >= m:
            break
        c = ids[i]
        good = True
        for j in range(k):
            if _dist(vecs, out[j], vecs[c], metric) < dists[i]:
                good = False
                break
        if good:
            out[k] = c
            k += 1
    return out[:k]


@numba.njit(cache=True, nogil=True)
def _connect(vecs, metric, node, level, nb, mmax, l0, l0n, uidx, up, upn):
    """Add ``node`` to ``nb``'s list at ``level``; prune with the heuristic on overflow."""
    if level == 0:
        cnt = l0n[nb]
        lst = l0[nb]
    else:
        u = uidx[nb]
        cnt = upn[u, level - 1]
        lst = up[u, level - 1]
    for j in range(cnt):
        if lst[j] == node:
            return
    if cnt < mmax:
        lst[cnt] = node
        if level == 0:
            l0n[nb] = cnt + 1
        else:
            upn[uidx[nb], level - 1] = cnt + 1
        return
    ids = np.empty(cnt + 1, dtype=np.int64)
    dists = np.empty(cnt + 1, dtype=np.float64)
    q = vecs[nb]
    for j in range(cnt):
        ids[j] = lst[j]
        dists[j] = _dist(vecs, lst[j], q, metric)
    ids[cnt] = node
    dists[cnt] = _dist(vecs, node, q, metric)
    order = np.argsort(dists, kind="mergesort")
    kept = _select(vecs, metric, ids[order], dists[order], mmax)
    for j in range(kept.shape[0]):
        lst[j] = kept[j]
    for j in range(kept.shape[0], lst.shape[0]):
        lst[j] = -1
    if level == 0:
        l0n[nb] = kept.shape[0]
    else:
        upn[uidx[nb], level - 1] = kept.shape[0]


@numba.njit(cache=True, nogil=True)
def _insert_many(vecs, start, stop, node_levels, metric, m, m0, efc,
                 l0, l0n, uidx, up, upn, visited, meta, dummy_allowed):
    for node in range(start, stop):
        level = node_levels[node]
        entry = meta[_ENTRY]
        maxlev = meta[_MAXLEV]
        meta[_N] = node + 1
        if entry < 0:
            meta[_ENTRY] = node
            meta[_MAXLEV] = level
            continue
        q = vecs[node]
        ep = entry
        for lev in range(maxlev, level, -1):
            ep = _greedy(vecs, q, metric, ep, lev, l0, l0n, uidx, up, upn)
        eps = np.empty(1, dtype=np.int64)
        eps[0] = ep
        top = min(level, maxlev)
        for lev in range(top, -1, -1):
            meta[_STAMP] += 1
            ids, dists, _ = _search_layer(vecs, q, metric, eps, efc, lev, l0, l0n, uidx,
                                          up, upn, visited, meta[_STAMP], dummy_allowed, False)
            mmax = m0 if lev == 0 else m
            chosen = _select(vecs, metric, ids, dists, m)
            if lev == 0:
                for j in range(chosen.shape[0]):
                    l0[node, j] = chosen[j]
                l0n[node] = chosen.shape[0]
            else:
                u = uidx[node]
                for j in range(chosen.shape[0]):
                    up[u, lev - 1, j] = chosen[j]
                upn[u, lev - 1] = chosen.shape[0]
            for j in range(chosen.shape[0]):
                _connect(vecs, metric, node, lev, chosen[j], mmax, l0, l0n, uidx, up, upn)
            eps = ids
        if level > maxlev:
            meta[_ENTRY] = node
            meta[_MAXLEV] = level


@numba.njit(cache=True, nogil=True)
def _knn(vecs, q, metric, ef, l0, l0n, uidx, up, upn, visited, meta, allowed, use_allowed):
    ep = meta[_ENTRY]
    for lev in range(meta[_MAXLEV], 0, -1):
        ep = _greedy(vecs, q, metric, ep, lev, l0, l0n, uidx, up, upn)
    eps = np.empty(1, dtype=np.int64)
    eps[0] = ep
    meta[_STAMP] += 1
    return _search_layer(vecs, q, metric, eps, ef, 0, l0, l0n, uidx, up, upn,
                         visited, meta[_STAMP], allowed, use_allowed)


# -- Python wrapper -----------------------------------------------------------


class HNSWIndex:
    """Growable HNSW graph; node ordinals are insertion positions."""

    def __init__(self, dim: int, metric: str, m: int = DEFAULT_M,
                 ef_construction: int = DEFAULT_EF_CONSTRUCTION, seed: int = 0,
                 capacity: int = 64):
        self.dim = dim
        self.metric = metric
        self.metric_code = METRIC_CODES[metric]
        self.m = m
        self.m0 = 2 * m
        self.ef_construction = ef_construction
        self.seed = seed
        cap = max(capacity, 1)
        self.vecs = np.zeros((cap, dim), dtype=np.float32)
        self.levels = np.zeros(cap, dtype=np.int32)
        self.l0 = np.full((cap, self.m0), -1, dtype=np.int32)
        self.l0n = np.zeros(cap, dtype=np.int32)
        self.uidx = np.full(cap, -1, dtype=np.int32)
        self.up = np.full((max(cap // 8, 1), MAX_LEVEL, m), -1, dtype=np.int32)
        self.upn = np.zeros((self.up.shape[0], MAX_LEVEL), dtype=np.int32)
        self.visited = np.zeros(cap, dtype=np.int64)
        self.meta = np.array([0, -1, 0, 0, 0], dtype=np.int64)
        self._no_filter = np.zeros(1, dtype=np.bool_)

    def __len__(self) -> int:
        return int(self.meta[_N])

    @property
    def entry_point(self) -> int:
        return int(self.meta[_ENTRY])

    @property
    def max_level(self) -> int:
        return int(self.meta[_MAXLEV])

    def _prepare(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.float32)
        if self.metric_code == 0:
            norms = np.linalg.norm(vec.astype(np.float64), axis=-1, keepdims=True)
            norms[norms == 0] = 1.0
            vec = (vec / norms).astype(np.float32)
        return vec

    def _grow(self, need: int) -> None:
        cap = self.vecs.shape[0]
        if need > cap:
            new = max(need, cap * 2)
            self.vecs = _resize(self.vecs, new, 0)
            self.levels = _resize(self.levels, new, 0)
            self.l0 = _resize(self.l0, new, -1)
            self.l0n = _resize(self.l0n, new, 0)
            self.uidx = _resize(self.uidx, new, -1)
            self.visited = _resize(self.visited, new, 0)

    def _grow_upper(self, need: int) -> None:
        cap = self.up.shape[0]
        if need > cap:
            new = max(need, cap * 2)
            self.up = _resize(self.up, new, -1)
            self.upn = _resize(self.upn, new, 0)

    def add(self, vectors: np.ndarray) -> np.ndarray:
        """Insert rows of ``vectors``; returns their ordinals."""
        vectors = np.asarray(vectors, dtype=np.float32).reshape(-1, self.dim)
        start = len(self)
        stop = start + len(vectors)
        if stop == start:
            return np.arange(start, start)
        self._grow(stop)
        self.vecs[start:stop] = self._prepare(vectors)
        ucount = int(self.meta[_UCOUNT])
        for node in range(start, stop):
            lev = node_level(self.seed, node, self.m)
            self.levels[node] = lev
            if lev > 0:
                self.uidx[node] = ucount
                ucount += 1
        self._grow_upper(ucount)
        self.meta[_UCOUNT] = ucount
        _insert_many(self.vecs, start, stop, self.levels, self.metric_code, self.m, self.m0,
                     self.ef_construction, self.l0, self.l0n, self.uidx, self.up, self.upn,
                     self.visited, self.meta, self._no_filter)
        return np.arange(start, stop)

    def search(self, query: np.ndarray, ef: int, allowed: np.ndarray | None = None
               ) -> tuple[np.ndarray, np.ndarray, int]:
        """Up to ``ef`` nearest accepted ordinals, their internal distances, and
        the number of nodes visited."""
        if len(self) == 0:
            return np.empty(0, np.int64), np.empty(0), 0
        q = self._prepare(np.asarray(query, dtype=np.float32).reshape(1, -1))[0]
        if allowed is None:
            return _knn(self.vecs, q, self.metric_code, max(int(ef), 1), self.l0, self.l0n,
                        self.uidx, self.up, self.upn, self.visited, self.meta,
                        self._no_filter, False)
        return _knn(self.vecs, q, self.metric_code, max(int(ef), 1), self.l0, self.l0n,
                    self.uidx, self.up, self.upn, self.visited, self.meta,
                    np.ascontiguousarray(allowed, dtype=np.bool_), True)

    def neighbors(self, node: int, level: int = 0) -> list[int]:
        if level == 0:
            return self.l0[node, :self.l0n[node]].tolist()
        u = self.uidx[node]
        if u < 0 or level > self.levels[node]:
            return []
        return self.up[u, level - 1, :self.upn[u, level - 1]].tolist()

    # -- flat-array image (segment files) -------------------------------------

    def arrays(self) -> dict[str, np.ndarray]:
        n = len(self)
        u = int(self.meta[_UCOUNT])
        return {
            "levels": self.levels[:n],
            "l0": self.l0[:n],
            "l0n": self.l0n[:n],
            "uidx": self.uidx[:n],
            "up": self.up[:u],
            "upn": self.upn[:u],
        }

    @classmethod
    def from_arrays(cls, dim: int, metric: str, m: int, ef_construction: int, seed: int,
                    raw_vectors: np.ndarray, arrays: dict[str, np.ndarray],
                    entry: int, max_level: int) -> "HNSWIndex":
        n = len(raw_vectors)
        idx = cls(dim, metric, m, ef_construction, seed, capacity=max(n, 1))
        if n:
            idx.vecs[:n] = idx._prepare(raw_vectors)
            idx.levels[:n] = arrays["levels"]
            idx.l0[:n] = arrays["l0"]
            idx.l0n[:n] = arrays["l0n"]
            idx.uidx[:n] = arrays["uidx"]
        u = len(arrays["up"])
        idx._grow_upper(max(u, 1))
        if u:
            idx.up[:u] = arrays["up"]
            idx.upn[:u] = arrays["upn"]
        idx.meta[:] = [n, entry if n else -1, max_level if n else 0, u, 0]
        return idx


    @classmethod
    def mapped(cls, dim: int, metric: str, m: int, ef_construction: int, seed: int,
               raw_vectors: np.ndarray, arrays: dict[str, np.ndarray],
               entry: int, max_level: int) -> "HNSWIndex":
        """Read-only index over memory-mapped arrays (sealed segments).

        Only the cosine metric needs a private, normalised copy of the vectors.
        """
        n = len(raw_vectors)
        idx = cls.__new__(cls)
        idx.dim, idx.metric, idx.metric_code = dim, metric, METRIC_CODES[metric]
        idx.m, idx.m0, idx.ef_construction, idx.seed = m, 2 * m, ef_construction, seed
        idx.vecs = idx._prepare(raw_vectors) if idx.metric_code == 0 else raw_vectors
        idx.levels = arrays["levels"]
        idx.l0, idx.l0n, idx.uidx = arrays["l0"], arrays["l0n"], arrays["uidx"]
        idx.up, idx.upn = arrays["up"], arrays["upn"]
        idx.visited = np.zeros(max(n, 1), dtype=np.int64)
        idx.meta = np.array([n, entry if n else -1, max_level if n else 0, len(arrays["up"]), 0],
                            dtype=np.int64)
        idx._no_filter = np.zeros(1, dtype=np.bool_)
        return idx


def _resize(arr: np.ndarray, rows: int, fill) -> np.ndarray:
    out = np.full((rows,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[:arr.shape[0]] = arr
    return out
