"""Whole-graph procedures (PageRank, weakly connected components) and writeback.

Procedures copy the topology into arrays under the read lock and then
compute without holding it, so writes issued during a run do not change
its result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import EmptyGraph, TypeMismatch
from .model import VertexId

if TYPE_CHECKING:
    from .database import Database


@dataclass
class ProcedureResult:
    """One ``(vertex, value)`` row per vertex in scope, plus run metadata."""

    kind: str
    rows: list[tuple[VertexId, Any]]
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict[VertexId, Any]:
        return dict(self.rows)


@dataclass
class GraphSnapshot:
    """Vertices in ascending VertexId order and edges as index pairs (one per edge)."""

    vertices: list[VertexId]
    src: np.ndarray
    dst: np.ndarray

    @property
    def n(self) -> int:
        return len(self.vertices)


def snapshot(db: "Database") -> GraphSnapshot:
    with db.lock.read():
        topo = db.engine.topology
        vertices = sorted(topo.vertices())
        index = {v: i for i, v in enumerate(vertices)}
        src, dst = [], []
        for v, by_label in topo.forward.items():
            i = index[v]
            for coll in by_label.values():
                for nl, nid, _ in coll:
                    src.append(i)
                    dst.append(index[VertexId(nl, nid)])
    return GraphSnapshot(vertices, np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64))


def pagerank(db: "Database", damping: float = 0.85, max_iter: int = 50, tol: float = 1e-8,
             snap: GraphSnapshot | None = None) -> ProcedureResult:
    """Power iteration; parallel edges each carry weight, dangling mass is spread uniformly."""
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must be in (0, 1)")
    if int(max_iter) < 1:
        raise ValueError("max_iter must be a positive integer")
    if not tol > 0:
        raise ValueError("tol must be positive")
    snap = snap or snapshot(db)
    n = snap.n
    if n == 0:
        raise EmptyGraph("pagerank needs at least one vertex")
    out_deg = np.bincount(snap.src, minlength=n).astype(np.float64)
    # transition matrix T[dst, src] = 1/outdeg(src)
    weights = 1.0 / out_deg[snap.src] if len(snap.src) else np.zeros(0)
    T = sparse.csr_matrix((weights, (snap.dst, snap.src)), shape=(n, n))
    dangling = out_deg == 0
    r = np.full(n, 1.0 / n)
    delta = float("inf")
    it = 0
    for it in range(1, int(max_iter) + 1):
        nxt = damping * (T @ r) + (damping * r[dangling].sum() + (1.0 - damping)) / n
        nxt /= nxt.sum()
        delta = float(np.abs(nxt - r).sum())
        r = nxt
        if delta < tol:
            break
    rows = list(zip(snap.vertices, r.tolist()))
    return ProcedureResult("pagerank", rows, {"iterations": it, "delta": delta})


def weakly_connected_components(db: "Database", snap: GraphSnapshot | None = None) -> ProcedureResult:
    """Label every vertex with the smallest VertexId of its undirected component."""
    snap = snap or snapshot(db)
    n = snap.n
    if n == 0:
        return ProcedureResult("wcc", [], {"components": 0})
    adj = sparse.csr_matrix((np.ones(len(snap.src)), (snap.src, snap.dst)), shape=(n, n))
    count, labels = connected_components(adj, directed=True, connection="weak")
    first = np.full(count, n, dtype=np.int64)
    # vertices are sorted, so the smallest index is the smallest VertexId
    np.minimum.at(first, labels, np.arange(n))
    rows = [(v, snap.vertices[first[c]]) for v, c in zip(snap.vertices, labels.tolist())]
    return ProcedureResult("wcc", rows, {"components": int(count)})


def encode_component(db: "Database", comp: VertexId, kind: str) -> Any:
    """Store a component label in a text field (``label:local``) or an int field."""
    if kind == "text":
        return f"{db.catalog.vertex_label_by_id(comp.label_id).name}:{comp.local_id}"
    if kind == "int":
        if comp.label_id >= 2**15 or comp.local_id >= 2**48:
            raise TypeMismatch(f"component {comp} does not fit an int field")
        return (comp.label_id << 48) | comp.local_id
    raise TypeMismatch(f"component labels need a text or int field, not {kind}")


def writeback(db: "Database", result: ProcedureResult, field_name: str) -> int:
    """Write each row's value to ``field_name`` through the logged write path.

    Every value is validated before the first write, so a type error leaves
    the database unchanged.
    """
    with db.lock.write():
        staged = []
        for v, value in result.rows:
            if not db.engine.has_vertex(v):
                continue  # deleted since the procedure ran
            ftype = db.catalog.vertex_label_by_id(v.label_id).field_type(field_name)
            if result.kind == "wcc":
                value = encode_component(db, value, ftype.kind)
            elif ftype.kind not in ("float", "json"):
                raise TypeMismatch(f"{result.kind} scores need a float field; "
                                   f"{field_name!r} is {ftype}")
            staged.append((v, db.engine.validate_attribute(v, field_name, value)))
        for v, value in staged:
            db.set_attribute(v, field_name, value)
    return len(staged)


PROCEDURES = {"pagerank": pagerank, "wcc": weakly_connected_components}
