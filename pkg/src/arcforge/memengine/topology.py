"""In-memory graph topology: forward and reverse adjacency plus degree counters."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import UnknownVertex
from ..model import EdgeKey, VertexId
from .edges import DEFAULT_THRESHOLD, RECORD, RECORD_SIZE, AdaptiveEdgeCollection

OUT = "out"
IN = "in"

_PACKED = np.dtype([("l", ">u2"), ("n", ">u8"), ("e", ">u8")])
assert _PACKED.itemsize == RECORD_SIZE


@dataclass
class FootprintReport:
    topology_bytes: int
    small_collections: int
    large_collections: int
    cache_bytes: int = 0

    def as_dict(self) -> dict:
        return {
            "topology_bytes": self.topology_bytes,
            "small_collections": self.small_collections,
            "large_collections": self.large_collections,
            "cache_bytes": self.cache_bytes,
        }


class GraphTopology:
    """Adjacency for every vertex, keyed ``vertex -> edge label -> collection``.

    Every forward entry ``u -[l, id]-> v`` is mirrored in ``reverse[v][l]``,
    and degrees are explicit counters so :meth:`degree` never iterates.
    """

    def __init__(self, threshold: int | None = DEFAULT_THRESHOLD):
        self.threshold = threshold
        self.forward: dict[VertexId, dict[int, AdaptiveEdgeCollection]] = {}
        self.reverse: dict[VertexId, dict[int, AdaptiveEdgeCollection]] = {}
        self.out_degree: dict[VertexId, int] = {}
        self.in_degree: dict[VertexId, int] = {}
        self.edge_count = 0

    # -- vertices -------------------------------------------------------------

    def __contains__(self, v: VertexId) -> bool:
        return v in self.out_degree

    def __len__(self) -> int:
        return len(self.out_degree)

    def add_vertex(self, v: VertexId) -> bool:
        if v in self.out_degree:
            return False
        self.forward[v] = {}
        self.reverse[v] = {}
        self.out_degree[v] = 0
        self.in_degree[v] = 0
        return True

    def remove_vertex(self, v: VertexId) -> list[tuple[VertexId, int, VertexId, int]]:
        """Drop ``v`` and every incident edge; returns the removed edges."""
        if v not in self.out_degree:
            raise UnknownVertex(f"unknown vertex {v}")
        removed = []
        for label, coll in sorted(self.forward[v].items()):
            for nl, nid, eid in coll:
                removed.append((v, label, VertexId(nl, nid), eid))
        for label, coll in sorted(self.reverse[v].items()):
            for nl, nid, eid in coll:
                src = VertexId(nl, nid)
                if src != v:  # self-loops already listed
                    removed.append((src, label, v, eid))
        for src, label, dst, eid in removed:
            self.remove_edge(src, dst, label, eid)
        del self.forward[v], self.reverse[v], self.out_degree[v], self.in_degree[v]
        return removed

    def vertices(self) -> Iterator[VertexId]:
        return iter(self.out_degree)

    # -- edges ----------------------------------------------------------------

    def _collection(self, side: dict, v: VertexId, label: int) -> AdaptiveEdgeCollection:
        by_label = side[v]
        coll = by_label.get(label)
        if coll is None:
            coll = by_label[label] = AdaptiveEdgeCollection(self.threshold)
        return coll

    def _require(self, v: VertexId) -> None:
        if v not in self.out_degree:
            raise UnknownVertex(f"unknown vertex {v}")

    def insert_edge(self, src: VertexId, dst: VertexId, label: int, edge_id: int) -> bool:
        self._require(src)
        self._require(dst)
        if not self._collection(self.forward, src, label).add((dst[0], dst[1], edge_id)):
            return False
        self._collection(self.reverse, dst, label).add((src[0], src[1], edge_id))
        self.out_degree[src] += 1
        self.in_degree[dst] += 1
        self.edge_count += 1
        return True

    def remove_edge(self, src: VertexId, dst: VertexId, label: int, edge_id: int) -> bool:
        fwd = self.forward.get(src, {}).get(label)
        if fwd is None or not fwd.discard((dst[0], dst[1], edge_id)):
            return False
        self.reverse[dst][label].discard((src[0], src[1], edge_id))
        self.out_degree[src] -= 1
        self.in_degree[dst] -= 1
        self.edge_count -= 1
        return True

    def has_edge(self, src: VertexId, dst: VertexId, label: int, edge_id: int) -> bool:
        coll = self.forward.get(src, {}).get(label)
        return coll is not None and (dst[0], dst[1], edge_id) in coll

    def entries(self, v: VertexId, direction: str, label: int | None = None
                ) -> Iterator[tuple[int, tuple[int, int, int]]]:
        """Raw ``(edge_label, (nbr_label, nbr_local, edge_id))`` pairs in key order."""
        side = self.forward if direction == OUT else self.reverse
        by_label = side.get(v)
        if by_label is None:
            raise UnknownVertex(f"unknown vertex {v}")
        if label is not None:
            coll = by_label.get(label)
            if coll is not None:
                for entry in coll:
                    yield label, entry
            return
        for lab in sorted(by_label):
            for entry in by_label[lab]:
                yield lab, entry

    def neighbors(self, v: VertexId, direction: str = OUT, label: int | None = None
                  ) -> Iterator[EdgeKey]:
        side = self.forward if direction == OUT else self.reverse
        by_label = side.get(v)
        if by_label is None:
            raise UnknownVertex(f"unknown vertex {v}")
        labels = sorted(by_label) if label is None else [label]
        new = tuple.__new__  # skips the NamedTuple constructor on this hot path
        for lab in labels:
            coll = by_label.get(lab)
            if coll is None:
                continue
            for nl, nid, eid in coll:
                yield new(EdgeKey, (lab, new(VertexId, (nl, nid)), eid))

    def degree(self, v: VertexId, direction: str = OUT) -> int:
        counters = self.out_degree if direction == OUT else self.in_degree
        try:
            return counters[v]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {v}") from None

    def collection(self, v: VertexId, direction: str, label: int) -> AdaptiveEdgeCollection | None:
        side = self.forward if direction == OUT else self.reverse
        return side.get(v, {}).get(label)

    def edges(self) -> Iterator[tuple[VertexId, int, VertexId, int]]:
        for v, by_label in self.forward.items():
            for label in sorted(by_label):
                for nl, nid, eid in by_label[label]:
                    yield v, label, VertexId(nl, nid), eid

    # -- bulk ingestion -------------------------------------------------------

    def bulk_insert(self, label: int, src: np.ndarray, dst: np.ndarray,
                    edge_ids: np.ndarray) -> int:
        """Insert many edges of one label at once.

        ``src`` and ``dst`` are ``(n, 2)`` integer arrays of (label_id,
        local_id).  Empty target collections are built directly from sorted
        packed records; non-empty ones fall back to per-edge inserts.  The
        resulting state is the same as inserting the edges one by one.
        """
        src = np.asarray(src, dtype=np.uint64).reshape(-1, 2)
        dst = np.asarray(dst, dtype=np.uint64).reshape(-1, 2)
        edge_ids = np.asarray(edge_ids, dtype=np.uint64).reshape(-1)
        if len(src) == 0:
            return 0
        for arr in (src, dst):
            for lab, loc in np.unique(arr, axis=0):
                self._require(VertexId(int(lab), int(loc)))
        inserted = self._bulk_side(self.forward, self.out_degree, label, src, dst, edge_ids)
        self._bulk_side(self.reverse, self.in_degree, label, dst, src, edge_ids)
        self.edge_count += inserted
        return inserted

    def _bulk_side(self, side, degrees, label, owner, other, eids) -> int:
        order = np.lexsort((eids, other[:, 1], other[:, 0], owner[:, 1], owner[:, 0]))
        owner, other, eids = owner[order], other[order], eids[order]
        keep = np.ones(len(owner), dtype=bool)
        keep[1:] = ((owner[1:] != owner[:-1]).any(axis=1) | (other[1:] != other[:-1]).any(axis=1)
                    | (eids[1:] != eids[:-1]))
        owner, other, eids = owner[keep], other[keep], eids[keep]
        rec = np.empty(len(owner), dtype=_PACKED)
        rec["l"], rec["n"], rec["e"] = other[:, 0], other[:, 1], eids
        raw = rec.tobytes()
        change = np.flatnonzero((owner[1:] != owner[:-1]).any(axis=1)) + 1
        starts = np.concatenate(([0], change)).tolist()
        ends = starts[1:] + [len(owner)]
        owners = owner[starts].tolist()
        inserted = 0
        for (ol, oid), s, e in zip(owners, starts, ends):
            v = VertexId(ol, oid)
            by_label = side[v]
            coll = by_label.get(label)
            chunk = raw[s * RECORD_SIZE:e * RECORD_SIZE]
            if coll is None or len(coll) == 0:
                by_label[label] = AdaptiveEdgeCollection.from_sorted(chunk, self.threshold)
                added = e - s
            else:
                added = 0
                for entry in RECORD.iter_unpack(chunk):
                    added += coll.add(entry)
            degrees[v] += added
            inserted += added
        return inserted

    # -- accounting -----------------------------------------------------------

    def footprint(self) -> FootprintReport:
        total = sys.getsizeof(self)
        small = large = 0
        for side in (self.forward, self.reverse):
            total += sys.getsizeof(side)
            for by_label in side.values():
                total += sys.getsizeof(by_label)
                for coll in by_label.values():
                    total += coll.nbytes()
                    if coll.representation == "small":
                        small += 1
                    else:
                        large += 1
        total += sys.getsizeof(self.out_degree) + sys.getsizeof(self.in_degree)
        return FootprintReport(total, small, large)

