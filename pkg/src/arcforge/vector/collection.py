"""Vector collections: segments + payload index + filterable k-NN search."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import BadDimension, DimensionMismatch, TypeMismatch
from ..model import VertexId, as_vector, canonical
from .distance import check_metric, scores_many
from .hnsw import DEFAULT_EF_CONSTRUCTION, DEFAULT_M
from .payload import Condition, PayloadIndex
from .segment import MUTABLE, SEALED, Segment

SEAL_THRESHOLD = 50_000
COMPACT_RATIO = 0.3
BRUTE_FORCE_LIMIT = 1_000


@dataclass(frozen=True)
class ScoredHit:
    key: VertexId
    score: float


@dataclass
class HnswParams:
    m: int = DEFAULT_M
    ef_construction: int = DEFAULT_EF_CONSTRUCTION
    # None: search with ef_construction, the beam width used to build the graph
    ef_search: int | None = None
    seed: int = 0

    @property
    def default_ef(self) -> int:
        return self.ef_search if self.ef_search is not None else self.ef_construction

    def to_json(self) -> dict:
        return {"m": self.m, "ef_construction": self.ef_construction,
                "ef_search": self.ef_search, "seed": self.seed}


@dataclass
class Point:
    key: VertexId
    vector: Any
    payload: dict[str, Any] = field(default_factory=dict)


def sort_hits(hits: Iterable[ScoredHit]) -> list[ScoredHit]:
    return sorted(hits, key=lambda h: (-h.score, h.key))


class VectorCollection:
    """A named set of ``(key, vector, payload)`` points with an HNSW index.

    Points go to the mutable segment, which seals at ``seal_threshold``
    physical points.  Re-upserting a key tombstones its previous version.
    """

    def __init__(self, name: str, dimension: int, metric: str = "cosine",
                 params: HnswParams | None = None, seal_threshold: int = SEAL_THRESHOLD):
        if int(dimension) < 1:
            raise BadDimension(f"dimension must be >= 1, got {dimension}")
        self.name = name
        self.dimension = int(dimension)
        self.metric = check_metric(metric)
        self.params = params or HnswParams()
        self.seal_threshold = seal_threshold
        self.segments: list[Segment] = []
        self.locations: dict[VertexId, tuple[int, int]] = {}
        self.payload = PayloadIndex()
        self._next_segment = 0
        self._lock = threading.RLock()
        self._new_mutable()

    # -- segment bookkeeping --------------------------------------------------

    def _new_mutable(self) -> Segment:
        seg = Segment(self._next_segment, self.dimension, self.metric, self.params.m,
                      self.params.ef_construction, self.params.seed + self._next_segment)
        self._next_segment += 1
        self.segments = self.segments + [seg]
        return seg

    @property
    def mutable(self) -> Segment:
        return self.segments[-1]

    def _segment(self, seg_id: int) -> Segment:
        for seg in self.segments:
            if seg.id == seg_id:
                return seg
        raise KeyError(seg_id)

    @property
    def point_count(self) -> int:
        return len(self.locations)

    @property
    def physical_count(self) -> int:
        return sum(len(s) for s in self.segments)

    # -- writes ---------------------------------------------------------------

    def validate(self, points: Sequence[Point]) -> list[tuple[VertexId, np.ndarray, dict]]:
        """Check a whole batch; raises before anything is modified."""
        out = []
        for p in points:
            key = VertexId(*p.key)
            vec = as_vector(p.vector)
            if vec.shape[0] != self.dimension:
                raise DimensionMismatch(
                    f"collection {self.name!r} has dimension {self.dimension}, got {vec.shape[0]}")
            if not np.all(np.isfinite(vec)):
                raise TypeMismatch("vector components must be finite")
            out.append((key, vec, self.payload.check(dict(p.payload or {}))))
        return out

    def bulk_upsert(self, points: Sequence[Point]) -> int:
        batch = self.validate(points)
        with self._lock:
            # the newest version of a key inside one batch wins
            last = {key: i for i, (key, _, _) in enumerate(batch)}
            batch = [batch[i] for i in sorted(last.values())]
            for key, _, _ in batch:
                self._tombstone(key)
            pos = 0
            while pos < len(batch):
                seg = self.mutable
                room = max(self.seal_threshold - len(seg), 0)
                if room == 0:
                    seg.seal()
                    self._new_mutable()
                    continue
                chunk = batch[pos:pos + room]
                ords = seg.add([k for k, _, _ in chunk], np.stack([v for _, v, _ in chunk]))
                for (key, _, payload), o in zip(chunk, ords.tolist()):
                    self.locations[key] = (seg.id, o)
                    self.payload.set(key, payload)
                pos += len(chunk)
                if len(seg) >= self.seal_threshold:
                    seg.seal()
                    self._new_mutable()
        return len(points)

    def _tombstone(self, key: VertexId) -> bool:
        loc = self.locations.pop(key, None)
        if loc is None:
            return False
        self._segment(loc[0]).tombstone(loc[1])
        self.payload.remove(key)
        return True

    def delete_points(self, keys: Iterable[VertexId]) -> int:
        with self._lock:
            return sum(self._tombstone(VertexId(*k)) for k in keys)

    def set_payload_field(self, key: VertexId, field_name: str, value: Any) -> None:
        with self._lock:
            if key in self.locations:
                self.payload.update_field(key, field_name, value)

    # -- reads ----------------------------------------------------------------

    def get(self, key: VertexId) -> Point | None:
        loc = self.locations.get(key)
        if loc is None:
            return None
        seg = self._segment(loc[0])
        return Point(key, np.array(seg.vectors[loc[1]]), dict(self.payload.get(key)))

    def points(self) -> list[Point]:
        return [self.get(k) for k in sorted(self.locations)]

    def _check_query(self, query: Any) -> np.ndarray:
        q = as_vector(query)
        if q.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"query has dimension {q.shape[0]}, collection {self.name!r} has {self.dimension}")
        return q

    def _rescore(self, q: np.ndarray, cands: list[tuple[Segment, np.ndarray]], k: int
                 ) -> list[ScoredHit]:
        hits = []
        for seg, ords in cands:
            if len(ords) == 0:
                continue
            scores = scores_many(self.metric, seg.vectors[ords], q)
            keys = seg.keys
            hits.extend(ScoredHit(keys[o], float(s)) for o, s in zip(ords.tolist(), scores.tolist()))
        return sort_hits(hits)[:k]

    def brute_force(self, query: Any, k: int, keys: Iterable[VertexId] | None = None
                    ) -> list[ScoredHit]:
        """Exhaustive scan over live points (or the given subset)."""
        q = self._check_query(query)
        with self._lock:
            selected = self.locations if keys is None else [x for x in keys if x in self.locations]
            by_seg: dict[int, list[int]] = {}
            for key in selected:
                sid, o = self.locations[key]
                by_seg.setdefault(sid, []).append(o)
            segs = {s.id: s for s in self.segments}
            cands = [(segs[sid], np.array(sorted(o), dtype=np.int64)) for sid, o in by_seg.items()]
        return self._rescore(q, cands, k)

    def search(self, query: Any, k: int, ef_search: int | None = None,
               filter: Sequence[Condition] | None = None) -> list[ScoredHit]:
        """Top-``k`` hits by score, ties broken by ascending key.

        With a filter, the payload index first yields the candidate keys; small
        candidate sets are scanned exhaustively, larger ones drive an HNSW
        search that only accepts candidates, doubling ef until ``k`` accepted
        points are found or the graph is exhausted.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q = self._check_query(query)
        ef = max(int(ef_search if ef_search is not None else self.params.default_ef), k)
        with self._lock:
            segments = list(self.segments)
            candidates = None
            if filter:
                candidates = self.payload.select(filter)
                if len(candidates) <= BRUTE_FORCE_LIMIT:
                    return self.brute_force(q, k, candidates)
            results = []
            for seg in segments:
                n = len(seg)
                if n == 0 or seg.live == 0:
                    continue
                allowed = None
                if candidates is not None:
                    allowed = np.zeros(n, dtype=np.bool_)
                    ords = [self.locations[key][1] for key in candidates
                            if self.locations.get(key, (-1,))[0] == seg.id]
                    if not ords:
                        continue
                    allowed[ords] = True
                seg_ef = ef
                while True:
                    ids, visited = seg.search(q, seg_ef, allowed)
                    if len(ids) >= k or visited >= n or seg_ef >= n:
                        break
                    seg_ef *= 2
                results.append((seg, ids))
            return self._rescore(q, results, k)

    # -- maintenance ----------------------------------------------------------

    def compact(self, ratio: float = COMPACT_RATIO) -> list[int]:
        """Rewrite segments whose tombstone ratio reaches ``ratio``.

        Qualifying segments (the mutable one included) are merged into one new
        sealed segment without their tombstoned points.  Returns the ids of the
        rewritten segments.
        """
        with self._lock:
            victims = [s for s in self.segments if len(s) and s.tombstone_ratio >= ratio]
            if not victims:
                return []
            victim_ids = {s.id for s in victims}
            live = [(seg, o) for seg in victims for o in range(len(seg)) if not seg.deleted[o]]
            merged = Segment(self._next_segment, self.dimension, self.metric, self.params.m,
                             self.params.ef_construction, self.params.seed + self._next_segment,
                             capacity=max(len(live), 1))
            self._next_segment += 1
            if live:
                merged.add([seg.keys[o] for seg, o in live],
                           np.stack([seg.vectors[o] for seg, o in live]))
            merged.seal()
            kept = [s for s in self.segments if s.id not in victim_ids]
            sealed = [s for s in kept if s.state == SEALED]
            mutable = [s for s in kept if s.state == MUTABLE]
            new_list = sealed + ([merged] if live else []) + mutable
            for o, key in enumerate(merged.keys):
                self.locations[key] = (merged.id, o)
            self.segments = new_list
            if not mutable:
                self._new_mutable()
            return sorted(victim_ids)

    def flush_segments(self) -> None:
        """Seal the mutable segment if it reached the threshold (checkpoint hook)."""
        with self._lock:
            if len(self.mutable) >= self.seal_threshold:
                self.mutable.seal()
                self._new_mutable()

    # -- persistence ----------------------------------------------------------

    def save(self, directory: Path) -> dict:
        """Write segment files into ``directory``; return the manifest entry."""
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            segs = []
            for seg in self.segments:
                fname = f"segment_{seg.id}.avs"
                seg.save(directory / fname)
                segs.append({"id": seg.id, "state": seg.state, "file": fname,
                             "tombstones": np.flatnonzero(seg.deleted[:len(seg)]).tolist()})
            meta = {
                "name": self.name, "dimension": self.dimension, "metric": self.metric,
                "params": self.params.to_json(), "seal_threshold": self.seal_threshold,
                "next_segment": self._next_segment, "segments": segs,
            }
        (directory / "collection.json").write_text(json.dumps(meta, sort_keys=True))
        return meta

    @classmethod
    def load(cls, directory: Path, payloads: dict[VertexId, dict]) -> "VectorCollection":
        meta = json.loads((directory / "collection.json").read_text())
        p = meta["params"]
        coll = cls(meta["name"], meta["dimension"], meta["metric"],
                   HnswParams(p["m"], p["ef_construction"], p["ef_search"], p["seed"]),
                   meta["seal_threshold"])
        segments = []
        for entry in meta["segments"]:
            seg = Segment.load(directory / entry["file"])
            for o in entry["tombstones"]:
                seg.tombstone(o)
            segments.append(seg)
        coll.segments = segments
        coll._next_segment = meta["next_segment"]
        coll.locations = {}
        for seg in segments:
            for o, key in enumerate(seg.keys):
                if not seg.deleted[o]:
                    coll.locations[key] = (seg.id, o)
        if not segments or segments[-1].state != MUTABLE:
            coll._new_mutable()
        for key in coll.locations:
            coll.payload.set(key, payloads.get(key, {}))
        return coll

    def digest(self) -> tuple:
        """Logical content: sorted (key, vector bytes, payload) of live points."""
        with self._lock:
            return (self.name, self.dimension, self.metric,
                    tuple((p.key, canonical(p.vector), canonical(p.payload)) for p in self.points()))

    def describe(self) -> dict:
        return {
            "name": self.name, "dimension": self.dimension, "metric": self.metric,
            "point_count": self.point_count, "physical_count": self.physical_count,
            "segments": [{"id": s.id, "state": s.state, "points": len(s), "tombstones": s.tombstones}
                         for s in self.segments],
            **self.params.to_json(),
        }
