"""The embeddable database: graph, attributes, and vector collections behind a WAL.

Every mutation follows the same path: validate against the current state,
append a WAL record, then apply the record to memory.  Recovery replays the
same records through the same ``_apply`` code, which keeps live state and
replayed state identical by construction.
"""

from __future__ import annotations

import logging
import shutil
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .catalog import Catalog, IndexBinding, schema_changes
from .errors import (
    CorruptCheckpoint,
    DimensionMismatch,
    DuplicateCollection,
    DuplicateVertex,
    PruneBeyondCheckpoint,
    SchemaError,
    TypeMismatch,
    UnknownCollection,
    UnknownLabel,
    UnknownVertex,
)
from .memengine.cache import DEFAULT_CACHE_CAPACITY
from .memengine.edges import DEFAULT_THRESHOLD
from .memengine.engine import MemEngine
from .memengine.topology import IN, OUT, FootprintReport
from .model import (
    EdgeKey,
    EdgeRef,
    VertexId,
    as_vector,
    canonical,
    decode_value,
    decode_vid,
    encode_value,
    encode_vid,
)
from .rwlock import RWLock
from .vector.collection import HnswParams, Point, ScoredHit, VectorCollection, SEAL_THRESHOLD
from .vector.distance import check_metric
from .vector.payload import Condition
from .wal import checkpoint as ckpt
from .wal.log import DEFAULT_SEGMENT_BYTES, SYNC, WriteAheadLog

log = logging.getLogger(__name__)

UPSERT_CHUNK = 1000


def _enc_owner(owner: Hashable) -> dict:
    if isinstance(owner, EdgeRef):
        return {"e": [owner.src[0], owner.src[1], owner.edge_label_id,
                      owner.dst[0], owner.dst[1], owner.edge_id]}
    return {"v": encode_vid(owner)}


def _dec_owner(obj: dict) -> Hashable:
    if "e" in obj:
        sl, sn, lab, dl, dn, eid = obj["e"]
        return EdgeRef(VertexId(sl, sn), lab, VertexId(dl, dn), eid)
    return decode_vid(obj["v"])


def _as_vid(v: Any) -> VertexId:
    if isinstance(v, VertexId):
        return v
    return VertexId(int(v[0]), int(v[1]))


class Database:
    """Multi-modal embedded database.

    ``path=None`` gives a purely in-memory engine with no WAL (benchmarks and
    tests of the in-memory structures).
    """

    def __init__(self, path: str | Path | None = None, *,
                 threshold: int | None = DEFAULT_THRESHOLD,
                 cache_capacity: int = DEFAULT_CACHE_CAPACITY,
                 durability: str = SYNC,
                 segment_bytes: int = DEFAULT_SEGMENT_BYTES,
                 seal_threshold: int = SEAL_THRESHOLD,
                 use_checkpoint: bool = True,
                 batch_size: int = 1024,
                 workers: int = 1):
        self.path = Path(path) if path is not None else None
        self.threshold = threshold
        self.cache_capacity = cache_capacity
        self.seal_threshold = seal_threshold
        self.batch_size = batch_size
        self.workers = workers
        self.lock = RWLock()
        self._reset_state()
        self.wal: WriteAheadLog | None = None
        self.checkpoint_lsn = 0
        self.applied_lsn = 0
        self._jobs: ThreadPoolExecutor | None = None
        self._closed = False
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
            self.wal = WriteAheadLog(self.path / "wal", segment_bytes, durability)
            self._recover(use_checkpoint)

    @classmethod
    def open(cls, path: str | Path, **kwargs) -> "Database":
        return cls(path, **kwargs)

    def _reset_state(self) -> None:
        self.catalog = Catalog()
        self.engine = MemEngine(self.catalog, self.threshold, self.cache_capacity)
        self.collections: dict[str, VectorCollection] = {}
        self.next_edge_id = 0
        self.next_local: dict[int, int] = {}

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- the write path -------------------------------------------------------

    def _commit(self, op: str, payload: dict) -> Any:
        """Append ``op`` to the WAL, then apply it.  Caller holds the write lock."""
        if self.wal is not None:
            lsn = self.wal.append(op, payload)
        else:
            lsn = self.applied_lsn + 1
        result = self._apply(op, payload)
        self.applied_lsn = lsn
        return result

    def _apply(self, op: str, p: dict) -> Any:
        if op == "SchemaChange":
            self.catalog.apply(p)
            return None
        if op == "CreateVertex":
            v = decode_vid(p["v"])
            self.engine.create_vertex(v)
            self.next_local[v.label_id] = max(self.next_local.get(v.label_id, 0), v.local_id + 1)
            props = {k: decode_value(x) for k, x in p.get("props", {}).items()}
            for f, value in props.items():
                self.engine.put_attribute(v, f, value)
            self._sync_bound_vertex(v, props)
            return v
        if op == "DeleteVertex":
            v = decode_vid(p["v"])
            label = self.catalog.vertex_label_by_id(v.label_id).name
            for binding in self.catalog.indexes_for_label(label):
                self.collections[binding.name].delete_points([v])
            self.engine.delete_vertex(v)
            return None
        if op == "InsertEdge":
            src, dst = decode_vid(p["src"]), decode_vid(p["dst"])
            label, eid = p["label"], p["id"]
            inserted = self.engine.insert_edge(src, dst, label, eid)
            self.next_edge_id = max(self.next_edge_id, eid + 1)
            ref = EdgeRef(src, label, dst, eid)
            for f, x in p.get("props", {}).items():
                self.engine.put_attribute(ref, f, decode_value(x))
            return inserted
        if op == "RemoveEdge":
            return self.engine.remove_edge(decode_vid(p["src"]), decode_vid(p["dst"]),
                                           p["label"], p["id"])
        if op == "SetAttribute":
            owner = _dec_owner(p["owner"])
            value = decode_value(p["value"])
            self.engine.put_attribute(owner, p["field"], value)
            if not isinstance(owner, EdgeRef):
                self._sync_bound_vertex(owner, {p["field"]: value})
            return None
        if op == "CreateCollection":
            params = HnswParams(**p["params"])
            coll = VectorCollection(p["name"], p["dimension"], p["metric"], params,
                                    p.get("seal_threshold", self.seal_threshold))
            self.collections[p["name"]] = coll
            binding = p.get("binding")
            if binding:
                self.catalog.apply({"action": "bind_index", "name": p["name"],
                                    "label": binding["label"], "field": binding["field"]})
                self._backfill(self.catalog.indexes[p["name"]])
            return None
        if op == "DeleteCollection":
            del self.collections[p["name"]]
            self.catalog.apply({"action": "unbind_index", "name": p["name"]})
            return None
        if op == "UpsertPoints":
            coll = self.collections[p["collection"]]
            binding = self.catalog.indexes.get(p["collection"])
            points = []
            for key, vec, payload in p["points"]:
                key = decode_vid(key)
                vector = decode_value(vec)
                if binding is not None:
                    self.engine.put_attribute(key, binding.field, vector)
                    payload = self._vertex_payload(key, binding.label)
                else:
                    payload = {k: decode_value(x) for k, x in payload.items()}
                points.append(Point(key, vector, payload))
            return coll.bulk_upsert(points)
        if op == "DeletePoints":
            coll = self.collections[p["collection"]]
            keys = [decode_vid(k) for k in p["keys"]]
            binding = self.catalog.indexes.get(p["collection"])
            if binding is not None:
                for key in keys:
                    if self.engine.has_vertex(key):
                        self.engine.put_attribute(key, binding.field, None)
            return coll.delete_points(keys)
        raise ValueError(f"unknown WAL op {op!r}")

    # -- vector index bindings ------------------------------------------------

    def _vertex_payload(self, v: VertexId, label: str) -> dict:
        payload = {}
        for f in self.catalog.payload_fields(label):
            value = self.engine.store.get(v, f)
            if value is not None:
                payload[f] = value
        return payload

    def _sync_bound_vertex(self, v: VertexId, changed: Mapping[str, Any]) -> None:
        label = self.catalog.vertex_label_by_id(v.label_id).name
        for binding in self.catalog.indexes_for_label(label):
            coll = self.collections[binding.name]
            if binding.field in changed:
                vec = changed[binding.field]
                if vec is None:
                    coll.delete_points([v])
                else:
                    coll.bulk_upsert([Point(v, vec, self._vertex_payload(v, label))])
            elif v in coll.locations:
                mirrored = self.catalog.payload_fields(label)
                for f, value in changed.items():
                    if f in mirrored:
                        coll.set_payload_field(v, f, value)

    def _backfill(self, binding: IndexBinding) -> None:
        ldef = self.catalog.vertex_label(binding.label)
        points = []
        for v in self.engine.scan(ldef.id):
            vec = self.engine.store.get(v, binding.field)
            if vec is not None:
                points.append(Point(v, vec, self._vertex_payload(v, binding.label)))
        if points:
            self.collections[binding.name].bulk_upsert(points)

    # -- schema ---------------------------------------------------------------

    def apply_schema_change(self, change: dict) -> None:
        with self.lock.write():
            self.catalog.validate_change(change)
            self._commit("SchemaChange", change)

    def define_schema(self, schema: dict) -> None:
        """Declare labels and fields from a schema document (see :func:`schema_changes`)."""
        for change in schema_changes(schema):
            self.apply_schema_change(change)

    def add_vertex_label(self, name: str, fields: Mapping[str, Any] | None = None) -> None:
        self.define_schema({"vertex_labels": {name: dict(fields or {})}})

    def add_edge_label(self, name: str, fields: Mapping[str, Any] | None = None) -> None:
        self.define_schema({"edge_labels": {name: dict(fields or {})}})

    def add_field(self, label: str, field: str, ftype: Any, edge: bool = False) -> None:
        from .model import FieldType
        self.apply_schema_change({"action": "add_edge_field" if edge else "add_vertex_field",
                                  "label": label, "field": field,
                                  "type": FieldType.parse(ftype).to_json()})

    def _edge_label_id(self, label: str | int) -> int:
        if isinstance(label, str):
            return self.catalog.edge_label(label).id
        self.catalog.edge_label_by_id(label)
        return int(label)

    # -- graph mutations ------------------------------------------------------

    def create_vertex(self, label: str, props: Mapping[str, Any] | None = None,
                      local_id: int | None = None) -> VertexId:
        with self.lock.write():
            ldef = self.catalog.vertex_label(label)
            if local_id is None:
                local_id = self.next_local.get(ldef.id, 0)
            if not 0 <= int(local_id) < 2**64:
                raise ValueError(f"local id {local_id} out of range")
            v = VertexId(ldef.id, int(local_id))
            if self.engine.has_vertex(v):
                raise DuplicateVertex(f"vertex {label}:{local_id} already exists")
            clean = {f: self._check_field(ldef, f, x) for f, x in (props or {}).items()}
            payload = {"v": encode_vid(v),
                       "props": {f: encode_value(x) for f, x in clean.items() if x is not None}}
            return self._commit("CreateVertex", payload)

    def _check_field(self, ldef, field: str, value: Any) -> Any:
        from .model import check_value
        return check_value(ldef.field_type(field), value)

    def delete_vertex(self, v: VertexId) -> None:
        v = _as_vid(v)
        with self.lock.write():
            self.engine.require_vertex(v)
            self._commit("DeleteVertex", {"v": encode_vid(v)})

    def insert_edge(self, src: VertexId, dst: VertexId, edge_label: str | int,
                    edge_id: int = 0, props: Mapping[str, Any] | None = None) -> bool:
        """Add ``src -[edge_label, edge_id]-> dst``; False if that exact edge exists."""
        src, dst = _as_vid(src), _as_vid(dst)
        with self.lock.write():
            label = self._edge_label_id(edge_label)
            self.engine.require_vertex(src)
            self.engine.require_vertex(dst)
            if self.engine.topology.has_edge(src, dst, label, edge_id):
                return False
            ldef = self.catalog.edge_label_by_id(label)
            clean = {f: self._check_field(ldef, f, x) for f, x in (props or {}).items()}
            return self._commit("InsertEdge", {
                "src": encode_vid(src), "dst": encode_vid(dst), "label": label, "id": int(edge_id),
                "props": {f: encode_value(x) for f, x in clean.items() if x is not None}})

    def create_edge(self, src: VertexId, edge_label: str | int, dst: VertexId,
                    props: Mapping[str, Any] | None = None, edge_id: int | None = None) -> EdgeRef:
        """Insert an edge with a fresh edge id (or the given one) and return its ref."""
        with self.lock.write():
            eid = self.next_edge_id if edge_id is None else int(edge_id)
            label = self._edge_label_id(edge_label)
            if not self.insert_edge(src, dst, label, eid, props):
                raise DuplicateVertex(f"edge {src}-[{label}:{eid}]->{dst} already exists")
            return EdgeRef(_as_vid(src), label, _as_vid(dst), eid)

    def remove_edge(self, src: VertexId, dst: VertexId, edge_label: str | int,
                    edge_id: int = 0) -> bool:
        src, dst = _as_vid(src), _as_vid(dst)
        with self.lock.write():
            label = self._edge_label_id(edge_label)
            if not self.engine.topology.has_edge(src, dst, label, edge_id):
                return False
            return self._commit("RemoveEdge", {"src": encode_vid(src), "dst": encode_vid(dst),
                                               "label": label, "id": int(edge_id)})

    def set_attribute(self, owner: Hashable, field: str, value: Any) -> None:
        with self.lock.write():
            clean = self.engine.validate_attribute(owner, field, value)
            self._commit("SetAttribute", {"owner": _enc_owner(owner), "field": field,
                                          "value": encode_value(clean)})

    def bulk_insert_edges(self, edge_label: str | int, src: np.ndarray, dst: np.ndarray,
                          edge_ids: np.ndarray | None = None) -> int:
        """Fast ingestion for in-memory databases (no WAL).

        Persistent databases go through :meth:`insert_edge` per edge so that
        every edge is logged.
        """
        with self.lock.write():
            label = self._edge_label_id(edge_label)
            src = np.asarray(src).reshape(-1, 2)
            if edge_ids is None:
                edge_ids = np.arange(self.next_edge_id, self.next_edge_id + len(src), dtype=np.uint64)
            if self.wal is not None:
                count = 0
                for s, d, e in zip(src.tolist(), np.asarray(dst).reshape(-1, 2).tolist(),
                                   np.asarray(edge_ids).tolist()):
                    count += self.insert_edge(VertexId(*s), VertexId(*d), label, int(e))
                return count
            n = self.engine.bulk_insert_edges(label, src, dst, edge_ids)
            if len(edge_ids):
                self.next_edge_id = max(self.next_edge_id, int(np.max(edge_ids)) + 1)
            return n

    def bulk_create_vertices(self, label: str, local_ids: Iterable[int],
                             props: Mapping[str, Sequence[Any]] | None = None) -> int:
        """Create many vertices of one label; ``props`` maps field -> column of values."""
        ids = list(local_ids)
        cols = {f: list(vals) for f, vals in (props or {}).items()}
        with self.lock.write():
            for i, local in enumerate(ids):
                self.create_vertex(label, {f: c[i] for f, c in cols.items()}, local)
        return len(ids)

    # -- graph reads ----------------------------------------------------------

    def get_attribute(self, owner: Hashable, field: str) -> Any:
        with self.lock.read():
            return self.engine.get_attribute(owner, field)

    def neighbors(self, v: VertexId, direction: str = OUT, edge_label: str | int | None = None
                  ) -> list[EdgeKey]:
        with self.lock.read():
            label = None if edge_label is None else self._edge_label_id(edge_label)
            return list(self.engine.neighbors(_as_vid(v), direction, label))

    def degree(self, v: VertexId, direction: str = OUT) -> int:
        return self.engine.degree(_as_vid(v), direction)

    def has_vertex(self, v: VertexId) -> bool:
        return self.engine.has_vertex(_as_vid(v))

    def vertex(self, label: str, local_id: int) -> VertexId:
        return VertexId(self.catalog.vertex_label(label).id, int(local_id))

    def memory_footprint(self) -> FootprintReport:
        with self.lock.read():
            return self.engine.memory_footprint()

    # -- vector collections ---------------------------------------------------

    def collection(self, name: str) -> VectorCollection:
        try:
            return self.collections[name]
        except KeyError:
            raise UnknownCollection(f"unknown collection {name!r}") from None

    def create_collection(self, name: str, dimension: int, metric: str = "cosine",
                          hnsw_params: HnswParams | Mapping[str, Any] | None = None,
                          *, seal_threshold: int | None = None,
                          bind: tuple[str, str] | None = None) -> None:
        """Register an empty collection, optionally mirroring ``bind=(label, field)``."""
        from .errors import BadDimension
        if not isinstance(dimension, (int, np.integer)) or dimension < 1:
            raise BadDimension(f"dimension must be a positive integer, got {dimension!r}")
        metric = check_metric(metric)
        if hnsw_params is None:
            params = HnswParams()
        elif isinstance(hnsw_params, HnswParams):
            params = hnsw_params
        else:
            params = HnswParams(**dict(hnsw_params))
        if params.m < 2 or params.ef_construction < 1:
            raise ValueError("hnsw m must be >= 2 and ef_construction >= 1")
        with self.lock.write():
            if name in self.collections:
                raise DuplicateCollection(f"collection {name!r} already exists")
            binding = None
            if bind is not None:
                label, field = bind
                ftype = self.catalog.vertex_label(label).field_type(field)
                if ftype.kind != "vector":
                    raise SchemaError(f"{label}.{field} is not a vector field")
                if ftype.dim != dimension:
                    raise DimensionMismatch(f"{label}.{field} has dimension {ftype.dim}, index says {dimension}")
                if self.catalog.index_on(label, field) is not None:
                    raise DuplicateCollection(f"{label}.{field} already has a vector index")
                binding = {"label": label, "field": field}
            self._commit("CreateCollection", {
                "name": name, "dimension": int(dimension), "metric": metric,
                "params": params.to_json(),
                "seal_threshold": seal_threshold or self.seal_threshold, "binding": binding})

    def create_vector_index(self, name: str, label: str, field: str, metric: str = "cosine",
                            hnsw_params: HnswParams | Mapping[str, Any] | None = None, **kw) -> None:
        ftype = self.catalog.vertex_label(label).field_type(field)
        if ftype.kind != "vector":
            raise SchemaError(f"{label}.{field} is not a vector field")
        self.create_collection(name, ftype.dim, metric, hnsw_params, bind=(label, field), **kw)

    def delete_collection(self, name: str) -> None:
        with self.lock.write():
            self.collection(name)
            self._commit("DeleteCollection", {"name": name})

    def list_collections(self) -> list[str]:
        return sorted(self.collections)

    def bulk_upsert(self, collection: str, points: Iterable[Point | tuple]) -> int:
        """Insert or replace points; the whole batch is validated first."""
        pts = [p if isinstance(p, Point) else Point(*p) for p in points]
        with self.lock.write():
            coll = self.collection(collection)
            checked = coll.validate(pts)
            binding = self.catalog.indexes.get(collection)
            if binding is not None:
                ldef = self.catalog.vertex_label(binding.label)
                for key, _, _ in checked:
                    if key.label_id != ldef.id or not self.engine.has_vertex(key):
                        raise UnknownVertex(f"{key} is not a {binding.label!r} vertex")
            total = 0
            for i in range(0, len(checked), UPSERT_CHUNK):
                chunk = checked[i:i + UPSERT_CHUNK]
                self._commit("UpsertPoints", {"collection": collection, "points": [
                    [encode_vid(k), encode_value(v), {f: encode_value(x) for f, x in pl.items()}]
                    for k, v, pl in chunk]})
                total += len(chunk)
            return total

    def delete_points(self, collection: str, keys: Iterable[VertexId]) -> int:
        keys = [_as_vid(k) for k in keys]
        with self.lock.write():
            coll = self.collection(collection)
            present = [k for k in keys if k in coll.locations]
            if not present:
                return 0
            return self._commit("DeletePoints", {"collection": collection,
                                                 "keys": [encode_vid(k) for k in present]})

    def knn_search(self, collection: str, query: Any, k: int, ef_search: int | None = None,
                   filter: Sequence[Condition] | None = None) -> list[ScoredHit]:
        with self.lock.read():
            return self.collection(collection).search(query, k, ef_search, filter)

    def compact(self, collection: str) -> list[int]:
        """Merge tombstone-heavy segments now (logical content is unchanged)."""
        with self.lock.write():
            return self.collection(collection).compact()

    def submit_compaction(self, collection: str) -> Future:
        """Run :meth:`compact` as a background job."""
        if self._jobs is None:
            self._jobs = ThreadPoolExecutor(max_workers=1, thread_name_prefix="arcforge-job")
        return self._jobs.submit(self.compact, collection)

    # -- queries --------------------------------------------------------------

    def query(self, text: str, params: Mapping[str, Any] | None = None, *,
              batch_size: int | None = None, workers: int | None = None,
              optimize: bool = True, ef_search: int | None = None):
        """Run one statement; returns a :class:`~arcforge.query.QueryResult`."""
        from .query import run_query
        return run_query(self, text, dict(params or {}), batch_size=batch_size or self.batch_size,
                         workers=workers or self.workers, optimize=optimize, ef_search=ef_search)

    def explain(self, text: str, params: Mapping[str, Any] | None = None,
                optimize: bool = True) -> str:
        from .query import explain
        return explain(self, text, dict(params or {}), optimize)

    # -- persistence ----------------------------------------------------------

    def checkpoint(self) -> int:
        """Write a full state image at the current lsn; returns that lsn."""
        if self.path is None:
            raise RuntimeError("in-memory database has nothing to checkpoint")
        with self.lock.write():
            for coll in self.collections.values():
                coll.flush_segments()
            lsn = self.applied_lsn
            if lsn == self.checkpoint_lsn and ckpt.current_lsn(self.path) == lsn:
                return lsn
            content = ckpt.CheckpointContent(
                lsn=lsn,
                catalog=self._catalog_image(lsn),
                write_topology=self._write_topology,
                attribute_rows=list(self._attribute_rows()),
                write_vectors=self._write_vectors,
            )
            ckpt.write_checkpoint(self.path, content)
            self.checkpoint_lsn = lsn
            return lsn

    def prune(self, upto_lsn: int) -> None:
        if upto_lsn <= 0 or self.wal is None:
            return
        if upto_lsn > self.checkpoint_lsn:
            raise PruneBeyondCheckpoint(
                f"cannot prune to {upto_lsn}: latest checkpoint is at {self.checkpoint_lsn}")
        self.wal.prune(upto_lsn)

    def _catalog_image(self, lsn: int) -> dict:
        return {
            "lsn": lsn,
            "catalog": self.catalog.to_json(),
            "next_edge_id": self.next_edge_id,
            "next_local": {str(k): v for k, v in sorted(self.next_local.items())},
            "threshold": self.engine.threshold,
        }

    def _write_topology(self, path: Path) -> None:
        topo = self.engine.topology
        verts = np.array([(v[0], v[1]) for v in topo.vertices()], dtype=np.uint64).reshape(-1, 2)
        edges = np.array([(s[0], s[1], lab, d[0], d[1], e) for s, lab, d, e in topo.edges()],
                         dtype=np.uint64).reshape(-1, 6)
        large = []
        for code, side in ((0, topo.forward), (1, topo.reverse)):
            for v, by_label in side.items():
                for lab, coll in by_label.items():
                    if coll.representation == "large":
                        large.append((v[0], v[1], code, lab))
        large_arr = np.array(large, dtype=np.uint64).reshape(-1, 4)
        with open(path, "wb") as fh:
            np.savez(fh, vertices=verts, edges=edges, large=large_arr)

    def _attribute_rows(self):
        rows = []
        for (owner, field), value in self.engine.store.items():
            if value is not None:
                rows.append(["attr", _enc_owner(owner), field, encode_value(value)])
        rows.sort(key=lambda r: (str(r[1]), r[2]))
        yield from rows
        for name in sorted(self.collections):
            coll = self.collections[name]
            for key in sorted(coll.payload.payloads):
                payload = coll.payload.payloads[key]
                yield ["payload", name, encode_vid(key), {f: encode_value(x) for f, x in payload.items()}]

    def _write_vectors(self, directory: Path) -> list[str]:
        directory.mkdir(parents=True, exist_ok=True)
        names = []
        for name in sorted(self.collections):
            self.collections[name].save(directory / name)
            names.append(name)
        return names

    def _load_checkpoint(self, path: Path) -> int:
        manifest = ckpt.verify(path)
        import json
        image = json.loads((path / "catalog.json").read_text())
        self._reset_state()
        self.catalog = Catalog.from_json(image["catalog"])
        self.engine = MemEngine(self.catalog, self.threshold, self.cache_capacity)
        self.next_edge_id = int(image["next_edge_id"])
        self.next_local = {int(k): int(v) for k, v in image["next_local"].items()}
        with np.load(path / "topology_image.npz") as z:
            verts, edges, large = z["vertices"], z["edges"], z["large"]
        for lab, loc in verts.tolist():
            self.engine.create_vertex(VertexId(lab, loc))
        if len(edges):
            for lab in np.unique(edges[:, 2]).tolist():
                sel = edges[edges[:, 2] == lab]
                self.engine.bulk_insert_edges(int(lab), sel[:, 0:2], sel[:, 3:5], sel[:, 5])
        topo = self.engine.topology
        for vl, vn, code, lab in large.tolist():
            side = topo.forward if code == 0 else topo.reverse
            side[VertexId(vl, vn)][lab].upgrade()
        payloads: dict[str, dict[VertexId, dict]] = {}
        for row in ckpt.read_lines(path / "attribute_image.jsonl"):
            if row[0] == "attr":
                self.engine.store.put(_dec_owner(row[1]), row[2], decode_value(row[3]))
            elif row[0] == "payload":
                payloads.setdefault(row[1], {})[decode_vid(row[2])] = {
                    f: decode_value(x) for f, x in row[3].items()}
        for name in manifest.get("vector_manifest", []):
            self.collections[name] = VectorCollection.load(path / "vectors" / name,
                                                           payloads.get(name, {}))
        return int(manifest["lsn"])

    def _recover(self, use_checkpoint: bool) -> None:
        base = 0
        loaded = False
        if use_checkpoint:
            for cand in ckpt.candidates(self.path):
                try:
                    base = self._load_checkpoint(cand)
                    loaded = True
                    break
                except (CorruptCheckpoint, OSError, ValueError, KeyError) as exc:
                    log.warning("checkpoint %s unusable (%s); trying older state", cand.name, exc)
                    self._reset_state()
        if not loaded:
            self._reset_state()
            base = 0
            if self.wal.first_lsn > 1:
                raise CorruptCheckpoint(
                    "no usable checkpoint and the WAL no longer starts at lsn 1")
        if self.wal.last_lsn < base:
            # the log lost records the checkpoint already covers; continue after it
            log.warning("WAL ends at lsn %d before checkpoint %d; restarting the log",
                        self.wal.last_lsn, base)
            self.wal.reset(base + 1)
        self.checkpoint_lsn = base if loaded else 0
        self.applied_lsn = base
        for rec in self.wal.records(after_lsn=base):
            self._apply(rec.op, rec.payload)
            self.applied_lsn = rec.lsn

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._jobs is not None:
            self._jobs.shutdown(wait=True)
        if self.wal is not None:
            self.wal.close()

    def crash(self) -> None:
        """Simulate abrupt process death: no sync, no checkpoint, handle dropped."""
        self._closed = True
        if self.wal is not None:
            self.wal.abandon()

    # -- introspection --------------------------------------------------------

    def state_digest(self) -> dict:
        """Canonical logical state, for equality checks between engines."""
        with self.lock.read():
            topo = self.engine.topology
            attrs = sorted(((repr(o), f), canonical(v)) for (o, f), v in self.engine.store.items()
                           if v is not None)
            return {
                "catalog": self.catalog.to_json(),
                "vertices": sorted(topo.vertices()),
                "edges": sorted(topo.edges()),
                "degrees": sorted((v, topo.out_degree[v], topo.in_degree[v]) for v in topo.vertices()),
                "attributes": attrs,
                "collections": {n: c.digest() for n, c in sorted(self.collections.items())},
            }

    def stats(self) -> dict:
        with self.lock.read():
            topo = self.engine.topology
            fp = self.engine.memory_footprint()
            return {
                "vertices": len(topo),
                "edges": topo.edge_count,
                "labels": {name: self.engine.label_count(d.id)
                           for name, d in self.catalog.vertex_labels.items()},
                "collections": {n: c.describe() for n, c in sorted(self.collections.items())},
                "footprint": fp.as_dict(),
                "threshold": self.engine.threshold,
                "cache": {"capacity": self.engine.cache.capacity, "entries": len(self.engine.cache),
                          "hits": self.engine.cache.hits, "misses": self.engine.cache.misses},
                "applied_lsn": self.applied_lsn,
                "checkpoint_lsn": self.checkpoint_lsn,
            }
