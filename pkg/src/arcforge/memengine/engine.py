"""MemEngine: fully in-memory topology plus cached attribute access."""

from __future__ import annotations

from typing import Any, Hashable, Iterator

import numpy as np

from ..catalog import Catalog, LabelDef
from ..errors import UnknownVertex
from ..model import EdgeKey, EdgeRef, VertexId, check_value
from .cache import DEFAULT_CACHE_CAPACITY, MISSING, AttributeCache, AttributeStore
from .edges import DEFAULT_THRESHOLD
from .topology import OUT, FootprintReport, GraphTopology


class MemEngine:
    def __init__(self, catalog: Catalog, threshold: int | None = DEFAULT_THRESHOLD,
                 cache_capacity: int = DEFAULT_CACHE_CAPACITY):
        self.catalog = catalog
        self.topology = GraphTopology(threshold)
        self.store = AttributeStore()
        self.cache = AttributeCache(cache_capacity)
        # label id -> local ids in creation order (dict keeps order, O(1) delete)
        self._by_label: dict[int, dict[int, None]] = {}

    @property
    def threshold(self) -> int | None:
        return self.topology.threshold

    # -- vertices -------------------------------------------------------------

    def has_vertex(self, v: VertexId) -> bool:
        return v in self.topology

    def require_vertex(self, v: VertexId) -> None:
        if v not in self.topology:
            raise UnknownVertex(f"unknown vertex {v}")

    def create_vertex(self, v: VertexId) -> bool:
        if not self.topology.add_vertex(v):
            return False
        self._by_label.setdefault(v.label_id, {})[v.local_id] = None
        return True

    def delete_vertex(self, v: VertexId) -> list[tuple[VertexId, int, VertexId, int]]:
        removed = self.topology.remove_vertex(v)
        for src, label, dst, eid in removed:
            self._drop_owner(EdgeRef(src, label, dst, eid))
        self._drop_owner(v)
        del self._by_label[v.label_id][v.local_id]
        return removed

    def scan(self, label_id: int) -> Iterator[VertexId]:
        for local in list(self._by_label.get(label_id, ())):
            yield VertexId(label_id, local)

    def label_count(self, label_id: int) -> int:
        return len(self._by_label.get(label_id, ()))

    def vertex_count(self) -> int:
        return len(self.topology)

    def vertices(self) -> Iterator[VertexId]:
        return self.topology.vertices()

    # -- edges ----------------------------------------------------------------

    def insert_edge(self, src: VertexId, dst: VertexId, label: int, edge_id: int) -> bool:
        return self.topology.insert_edge(src, dst, label, edge_id)

    def remove_edge(self, src: VertexId, dst: VertexId, label: int, edge_id: int) -> bool:
        if not self.topology.remove_edge(src, dst, label, edge_id):
            return False
        self._drop_owner(EdgeRef(src, label, dst, edge_id))
        return True

    def neighbors(self, v: VertexId, direction: str = OUT, label: int | None = None
                  ) -> Iterator[EdgeKey]:
        return self.topology.neighbors(v, direction, label)

    def degree(self, v: VertexId, direction: str = OUT) -> int:
        return self.topology.degree(v, direction)

    def bulk_insert_edges(self, label: int, src: np.ndarray, dst: np.ndarray,
                          edge_ids: np.ndarray) -> int:
        return self.topology.bulk_insert(label, src, dst, edge_ids)

    # -- attributes -----------------------------------------------------------

    def owner_def(self, owner: Hashable) -> LabelDef:
        if isinstance(owner, EdgeRef):
            return self.catalog.edge_label_by_id(owner.edge_label_id)
        return self.catalog.vertex_label_by_id(owner[0])

    def require_owner(self, owner: Hashable) -> None:
        if isinstance(owner, EdgeRef):
            if not self.topology.has_edge(owner.src, owner.dst, owner.edge_label_id, owner.edge_id):
                raise UnknownVertex(f"unknown edge {owner}")
        else:
            self.require_vertex(owner)

    def get_attribute(self, owner: Hashable, field: str) -> Any:
        """Validated read through the LRU cache."""
        self.require_owner(owner)
        self.owner_def(owner).field_type(field)
        return self.read_attribute(owner, field)

    def read_attribute(self, owner: Hashable, field: str) -> Any:
        key = (owner, field)
        value = self.cache.lookup(key)
        if value is MISSING:
            value = self.store.get(owner, field)
            self.cache.insert(key, value)
        return value

    def validate_attribute(self, owner: Hashable, field: str, value: Any) -> Any:
        self.require_owner(owner)
        return check_value(self.owner_def(owner).field_type(field), value)

    def put_attribute(self, owner: Hashable, field: str, value: Any) -> None:
        """Write an already validated value to the store, then the cache."""
        self.store.put(owner, field, value)
        self.cache.update_if_present((owner, field), value)

    def _drop_owner(self, owner: Hashable) -> None:
        fields = self.store.delete_owner(owner)
        self.cache.invalidate_owner(owner, fields)

    # -- accounting -----------------------------------------------------------

    def memory_footprint(self) -> FootprintReport:
        report = self.topology.footprint()
        report.cache_bytes = self.cache.nbytes()
        return report
