"""Attribute storage with an LRU cache in front of it."""

from __future__ import annotations

import sys
import threading
from collections import OrderedDict
from typing import Any, Hashable, Iterator

DEFAULT_CACHE_CAPACITY = 100_000

_MISSING = object()


class AttributeStore:
    """Backing key-value store for vertex and edge attributes.

    Keys are ``(owner, field_name)`` where the owner is a VertexId or an
    EdgeRef.  This is the state captured by the checkpoint attribute image.
    """

    def __init__(self) -> None:
        self._data: dict[tuple[Hashable, str], Any] = {}
        self._by_owner: dict[Hashable, set[str]] = {}
        self.reads = 0

    def get(self, owner: Hashable, field: str, default: Any = None) -> Any:
        self.reads += 1
        return self._data.get((owner, field), default)

    def put(self, owner: Hashable, field: str, value: Any) -> None:
        self._data[(owner, field)] = value
        self._by_owner.setdefault(owner, set()).add(field)

    def delete_owner(self, owner: Hashable) -> list[str]:
        fields = self._by_owner.pop(owner, set())
        for f in fields:
            self._data.pop((owner, f), None)
        return sorted(fields)

    def fields_of(self, owner: Hashable) -> list[str]:
        return sorted(self._by_owner.get(owner, ()))

    def items(self) -> Iterator[tuple[tuple[Hashable, str], Any]]:
        return iter(self._data.items())

    def __len__(self) -> int:
        return len(self._data)


class AttributeCache:
    """Entry-count bounded LRU cache of attribute values."""

    def __init__(self, capacity: int = DEFAULT_CACHE_CAPACITY):
        if capacity < 1:
            raise ValueError("cache capacity must be positive")
        self.capacity = capacity
        self._entries: OrderedDict[tuple[Hashable, str], Any] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def lookup(self, key: tuple[Hashable, str]) -> Any:
        """Return the cached value or the module-level ``MISSING`` sentinel."""
        with self._lock:
            value = self._entries.get(key, _MISSING)
            if value is _MISSING:
                self.misses += 1
                return _MISSING
            self._entries.move_to_end(key)
            self.hits += 1
            return value

    def insert(self, key: tuple[Hashable, str], value: Any) -> None:
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def update_if_present(self, key: tuple[Hashable, str], value: Any) -> None:
        with self._lock:
            if key in self._entries:
                self._entries[key] = value

    def invalidate_owner(self, owner: Hashable, fields: list[str]) -> None:
        with self._lock:
            for f in fields:
                self._entries.pop((owner, f), None)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __contains__(self, key: tuple[Hashable, str]) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def nbytes(self) -> int:
        return sys.getsizeof(self._entries)


MISSING = _MISSING
