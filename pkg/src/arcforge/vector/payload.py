"""Payload storage and filter predicates for vector collections.

The index is an ordered key-value structure per field holding
``(value, point_key)`` pairs, so equality and range tests are bisections.
Predicates are conjunctions of :class:`Condition`.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Any, Iterable

from sortedcontainers import SortedList

from ..errors import TypeMismatch
from ..model import VertexId

_OPS = {
    "=": operator.eq, "==": operator.eq, "<>": operator.ne, "!=": operator.ne,
    "<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}
_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "==": "==", "<>": "<>", "!=": "!="}


def _kind(value: Any) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return "text"
    if isinstance(value, (bool, int, float)):
        return "number"
    raise TypeMismatch(f"payload values must be scalar or text, got {type(value).__name__}")


@dataclass(frozen=True)
class Condition:
    field: str
    op: str
    value: Any

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported payload operator {self.op!r}")

    def flipped(self) -> "Condition":
        return Condition(self.field, _FLIP[self.op], self.value)

    def matches(self, payload: dict) -> bool:
        v = payload.get(self.field)
        if v is None or self.value is None or _kind(v) != _kind(self.value):
            return False
        return _OPS[self.op](v, self.value)

    def __str__(self) -> str:
        return f"{self.field} {self.op} {self.value!r}"


Filter = tuple[Condition, ...]


def matches(filt: Iterable[Condition], payload: dict) -> bool:
    return all(c.matches(payload) for c in filt)


class PayloadIndex:
    def __init__(self) -> None:
        self._fields: dict[str, SortedList] = {}
        self._kinds: dict[str, str] = {}
        self.payloads: dict[VertexId, dict[str, Any]] = {}

    def check(self, payload: dict[str, Any]) -> dict[str, Any]:
        """Validate payload types without changing state; returns a copy."""
        out = {}
        for f, v in payload.items():
            kind = _kind(v)
            have = self._kinds.get(f)
            if kind is not None and have is not None and have != kind:
                raise TypeMismatch(f"payload field {f!r} holds {have} values, got {v!r}")
            out[str(f)] = v
        return out

    def set(self, key: VertexId, payload: dict[str, Any]) -> None:
        self.remove(key)
        payload = self.check(payload)
        self.payloads[key] = payload
        for f, v in payload.items():
            kind = _kind(v)
            if kind is None:
                continue
            self._kinds.setdefault(f, kind)
            self._fields.setdefault(f, SortedList()).add((v, key))

    def update_field(self, key: VertexId, field: str, value: Any) -> None:
        payload = dict(self.payloads.get(key, {}))
        if value is None:
            payload.pop(field, None)
        else:
            payload[field] = value
        self.set(key, payload)

    def remove(self, key: VertexId) -> None:
        old = self.payloads.pop(key, None)
        if not old:
            return
        for f, v in old.items():
            if v is not None:
                self._fields[f].remove((v, key))

    def get(self, key: VertexId) -> dict[str, Any]:
        return self.payloads.get(key, {})

    def __len__(self) -> int:
        return len(self.payloads)

    def _select(self, cond: Condition) -> set[VertexId]:
        entries = self._fields.get(cond.field)
        if entries is None or cond.value is None or self._kinds.get(cond.field) != _kind(cond.value):
            return set()
        v = cond.value
        op = cond.op
        lo_key, hi_key = (v,), (v, VertexId(2**16, 0))
        if op in ("=", "=="):
            rng = entries.irange(lo_key, hi_key)
        elif op == "<":
            rng = entries.irange(None, lo_key, inclusive=(True, False))
        elif op == "<=":
            rng = entries.irange(None, hi_key)
        elif op == ">":
            rng = entries.irange(hi_key, None, inclusive=(False, True))
        elif op == ">=":
            rng = entries.irange(lo_key, None)
        else:  # <>
            return {k for val, k in entries if val != v}
        return {k for _, k in rng}

    def select(self, filt: Iterable[Condition]) -> set[VertexId]:
        """Keys whose payload satisfies every condition (all keys if empty)."""
        conds = list(filt)
        if not conds:
            return set(self.payloads)
        result: set[VertexId] | None = None
        # most selective first keeps intermediate sets small
        for cond in sorted(conds, key=lambda c: c.op not in ("=", "==")):
            keys = self._select(cond)
            result = keys if result is None else result & keys
            if not result:
                break
        return result or set()
