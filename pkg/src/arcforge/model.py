"""Core value types shared by every layer: vertex keys, edge keys, property values."""

from __future__ import annotations

import base64
import math
from typing import Any, NamedTuple

import numpy as np

from .errors import DimensionMismatch, TypeMismatch


class VertexId(NamedTuple):
    """Globally unique vertex key; orders lexicographically on (label_id, local_id)."""

    label_id: int
    local_id: int

    def __repr__(self) -> str:
        return f"V({self.label_id}:{self.local_id})"


class EdgeKey(NamedTuple):
    """One entry of an adjacency collection, as seen from the owning vertex.

    Ordering is lexicographic on (edge_label_id, neighbor, edge_id), which is
    the iteration order of every edge collection.
    """

    edge_label_id: int
    neighbor: VertexId
    edge_id: int


class EdgeRef(NamedTuple):
    """Owner key for edge attributes: the source vertex plus its forward EdgeKey."""

    src: VertexId
    edge_label_id: int
    dst: VertexId
    edge_id: int


FIELD_TYPES = ("bool", "int", "float", "text", "json", "vector")
SCALAR_TYPES = ("bool", "int", "float", "text")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class FieldType(NamedTuple):
    kind: str
    dim: int = 0

    @classmethod
    def parse(cls, spec: Any) -> "FieldType":
        """Accept ``"int"``, ``{"type": "vector", "dim": 8}`` or ``"vector(8)"``."""
        if isinstance(spec, FieldType):
            return spec
        if isinstance(spec, dict):
            kind = str(spec.get("type", "")).lower()
            dim = int(spec.get("dim", 0))
        else:
            text = str(spec).strip().lower()
            dim = 0
            if "(" in text and text.endswith(")"):
                text, _, rest = text.partition("(")
                dim = int(rest[:-1])
            kind = {"string": "text", "str": "text", "integer": "int", "double": "float",
                    "boolean": "bool", "array": "vector", "document": "json"}.get(text, text)
        if kind not in FIELD_TYPES:
            raise TypeMismatch(f"unknown field type {spec!r}")
        if kind == "vector" and dim < 1:
            raise DimensionMismatch(f"vector field needs a positive dimension, got {dim}")
        return cls(kind, dim if kind == "vector" else 0)

    def to_json(self) -> Any:
        if self.kind == "vector":
            return {"type": "vector", "dim": self.dim}
        return self.kind

    def __str__(self) -> str:
        return f"vector({self.dim})" if self.kind == "vector" else self.kind


def as_vector(value: Any, dim: int | None = None) -> np.ndarray:
    """Coerce a sequence of numbers to a read-only float32 vector."""
    try:
        arr = np.asarray(value, dtype=np.float32)
    except (TypeError, ValueError) as exc:
        raise TypeMismatch(f"not a numeric vector: {value!r}") from exc
    if arr.ndim != 1:
        raise TypeMismatch(f"vector must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {arr.shape[0]}")
    if arr.base is not None or arr.flags.writeable:
        arr = arr.copy()
    arr.flags.writeable = False
    return arr


def check_value(ftype: FieldType, value: Any) -> Any:
    """Validate ``value`` against ``ftype`` and return its canonical stored form."""
    if value is None:
        return None
    kind = ftype.kind
    if kind == "bool":
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
    elif kind == "int":
        if isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_)):
            value = int(value)
            if INT64_MIN <= value <= INT64_MAX:
                return value
            raise TypeMismatch(f"integer {value} out of Int64 range")
    elif kind == "float":
        if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
            return float(value)
    elif kind == "text":
        if isinstance(value, str):
            return value
    elif kind == "json":
        _check_json(value)
        return value
    elif kind == "vector":
        if isinstance(value, (str, bytes, dict)):
            raise TypeMismatch(f"expected vector({ftype.dim}), got {type(value).__name__}")
        return as_vector(value, ftype.dim)
    raise TypeMismatch(f"expected {ftype}, got {type(value).__name__} {value!r}")


def _check_json(value: Any) -> None:
    if value is None or isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise TypeMismatch("JSON documents cannot hold NaN or infinity")
        return
    if isinstance(value, list):
        for item in value:
            _check_json(item)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeMismatch("JSON object keys must be strings")
            _check_json(item)
        return
    raise TypeMismatch(f"not a JSON value: {type(value).__name__}")


def values_equal(a: Any, b: Any) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        if not (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)):
            return False
        return a.shape == b.shape and a.tobytes() == b.tobytes()
    return type(a) is type(b) and a == b


# -- wire encoding (WAL payloads, checkpoint images) ---------------------------


def encode_value(value: Any) -> Any:
    """Map a property value to a JSON-safe form that round-trips bit-exactly."""
    if isinstance(value, np.ndarray):
        raw = np.ascontiguousarray(value, dtype="<f4").tobytes()
        return {"$vec": base64.b64encode(raw).decode("ascii")}
    if isinstance(value, (dict, list)):
        return {"$json": value}
    if isinstance(value, float) and not math.isfinite(value):
        return {"$float": repr(value)}
    return value


def decode_value(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "$vec" in obj:
            arr = np.frombuffer(base64.b64decode(obj["$vec"]), dtype="<f4").astype(np.float32)
            arr.flags.writeable = False
            return arr
        if "$json" in obj:
            return obj["$json"]
        if "$float" in obj:
            return float(obj["$float"])
    return obj


def encode_vid(v: VertexId) -> list[int]:
    return [v[0], v[1]]


def decode_vid(obj: Any) -> VertexId:
    return VertexId(int(obj[0]), int(obj[1]))


def canonical(value: Any) -> Any:
    """Hashable, comparable form of a value, used by state digests and tests."""
    if isinstance(value, np.ndarray):
        return ("vec", value.astype("<f4").tobytes())
    if isinstance(value, dict):
        return ("json", tuple(sorted((k, canonical(v)) for k, v in value.items())))
    if isinstance(value, list):
        return ("list", tuple(canonical(v) for v in value))
    return value
