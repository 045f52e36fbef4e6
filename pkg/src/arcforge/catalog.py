"""Schema catalog: vertex labels, edge labels, typed fields, vector index bindings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import SchemaError, UnknownField, UnknownLabel
from .model import FieldType

MAX_LABELS = 2**16


@dataclass
class LabelDef:
    name: str
    id: int
    fields: dict[str, FieldType] = field(default_factory=dict)

    def field_type(self, name: str) -> FieldType:
        try:
            return self.fields[name]
        except KeyError:
            raise UnknownField(f"label {self.name!r} has no field {name!r}") from None

    def to_json(self) -> dict:
        return {"name": self.name, "id": self.id,
                "fields": {k: v.to_json() for k, v in self.fields.items()}}


@dataclass
class IndexBinding:
    """A VECTOR index: collection ``name`` mirrors ``label.field`` of every vertex."""

    name: str
    label: str
    field: str


class Catalog:
    def __init__(self) -> None:
        self.vertex_labels: dict[str, LabelDef] = {}
        self.edge_labels: dict[str, LabelDef] = {}
        self._vertex_by_id: dict[int, LabelDef] = {}
        self._edge_by_id: dict[int, LabelDef] = {}
        self.indexes: dict[str, IndexBinding] = {}

    # -- lookups --------------------------------------------------------------

    def vertex_label(self, name: str) -> LabelDef:
        try:
            return self.vertex_labels[name]
        except KeyError:
            raise UnknownLabel(f"unknown vertex label {name!r}") from None

    def edge_label(self, name: str) -> LabelDef:
        try:
            return self.edge_labels[name]
        except KeyError:
            raise UnknownLabel(f"unknown edge label {name!r}") from None

    def vertex_label_by_id(self, label_id: int) -> LabelDef:
        try:
            return self._vertex_by_id[label_id]
        except KeyError:
            raise UnknownLabel(f"unknown vertex label id {label_id}") from None

    def edge_label_by_id(self, label_id: int) -> LabelDef:
        try:
            return self._edge_by_id[label_id]
        except KeyError:
            raise UnknownLabel(f"unknown edge label id {label_id}") from None

    def index_on(self, label: str, field_name: str) -> IndexBinding | None:
        for binding in self.indexes.values():
            if binding.label == label and binding.field == field_name:
                return binding
        return None

    def indexes_for_label(self, label: str) -> list[IndexBinding]:
        return [b for b in self.indexes.values() if b.label == label]

    def payload_fields(self, label: str) -> list[str]:
        """Fields of ``label`` mirrored into a vector collection's payload."""
        ldef = self.vertex_label(label)
        return sorted(k for k, t in ldef.fields.items() if t.kind in ("bool", "int", "float", "text"))

    # -- changes (each is a SchemaChange WAL payload) -------------------------

    def validate_change(self, change: dict) -> None:
        """Raise if :meth:`apply` would fail, without mutating anything."""
        action = change.get("action")
        if action in ("add_vertex_label", "add_edge_label"):
            table = self.vertex_labels if action == "add_vertex_label" else self.edge_labels
            name = change["name"]
            if not isinstance(name, str) or not name:
                raise SchemaError(f"bad label name {name!r}")
            if name in table:
                raise SchemaError(f"label {name!r} already exists")
            if len(table) >= MAX_LABELS:
                raise SchemaError("too many labels")
            for ftype in change.get("fields", {}).values():
                FieldType.parse(ftype)
        elif action in ("add_vertex_field", "add_edge_field"):
            ldef = (self.vertex_label if action == "add_vertex_field" else self.edge_label)(change["label"])
            if change["field"] in ldef.fields:
                raise SchemaError(f"field {change['field']!r} already exists on {ldef.name!r}")
            FieldType.parse(change["type"])
        elif action == "bind_index":
            ldef = self.vertex_label(change["label"])
            ftype = ldef.field_type(change["field"])
            if ftype.kind != "vector":
                raise SchemaError(f"{change['label']}.{change['field']} is not a vector field")
        elif action == "unbind_index":
            pass
        else:
            raise SchemaError(f"unknown schema change {action!r}")

    def apply(self, change: dict) -> None:
        self.validate_change(change)
        action = change["action"]
        if action == "add_vertex_label":
            ldef = LabelDef(change["name"], len(self.vertex_labels),
                            {k: FieldType.parse(v) for k, v in change.get("fields", {}).items()})
            self.vertex_labels[ldef.name] = ldef
            self._vertex_by_id[ldef.id] = ldef
        elif action == "add_edge_label":
            ldef = LabelDef(change["name"], len(self.edge_labels),
                            {k: FieldType.parse(v) for k, v in change.get("fields", {}).items()})
            self.edge_labels[ldef.name] = ldef
            self._edge_by_id[ldef.id] = ldef
        elif action == "add_vertex_field":
            self.vertex_label(change["label"]).fields[change["field"]] = FieldType.parse(change["type"])
        elif action == "add_edge_field":
            self.edge_label(change["label"]).fields[change["field"]] = FieldType.parse(change["type"])
        elif action == "bind_index":
            self.indexes[change["name"]] = IndexBinding(change["name"], change["label"], change["field"])
        elif action == "unbind_index":
            self.indexes.pop(change["name"], None)

    # -- (de)serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertex_labels": [d.to_json() for d in sorted(self.vertex_labels.values(), key=lambda d: d.id)],
            "edge_labels": [d.to_json() for d in sorted(self.edge_labels.values(), key=lambda d: d.id)],
            "indexes": [{"name": b.name, "label": b.label, "field": b.field}
                        for b in sorted(self.indexes.values(), key=lambda b: b.name)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Catalog":
        cat = cls()
        for d in obj.get("vertex_labels", []):
            ldef = LabelDef(d["name"], int(d["id"]), {k: FieldType.parse(v) for k, v in d["fields"].items()})
            cat.vertex_labels[ldef.name] = ldef
            cat._vertex_by_id[ldef.id] = ldef
        for d in obj.get("edge_labels", []):
            ldef = LabelDef(d["name"], int(d["id"]), {k: FieldType.parse(v) for k, v in d["fields"].items()})
            cat.edge_labels[ldef.name] = ldef
            cat._edge_by_id[ldef.id] = ldef
        for b in obj.get("indexes", []):
            cat.indexes[b["name"]] = IndexBinding(b["name"], b["label"], b["field"])
        return cat


def schema_changes(schema: dict[str, Any]) -> list[dict]:
    """Expand a user schema document into an ordered list of schema changes.

    Accepted shape::

        {"vertex_labels": {"person": {"firstName": "text", "emb": "vector(64)"}},
         "edge_labels": {"knows": {"since": "int"}}}
    """
    changes = []
    for kind in ("vertex_labels", "edge_labels"):
        action = "add_vertex_label" if kind == "vertex_labels" else "add_edge_label"
        labels = schema.get(kind, {})
        if isinstance(labels, list):
            labels = {name: {} for name in labels}
        for name, fields in labels.items():
            changes.append({"action": action, "name": name,
                            "fields": {k: FieldType.parse(v).to_json() for k, v in (fields or {}).items()}})
    return changes
