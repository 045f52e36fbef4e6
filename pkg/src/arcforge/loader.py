"""CSV ingestion driven by a JSON manifest.

Manifest shape::

    {
      "schema": {"vertex_labels": {...}, "edge_labels": {...}},    # optional
      "delimiter": "|",                                             # or ","
      "max_reject_ratio": 0.0,
      "rejects": "rejects.csv",                                     # relative to the manifest
      "collections": [{"name": "person_emb", "label": "person", "field": "emb",
                       "metric": "cosine"}],                        # optional
      "files": [
        {"path": "person.csv", "kind": "vertex", "label": "person", "id": "id",
         "columns": {"firstName": "firstName"},
         "vectors": [{"column": "emb", "collection": "person_emb", "dim": 8}]},
        {"path": "knows.csv", "kind": "edge", "label": "knows",
         "src": {"label": "person", "column": "Person1.id"},
         "dst": {"label": "person", "column": "Person2.id"},
         "columns": {"creationDate": "creationDate"}}
      ]
    }

Every row goes through the logged write path.  Rows that fail to parse or
validate are written to the rejects file instead of aborting the load.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .catalog import schema_changes
from .errors import ArcError
from .model import FieldType
from .vector.collection import Point

log = logging.getLogger(__name__)


class LoadError(ArcError):
    """The manifest is unusable or too many rows were rejected."""


@dataclass
class LoadReport:
    vertices: int = 0
    edges: int = 0
    vectors: int = 0
    rows: int = 0
    rejected: int = 0
    rejects_path: str | None = None
    degree: dict = field(default_factory=dict)

    @property
    def reject_ratio(self) -> float:
        return self.rejected / self.rows if self.rows else 0.0

    def counts(self) -> dict:
        return {"vertices": self.vertices, "edges": self.edges, "vectors": self.vectors}

    def as_dict(self) -> dict:
        return {**self.counts(), "rows": self.rows, "rejected": self.rejected,
                "reject_ratio": self.reject_ratio, "rejects_path": self.rejects_path,
                "degree": self.degree}


def parse_cell(ftype: FieldType, text: str) -> Any:
    """Convert one CSV cell to a value of ``ftype``; empty cells are null."""
    if text == "":
        return None
    kind = ftype.kind
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        low = text.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "json":
        return json.loads(text)
    if kind == "vector":
        return parse_vector(text)
    return text


def parse_vector(text: str) -> list[float]:
    """Vectors are written as ``1.0;2.0;3.0`` (``,`` or spaces also accepted)."""
    body = text.strip().strip("[]")
    for sep in (";", ","):
        if sep in body:
            return [float(x) for x in body.split(sep)]
    return [float(x) for x in body.split()]


def _local_id(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"vertex id must be non-negative, got {value}")
    return value


def _read_rows(path: Path, delimiter: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            return
        for row in reader:
            yield reader.line_num, row


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(manifest, dict) or not isinstance(manifest.get("files", []), list):
        raise LoadError("manifest must be an object with a 'files' list")
    delim = manifest.get("delimiter", "|")
    if delim not in ("|", ","):
        raise LoadError(f"delimiter must be '|' or ',', got {delim!r}")
    for entry in manifest.get("files", []):
        if entry.get("kind") not in ("vertex", "edge"):
            raise LoadError(f"file entry {entry.get('path')!r} needs kind 'vertex' or 'edge'")
        if not (path.parent / entry["path"]).is_file():
            raise LoadError(f"missing data file {entry['path']!r}")
    return manifest


def _apply_schema(db, schema: dict) -> None:
    """Add whatever part of ``schema`` the database does not have yet."""
    cat = db.catalog
    for change in schema_changes(schema):
        table = cat.vertex_labels if change["action"] == "add_vertex_label" else cat.edge_labels
        existing = table.get(change["name"])
        if existing is None:
            db.apply_schema_change(change)
            continue
        for fname, ftype in change["fields"].items():
            if fname not in existing.fields:
                db.add_field(change["name"], fname, ftype, edge=change["action"] == "add_edge_label")


def _check_references(db, manifest: dict) -> None:
    cat = db.catalog
    try:
        for entry in manifest.get("files", []):
            if entry["kind"] == "vertex":
                ldef = cat.vertex_label(entry["label"])
            else:
                ldef = cat.edge_label(entry["label"])
                cat.vertex_label(entry["src"]["label"])
                cat.vertex_label(entry["dst"]["label"])
            for fname in entry.get("columns", {}).values():
                ldef.field_type(fname)
    except ArcError as exc:
        raise LoadError(f"manifest references undeclared schema: {exc}") from exc


def load(db, manifest_path: str | Path, max_reject_ratio: float | None = None) -> LoadReport:
    """Ingest every file of the manifest into ``db``; see the module docstring."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    if "schema" in manifest:
        _apply_schema(db, manifest["schema"])
    for spec in manifest.get("collections", []):
        if spec["name"] not in db.collections:
            if "label" in spec:
                db.create_vector_index(spec["name"], spec["label"], spec["field"],
                                       spec.get("metric", "cosine"), spec.get("hnsw"))
            else:
                db.create_collection(spec["name"], int(spec["dimension"]),
                                     spec.get("metric", "cosine"), spec.get("hnsw"))
    _check_references(db, manifest)

    delimiter = manifest.get("delimiter", "|")
    bound = manifest.get("max_reject_ratio", 0.0) if max_reject_ratio is None else max_reject_ratio
    report = LoadReport()
    rejects: list[tuple[str, int, str, str]] = []
    for entry in manifest.get("files", []):
        path = base / entry["path"]
        if entry["kind"] == "vertex":
            _load_vertices(db, entry, path, delimiter, report, rejects)
        else:
            _load_edges(db, entry, path, delimiter, report, rejects)

    report.rejected = len(rejects)
    if rejects:
        out = base / manifest.get("rejects", "rejects.csv")
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delimiter)
            w.writerow(["file", "line", "error", "row"])
            w.writerows(rejects)
        report.rejects_path = str(out)
    report.degree = degree_report(db)
    if report.reject_ratio > bound:
        raise LoadError(f"{report.rejected} of {report.rows} rows rejected "
                        f"(ratio {report.reject_ratio:.4f} > bound {bound}); see {report.rejects_path}")
    return report


def _raw(row: dict, delimiter: str) -> str:
    return delimiter.join("" if v is None else str(v) for v in row.values())


def _load_vertices(db, entry: dict, path: Path, delimiter: str, report: LoadReport,
                   rejects: list) -> None:
    ldef = db.catalog.vertex_label(entry["label"])
    columns = entry.get("columns", {})
    types = {col: ldef.field_type(fname) for col, fname in columns.items()}
    vec_specs = entry.get("vectors", [])
    pending: dict[str, list[Point]] = {}
    for spec in vec_specs:
        name = spec["collection"]
        if name not in db.collections:
            db.create_collection(name, int(spec["dim"]), spec.get("metric", "cosine"))
        pending[name] = []
    id_col = entry.get("id", "id")
    for line, row in _read_rows(path, delimiter):
        report.rows += 1
        try:
            local = _local_id(row[id_col])
            props = {columns[c]: parse_cell(types[c], row[c]) for c in columns}
            vecs = [(s["collection"], parse_vector(row[s["column"]])) for s in vec_specs
                    if row.get(s["column"])]
            for name, vec in vecs:
                db.collection(name).validate([Point(db.vertex(entry["label"], local), vec, {})])
            v = db.create_vertex(entry["label"], props, local)
        except (ArcError, ValueError, KeyError, TypeError) as exc:
            rejects.append((entry["path"], line, f"{type(exc).__name__}: {exc}", _raw(row, delimiter)))
            continue
        report.vertices += 1
        scalars = {f: x for f, x in props.items() if x is not None and not isinstance(x, (list, dict))}
        for name, vec in vecs:
            binding = db.catalog.indexes.get(name)
            pending[name].append(Point(v, vec, {} if binding is not None else scalars))
    for name, points in pending.items():
        if points:
            report.vectors += db.bulk_upsert(name, points)


def _load_edges(db, entry: dict, path: Path, delimiter: str, report: LoadReport,
                rejects: list) -> None:
    ldef = db.catalog.edge_label(entry["label"])
    columns = entry.get("columns", {})
    types = {col: ldef.field_type(fname) for col, fname in columns.items()}
    src_spec, dst_spec = entry["src"], entry["dst"]
    id_col = entry.get("id")
    for line, row in _read_rows(path, delimiter):
        report.rows += 1
        try:
            src = db.vertex(src_spec["label"], _local_id(row[src_spec["column"]]))
            dst = db.vertex(dst_spec["label"], _local_id(row[dst_spec["column"]]))
            props = {columns[c]: parse_cell(types[c], row[c]) for c in columns}
            eid = int(row[id_col]) if id_col else None
            db.create_edge(src, entry["label"], dst, props, eid)
        except (ArcError, ValueError, KeyError, TypeError) as exc:
            rejects.append((entry["path"], line, f"{type(exc).__name__}: {exc}", _raw(row, delimiter)))
            continue
        report.edges += 1


def degree_report(db) -> dict:
    """Out-degree summary over all vertices (max vs median shows skew)."""
    from .datagen import degree_summary
    with db.lock.read():
        topo = db.engine.topology
        degrees = np.fromiter((topo.out_degree[v] for v in topo.vertices()), dtype=np.int64)
    return degree_summary(degrees)
