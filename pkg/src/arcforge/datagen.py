"""Synthetic social graphs in the shape of the LDBC person/knows subgraph.

Out-degrees follow a truncated power law, and edge targets are drawn with
probability proportional to a second power-law weight, so both directions
contain a few super nodes and a long tail of low-degree vertices.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIRST_NAMES = ["Alice", "Bob", "Carmen", "Deng", "Eitan", "Fatima", "Goran", "Hana", "Ivan", "Jun",
               "Kofi", "Lena", "Mateo", "Nia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq"]
LAST_NAMES = ["Ahmed", "Berg", "Costa", "Dubois", "Evans", "Fischer", "Garcia", "Horvat", "Ito", "Jones"]

PERSON_SCHEMA = {
    "vertex_labels": {"person": {"firstName": "text", "lastName": "text", "age": "int",
                                 "rank": "float", "component": "text"}},
    "edge_labels": {"knows": {"creationDate": "int"}},
}


@dataclass
class SocialGraph:
    n_persons: int
    src: np.ndarray          # local ids, one per edge
    dst: np.ndarray
    first_names: list[str]
    last_names: list[str]
    ages: np.ndarray
    dates: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def degree_summary(self) -> dict:
        return degree_summary(np.bincount(self.src, minlength=self.n_persons))


def degree_summary(degrees: np.ndarray) -> dict:
    degrees = np.asarray(degrees)
    if degrees.size == 0:
        return {"max": 0, "median": 0.0, "mean": 0.0, "p99": 0.0}
    return {"max": int(degrees.max()), "median": float(np.median(degrees)),
            "mean": float(degrees.mean()), "p99": float(np.percentile(degrees, 99))}


def _power_weights(rng: np.random.Generator, n: int, alpha: float) -> np.ndarray:
    w = rng.pareto(alpha, n) + 1.0
    return w / w.sum()


def social_graph(n_persons: int = 10_000, n_edges: int = 100_000, seed: int = 0,
                 alpha_out: float = 1.2, alpha_in: float = 1.5) -> SocialGraph:
    """Directed power-law graph with ``n_edges`` edges (self loops excluded)."""
    rng = np.random.default_rng(seed)
    out_w = _power_weights(rng, n_persons, alpha_out)
    in_w = _power_weights(rng, n_persons, alpha_in)
    src = rng.choice(n_persons, size=n_edges, p=out_w)
    dst = rng.choice(n_persons, size=n_edges, p=in_w)
    loops = src == dst
    while loops.any():
        dst[loops] = rng.choice(n_persons, size=int(loops.sum()), p=in_w)
        loops = src == dst
    order = np.lexsort((dst, src))
    firsts = [FIRST_NAMES[i] for i in rng.integers(0, len(FIRST_NAMES), n_persons)]
    lasts = [LAST_NAMES[i] for i in rng.integers(0, len(LAST_NAMES), n_persons)]
    return SocialGraph(n_persons, src[order].astype(np.int64), dst[order].astype(np.int64), firsts, lasts,
                       rng.integers(18, 90, n_persons), rng.integers(1_262_304_000, 1_356_998_400, n_edges))


def load_into(db, graph: SocialGraph, with_attributes: bool = True) -> None:
    """Create the schema and bulk-load ``graph`` into an in-memory database."""
    if "person" not in db.catalog.vertex_labels:
        db.define_schema(PERSON_SCHEMA)
    person = db.catalog.vertex_label("person").id
    if with_attributes:
        db.bulk_create_vertices("person", range(graph.n_persons), {
            "firstName": graph.first_names, "lastName": graph.last_names,
            "age": graph.ages.tolist()})
    else:
        db.bulk_create_vertices("person", range(graph.n_persons))
    lab = np.full(graph.n_edges, person, dtype=np.uint64)
    src = np.stack([lab, graph.src.astype(np.uint64)], axis=1)
    dst = np.stack([lab, graph.dst.astype(np.uint64)], axis=1)
    db.bulk_insert_edges("knows", src, dst, np.arange(graph.n_edges, dtype=np.uint64))


def write_csv(graph: SocialGraph, directory: str | Path, delimiter: str = "|") -> Path:
    """Write person/knows CSV files plus a load manifest; returns the manifest path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "person.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["id", "firstName", "lastName", "age"])
        for i in range(graph.n_persons):
            w.writerow([i, graph.first_names[i], graph.last_names[i], int(graph.ages[i])])
    with open(out / "person_knows_person.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["Person1.id", "Person2.id", "creationDate"])
        for s, d, t in zip(graph.src.tolist(), graph.dst.tolist(), graph.dates.tolist()):
            w.writerow([s, d, t])
    manifest = {
        "schema": PERSON_SCHEMA,
        "delimiter": delimiter,
        "files": [
            {"path": "person.csv", "kind": "vertex", "label": "person", "id": "id",
             "columns": {"firstName": "firstName", "lastName": "lastName", "age": "age"}},
            {"path": "person_knows_person.csv", "kind": "edge", "label": "knows",
             "src": {"label": "person", "column": "Person1.id"},
             "dst": {"label": "person", "column": "Person2.id"},
             "columns": {"creationDate": "creationDate"}},
        ],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def gaussian_points(n: int, dim: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, dim)).astype(np.float32)
