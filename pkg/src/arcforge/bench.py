"""Benchmark suites: traversal timings, topology footprint, vector recall.

Every suite returns a plain dict with a fixed schema::

    {"suite": str, "schema_version": 1, "config": {...}, "rows": [...], "checks": {...}}

so reports can be diffed and consumed by scripts.
"""

from __future__ import annotations

import gc
import statistics
import time
from typing import Callable

import numpy as np

from . import datagen
from .database import Database
from .memengine.edges import DEFAULT_THRESHOLD

SCHEMA_VERSION = 1

# The four traversal shapes; the last two are the same text on purpose.
TRAVERSAL_QUERIES = [
    "MATCH (m:person)-[e:knows * 2]->(n:person) RETURN n LIMIT 1000;",
    "MATCH (m:person)-[e:knows]->(n:person) RETURN n LIMIT 1000;",
    "MATCH (m:person) RETURN m.firstName LIMIT 1000;",
    "MATCH (m:person) RETURN m.firstName LIMIT 1000;",
]

FOOTPRINT_THRESHOLDS: list[int | None] = [0, 64, 128, 256, None]


def threshold_name(threshold: int | None) -> str:
    if threshold is None:
        return "inf"
    return str(threshold)


def _report(suite: str, config: dict, rows: list, checks: dict) -> dict:
    return {"suite": suite, "schema_version": SCHEMA_VERSION, "config": config,
            "rows": rows, "checks": checks}


def build_graph_db(graph: datagen.SocialGraph, threshold: int | None,
                   with_attributes: bool = True) -> Database:
    db = Database(None, threshold=threshold)
    datagen.load_into(db, graph, with_attributes)
    return db


def time_query(db: Database, text: str, runs: int, warmup: int = 1) -> list[float]:
    """Wall-clock ms per run.  Like ``timeit``, the cyclic GC is paused while
    timing; a full collection over millions of edge tuples would otherwise
    land in whichever run happens to trigger it."""
    for _ in range(warmup):
        db.query(text)
    out = []
    enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(runs):
            t0 = time.perf_counter()
            db.query(text)
            out.append((time.perf_counter() - t0) * 1000.0)
    finally:
        if enabled:
            gc.enable()
    return out


def traversal(graph: datagen.SocialGraph | None = None, *, runs: int = 5,
              threshold: int | None = DEFAULT_THRESHOLD, baseline: int | None = 0,
              persons: int = 100_000, edges: int = 1_000_000, seed: int = 0,
              db: Database | None = None) -> dict:
    """Run each traversal shape ``runs`` times on the adaptive engine and the baseline.

    Runs alternate between the two engines so drift in machine load hits
    both equally.  ``baseline=0`` makes every collection Large from its first
    edge.  With ``db`` given, only that database is measured.
    """
    configs: list[tuple[str, Database]] = []
    if db is not None:
        configs.append(("loaded", db))
    else:
        graph = graph or datagen.social_graph(persons, edges, seed)
        configs.append((f"threshold={threshold_name(threshold)}", build_graph_db(graph, threshold)))
        if baseline != threshold:
            configs.append((f"threshold={threshold_name(baseline)}", build_graph_db(graph, baseline)))
    rows = []
    checks = {}
    for i, text in enumerate(TRAVERSAL_QUERIES):
        times: dict[str, list[float]] = {name: [] for name, _ in configs}
        for _, cdb in configs:
            time_query(cdb, text, 0, warmup=1)
        for _ in range(runs):
            for name, cdb in configs:
                times[name].extend(time_query(cdb, text, 1, warmup=0))
        results = {name: cdb.query(text).rows for name, cdb in configs}
        row = {"query": i + 1, "text": text, "row_count": len(next(iter(results.values()))),
               "runs_ms": {n: [round(t, 3) for t in ts] for n, ts in times.items()},
               "median_ms": {n: statistics.median(ts) for n, ts in times.items()}}
        if len(configs) == 2:
            (a, _), (b, _) = configs
            ratio = row["median_ms"][a] / row["median_ms"][b]
            row["median_ratio"] = ratio
            checks[f"q{i + 1}_parity"] = abs(ratio - 1.0) <= 0.25
            checks[f"q{i + 1}_same_rows"] = sorted(results[a]) == sorted(results[b])
        rows.append(row)
    config = {"runs": runs, "threshold": threshold_name(threshold),
              "baseline": threshold_name(baseline) if db is None else None,
              "persons": graph.n_persons if graph is not None else None,
              "edges": graph.n_edges if graph is not None else None}
    return _report("traversal", config, rows, checks)


def footprint(graph: datagen.SocialGraph | None = None, *,
              thresholds: list[int | None] | None = None,
              persons: int = 100_000, edges: int = 1_000_000, seed: int = 0) -> dict:
    """Topology bytes of the same graph under each threshold."""
    graph = graph or datagen.social_graph(persons, edges, seed)
    thresholds = FOOTPRINT_THRESHOLDS if thresholds is None else thresholds
    rows = []
    for t in thresholds:
        db = build_graph_db(graph, t, with_attributes=False)
        fp = db.memory_footprint()
        rows.append({"threshold": threshold_name(t), **fp.as_dict()})
        del db, fp
        gc.collect()
    by_name = {r["threshold"]: r["topology_bytes"] for r in rows}
    checks = {}
    order = [n for n in ("inf", "256", "128", "64", "0") if n in by_name]
    checks["ordering"] = all(by_name[a] <= by_name[b] for a, b in zip(order, order[1:]))
    if "0" in by_name and "inf" in by_name:
        checks["large_over_small"] = by_name["0"] / by_name["inf"]
    config = {"persons": graph.n_persons, "edges": graph.n_edges,
              "thresholds": [threshold_name(t) for t in thresholds],
              "degree": graph.degree_summary()}
    return _report("footprint", config, rows, checks)


def exact_topk(data: np.ndarray, queries: np.ndarray, k: int, metric: str) -> np.ndarray:
    """Exhaustive top-k row indices (numpy, independent of the index code)."""
    if metric == "cosine":
        dn = data / np.maximum(np.linalg.norm(data, axis=1, keepdims=True), 1e-30)
        qn = queries / np.maximum(np.linalg.norm(queries, axis=1, keepdims=True), 1e-30)
        scores = qn @ dn.T
    elif metric == "dot":
        scores = queries @ data.T
    else:
        scores = -(((queries[:, None, :] - data[None, :, :]) ** 2).sum(-1))
    return np.argsort(-scores, axis=1, kind="stable")[:, :k]


def vector(*, points: int = 10_000, dim: int = 64, queries: int = 100, k: int = 10,
           metric: str = "cosine", seed: int = 0, ef_search: int | None = None,
           progress: Callable[[str], None] | None = None) -> dict:
    """Build a collection of random points and measure recall@k and latency."""
    from .model import VertexId
    data = datagen.gaussian_points(points, dim, seed)
    qs = datagen.gaussian_points(queries, dim, seed + 1)
    db = Database(None)
    db.create_collection("bench", dim, metric)
    t0 = time.perf_counter()
    db.bulk_upsert("bench", [(VertexId(0, i), data[i], {}) for i in range(points)])
    build_s = time.perf_counter() - t0
    if progress:
        progress(f"built {points} points in {build_s:.1f}s")
    truth = exact_topk(data.astype(np.float64), qs.astype(np.float64), k, metric)
    recalls, lat = [], []
    for qi in range(queries):
        t = time.perf_counter()
        hits = db.knn_search("bench", qs[qi], k, ef_search)
        lat.append((time.perf_counter() - t) * 1000.0)
        got = {h.key.local_id for h in hits}
        recalls.append(len(got & set(truth[qi].tolist())) / k)
    recall = float(np.mean(recalls))
    rows = [{"k": k, "recall": recall, "mean_latency_ms": float(np.mean(lat)),
             "p50_latency_ms": float(np.median(lat)), "build_seconds": build_s}]
    config = {"points": points, "dim": dim, "queries": queries, "metric": metric,
              "ef_search": ef_search, "seed": seed}
    return _report("vector", config, rows, {"recall_at_least_0.95": recall >= 0.95})


SUITES = {"traversal": traversal, "footprint": footprint, "vector": vector}
