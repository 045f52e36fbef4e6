"""The sixteen acceptance criteria, one test each.

Each test records a one-line PASS/FAIL verdict (shown in the terminal
summary) before asserting, so a failing criterion still reports its numbers.
"""

from __future__ import annotations

import json
import random
import shutil
import statistics
import time
import timeit
from pathlib import Path

import numpy as np
import pytest

from arcforge import Database, QuerySyntaxError, VertexId, analytics, bench, datagen, loader
from arcforge.bench import TRAVERSAL_QUERIES
from arcforge.memengine.edges import LARGE, SMALL, AdaptiveEdgeCollection
from arcforge.memengine.topology import IN, OUT, GraphTopology
from arcforge.query import parse
from arcforge.query.ast import to_data
from arcforge.vector import Condition
from oracles import (
    HistoryRunner,
    SortedSetOracle,
    brute_topk,
    dense_pagerank,
    project,
    union_find_components,
)
from shell_suite import SHELL_PARAMS, SHELL_SUITE, multiset, shell_suite_db

GOLDEN = Path(__file__).parent / "golden" / "traversal_asts.json"

N_SEQUENCES = 10_000
MAX_SEQ_LEN = 1_000
UNIVERSE = 512


def _sequences(seed: int = 1):
    """The shared random insert/remove/contains sequences: (op codes, key indices)."""
    rng = np.random.default_rng(seed)
    for _ in range(N_SEQUENCES):
        n = int(rng.integers(1, MAX_SEQ_LEN + 1))
        yield rng.choice(3, size=n, p=[0.5, 0.3, 0.2]).tolist(), rng.integers(0, UNIVERSE, n).tolist()


def _entry_universe(seed: int = 2) -> list[tuple[int, int, int]]:
    rng = random.Random(seed)
    keys: set = set()
    while len(keys) < UNIVERSE:
        big = rng.random() < 0.5
        keys.add((rng.randrange(4), rng.randrange(2**64) if big else rng.randrange(300),
                  rng.randrange(2**64) if rng.random() < 0.3 else rng.randrange(5)))
    out = sorted(keys)
    rng.shuffle(out)
    return out


# -- 1 ------------------------------------------------------------------------


def test_c01_adaptive_collection_matches_ordered_set(criterion):
    keys = _entry_universe()
    t0 = time.perf_counter()
    mismatches = 0
    large_seen = 0
    for ops, idx in _sequences():
        coll, ref = AdaptiveEdgeCollection(128), SortedSetOracle()
        for op, i in zip(ops, idx):
            k = keys[i]
            if op == 0:
                ok = coll.add(k) == ref.add(k)
            elif op == 1:
                ok = coll.discard(k) == ref.discard(k)
            else:
                ok = (k in coll) == (k in ref)
            if not ok:
                mismatches += 1
                break
        if list(coll) != ref.items or len(coll) != len(ref):
            mismatches += 1
        large_seen += coll.representation == LARGE
    elapsed = time.perf_counter() - t0
    passed = mismatches == 0 and elapsed < 60
    criterion(1, "adaptive collection == ordered-set oracle", passed,
              f"{N_SEQUENCES} sequences, {mismatches} mismatches, {large_seen} ended Large, {elapsed:.1f}s")
    assert large_seen > 0, "sequences never exercised the Large form"
    assert passed


# -- 2 ------------------------------------------------------------------------


def test_c02_threshold_law(criterion):
    rng = random.Random(3)
    violations = 0
    for _ in range(100):
        keys = [(0, rng.randrange(10**6), i) for i in range(200)]
        rng.shuffle(keys)
        coll = AdaptiveEdgeCollection(128)
        distinct = 0
        for k in keys:
            if rng.random() < 0.2 and distinct:
                coll.add(keys[rng.randrange(distinct)])   # repeat insert: must not count
            coll.add(k)
            distinct += 1
            expected = SMALL if distinct <= 128 else LARGE
            violations += coll.representation != expected
    criterion(2, "threshold law (Small through 128, Large from 129)", violations == 0,
              f"100 key orders, {violations} violations")
    assert violations == 0


# -- 3 ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def big_graph():
    return datagen.social_graph(100_000, 1_000_000, seed=0)


def test_c03_footprint_ordering(criterion, big_graph):
    t0 = time.perf_counter()
    report = bench.footprint(big_graph)
    elapsed = time.perf_counter() - t0
    b = {r["threshold"]: r["topology_bytes"] for r in report["rows"]}
    order = ["inf", "256", "128", "64", "0"]
    ordered = all(b[x] <= b[y] for x, y in zip(order, order[1:]))
    ratio = b["0"] / b["inf"]
    deg = big_graph.degree_summary()
    passed = ordered and ratio >= 1.3 and elapsed < 300
    mib = ", ".join(f"{t}:{b[t] / 2**20:.0f}MiB" for t in order)
    criterion(3, "footprint ordering all-Small <= 256 <= 128 <= 64 <= all-Large", passed,
              f"{mib}; Large/Small {ratio:.2f}; max deg {deg['max']} vs median {deg['median']:.0f}; "
              f"{elapsed:.0f}s")
    assert deg["max"] > 100 * deg["median"]
    assert passed


# -- 4 ------------------------------------------------------------------------


def test_c04_traversal_parity(criterion, big_graph):
    t0 = time.perf_counter()
    report = bench.traversal(big_graph, runs=11, threshold=128, baseline=0)
    elapsed = time.perf_counter() - t0
    ratios = [r["median_ratio"] for r in report["rows"]]
    same = all(v for k, v in report["checks"].items() if k.endswith("same_rows"))
    passed = all(abs(r - 1) <= 0.25 for r in ratios) and same and elapsed < 300
    criterion(4, "traversal parity adaptive vs all-Large (<= 25%)", passed,
              "median ratios " + ", ".join(f"{r:.3f}" for r in ratios) + f"; {elapsed:.0f}s")
    assert passed


# -- 5 ------------------------------------------------------------------------


def test_c05_degree_counter(criterion):
    universe = [(lab, VertexId(0, j), e) for lab in (0, 1) for j in range(64) for e in range(4)]
    wrong = 0
    for ops, idx in _sequences():
        topo = GraphTopology(128)
        src = VertexId(1, 0)
        topo.add_vertex(src)
        for j in range(64):
            topo.add_vertex(VertexId(0, j))
        for op, i in zip(ops, idx):
            lab, dst, eid = universe[i]
            if op == 0:
                topo.insert_edge(src, dst, lab, eid)
            elif op == 1:
                topo.remove_edge(src, dst, lab, eid)
            else:
                topo.has_edge(src, dst, lab, eid)
            if topo.degree(src, OUT) != len(list(topo.neighbors(src, OUT))):
                wrong += 1
            if topo.degree(dst, IN) != len(list(topo.neighbors(dst, IN))):
                wrong += 1

    topo = GraphTopology(128)
    hub, leaf = VertexId(0, 0), VertexId(0, 1)
    for v in (hub, leaf):
        topo.add_vertex(v)
    for j in range(10_000):
        w = VertexId(1, j)
        topo.add_vertex(w)
        topo.insert_edge(hub, w, 0, 0)
    topo.insert_edge(leaf, hub, 0, 0)
    assert topo.degree(hub) == 10_000 and topo.degree(leaf) == 1
    t_hub = min(timeit.repeat(lambda: topo.degree(hub), number=20_000, repeat=9))
    t_leaf = min(timeit.repeat(lambda: topo.degree(leaf), number=20_000, repeat=9))
    ratio = max(t_hub, t_leaf) / min(t_hub, t_leaf)
    passed = wrong == 0 and ratio <= 3.0
    criterion(5, "degree() == iterator length; latency independent of degree", passed,
              f"{wrong} mismatches; deg 10^4 vs 1 latency ratio {ratio:.2f}")
    assert passed


# -- 6 ------------------------------------------------------------------------


def test_c06_crash_recovery(criterion, tmp_path):
    failures = []
    n_hist, n_ops = 500, 200
    for h in range(n_hist):
        rng = random.Random(10_000 + h)
        runner = HistoryRunner(rng)
        path = tmp_path / f"h{h}"
        db = Database(path)
        total = len(runner.setup_ops()) + n_ops
        crash_after = rng.randint(1, total)
        ops = runner.setup_ops()
        for i in range(crash_after):
            op = ops[i] if i < len(ops) else runner.random_op()
            runner.apply(db, op)
        db.crash()
        recovered = Database(path)
        if project(recovered) != runner.model.snapshot():
            failures.append(h)
        recovered.close()
        shutil.rmtree(path)
    criterion(6, "crash recovery == prefix oracle", not failures,
              f"{n_hist} histories x {n_ops} ops, failures {failures[:5]}")
    assert not failures


# -- 7 ------------------------------------------------------------------------


def test_c07_checkpoint_equivalence(criterion, tmp_path):
    failures = []
    used_checkpoint = 0
    for h in range(100):
        rng = random.Random(20_000 + h)
        runner = HistoryRunner(rng)
        path = tmp_path / f"h{h}"
        db = Database(path)
        for op in runner.setup_ops():
            runner.apply(db, op)
        ckpt_at = rng.randrange(150)
        for i in range(150):
            runner.apply(db, ("checkpoint",) if i == ckpt_at else runner.random_op())
        db.crash()
        shutil.copytree(path, tmp_path / f"h{h}-replay")
        a = Database(path, use_checkpoint=True)
        b = Database(tmp_path / f"h{h}-replay", use_checkpoint=False)
        used_checkpoint += a.checkpoint_lsn > 0 and b.checkpoint_lsn == 0
        if a.state_digest() != b.state_digest() or project(a) != runner.model.snapshot():
            failures.append(h)
        a.close()
        b.close()
        shutil.rmtree(path)
        shutil.rmtree(tmp_path / f"h{h}-replay")
    passed = not failures and used_checkpoint == 100
    criterion(7, "checkpoint+tail == full replay", passed,
              f"100 histories, {used_checkpoint} recovered from a checkpoint, failures {failures[:5]}")
    assert passed


# -- 8 ------------------------------------------------------------------------


def test_c08_hnsw_exact_at_full_ef(criterion):
    rng = np.random.default_rng(8)
    bad = {}
    for metric in ("cosine", "euclidean", "dot"):
        for n in (300, 2000):
            data = rng.standard_normal((n, 16)).astype(np.float32)
            db = Database(None)
            db.create_collection("c", 16, metric)
            db.bulk_upsert("c", [(VertexId(0, i), data[i], {}) for i in range(n)])
            misses = 0
            for _ in range(100):
                q = rng.standard_normal(16).astype(np.float32)
                k = int(rng.integers(1, 21))
                got = {h.key.local_id for h in db.knn_search("c", q, k, ef_search=n)}
                misses += got != brute_topk(metric, data, q, k)
            bad[(metric, n)] = misses
    passed = not any(bad.values())
    criterion(8, "HNSW top-k == brute force at ef = collection size", passed,
              "; ".join(f"{m}/{n}: {v} misses of 100" for (m, n), v in bad.items()))
    assert passed


# -- 9 ------------------------------------------------------------------------


def test_c09_hnsw_recall(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    data = rng.standard_normal((10_000, 64)).astype(np.float32)
    db = Database(None)
    db.create_collection("c", 64, "cosine")
    db.bulk_upsert("c", [(VertexId(0, i), data[i], {}) for i in range(len(data))])
    build = time.perf_counter() - t0
    recalls = []
    for _ in range(100):
        q = rng.standard_normal(64).astype(np.float32)
        got = {h.key.local_id for h in db.knn_search("c", q, 10)}
        recalls.append(len(got & brute_topk("cosine", data, q, 10)) / 10)
    elapsed = time.perf_counter() - t0
    recall = float(np.mean(recalls))
    passed = recall >= 0.95 and elapsed < 120
    criterion(9, "HNSW recall@10 >= 0.95 on 10k x 64-d at defaults", passed,
              f"recall {recall:.4f}; build {build:.1f}s, total {elapsed:.1f}s")
    assert passed


# -- 10 -----------------------------------------------------------------------


def test_c10_filtered_search(criterion):
    rng = np.random.default_rng(10)
    n, dim = 4000, 16
    data = rng.standard_normal((n, dim)).astype(np.float32)
    a = rng.integers(0, 1000, n)
    b = rng.integers(0, 1000, n)
    db = Database(None)
    db.create_collection("c", dim, "cosine")
    db.bulk_upsert("c", [(VertexId(0, i), data[i], {"a": int(a[i]), "b": int(b[i])}) for i in range(n)])
    exact_fail = {}
    default_recall = {}
    for sel in (0.005, 0.05, 0.5):
        fails, recalls = 0, []
        for _ in range(50):
            wa = float(np.exp(rng.uniform(np.log(sel), 0)))
            wb = sel / wa
            lo_a = int(rng.integers(0, int(1000 * (1 - wa)) + 1))
            lo_b = int(rng.integers(0, int(1000 * (1 - wb)) + 1))
            hi_a, hi_b = lo_a + max(1, round(1000 * wa)), lo_b + max(1, round(1000 * wb))
            filt = [Condition("a", ">=", lo_a), Condition("a", "<", hi_a),
                    Condition("b", ">=", lo_b), Condition("b", "<", hi_b)]
            mask = (a >= lo_a) & (a < hi_a) & (b >= lo_b) & (b < hi_b)
            q = rng.standard_normal(dim).astype(np.float32)
            truth = brute_topk("cosine", data, q, 10, mask)
            full = {h.key.local_id for h in db.knn_search("c", q, 10, ef_search=n, filter=filt)}
            fails += full != truth
            default = {h.key.local_id for h in db.knn_search("c", q, 10, filter=filt)}
            recalls.append(len(default & truth) / max(1, len(truth)))
        exact_fail[sel] = fails
        default_recall[sel] = float(np.mean(recalls))
    passed = not any(exact_fail.values()) and default_recall[0.5] >= 0.9
    criterion(10, "filtered top-k == filter-then-exhaustive oracle", passed,
              "; ".join(f"sel {s:.1%}: {exact_fail[s]} exact misses, default recall {default_recall[s]:.3f}"
                        for s in exact_fail))
    assert passed


# -- 11 -----------------------------------------------------------------------


def test_c11_rewrite_soundness(criterion):
    rng = np.random.default_rng(11)
    n = 1500
    db = Database(None)
    db.define_schema({"vertex_labels": {"doc": {"age": "int", "vc": "vector(8)", "ve": "vector(8)",
                                                "vd": "vector(8)"}}})
    metrics = {"vc": "cosine", "ve": "euclidean", "vd": "dot"}
    for f, m in metrics.items():
        db.create_vector_index(f"idx_{f}", "doc", f, m)
    vecs = {f: rng.standard_normal((n, 8)).astype(np.float32) for f in metrics}
    ages = rng.integers(0, 100, n)
    for i in range(n):
        db.create_vertex("doc", {"age": int(ages[i]), **{f: vecs[f][i] for f in metrics}}, i)
    mismatches, rewritten = 0, 0
    for _ in range(100):
        f = str(rng.choice(list(metrics)))
        k = int(rng.integers(1, 30))
        where = ""
        params = {"q": rng.standard_normal(8).tolist()}
        if rng.random() < 0.5:
            where = "WHERE n.age > $a "
            params["a"] = int(rng.integers(0, 90))
        text = f"MATCH (n:doc) {where}RETURN n ORDER BY vector_distance(n.{f}, $q) ASC LIMIT {k}"
        plan = db.explain(text, params)
        rewritten += "VertexVectorScan" in plan
        fast = db.query(text, params, ef_search=n)
        slow = db.query(text, params, optimize=False)
        assert "VertexVectorScan" not in slow.plan
        mismatches += set(fast.column("n")) != set(slow.column("n"))
    passed = mismatches == 0 and rewritten == 100
    criterion(11, "VertexVectorScan rewrite == full scan + sort", passed,
              f"100 queries, {rewritten} rewritten, {mismatches} hit-set mismatches")
    assert passed


# -- 12 -----------------------------------------------------------------------


def _mutations() -> list[str]:
    q1, q2, q3 = TRAVERSAL_QUERIES[0], TRAVERSAL_QUERIES[1], TRAVERSAL_QUERIES[2]
    out = []
    for q in (q1, q2, q3):
        out += [
            q.replace("(", "", 1),                    # unbalanced node pattern
            q.replace(")", "", 1),
            q.replace("MATCH", "MATCHH", 1),
            q.replace("MATCH", "", 1),
            q.replace("RETURN", "", 1),
            q.replace("RETURN", "RETURN RETURN", 1),
            q.replace("LIMIT 1000", "LIMIT"),
            q.replace("LIMIT 1000", "LIMIT LIMIT 1000"),
            q.replace(":person", "::person", 1),
            q.replace(":person", ":", 1),
            q[: q.index("RETURN")] + "RETURN",
            q + " 'unterminated",
            q.replace(";", " @;"),
        ]
    out += [
        q1.replace("]", "", 1), q1.replace("* 2", "* x"), q1.replace("* 2", "*2..1"),
        q1.replace("->", "=>"), q1.replace("[e:knows * 2]", "[e:knows * 2 2]"),
        q2.replace("]->", "]->->"), q2.replace("-[", "[", 1), q3.replace("m.firstName", "m."),
        q3.replace("m.firstName", "m..firstName"), q3.replace("m.firstName", ".firstName"),
        "",
    ]
    return out


def test_c12_parser_golden_and_mutations(criterion):
    golden = json.loads(GOLDEN.read_text())
    stable = all(to_data(parse(g["text"])) == g["ast"] for g in golden)
    stable &= [g["text"] for g in golden] == TRAVERSAL_QUERIES
    stable &= all(parse(t) == parse(t) for t in TRAVERSAL_QUERIES)
    muts = _mutations()
    assert len(muts) == 50 and len(set(muts)) == 50
    outcomes = []
    for text in muts:
        try:
            parse(text)
            outcomes.append("accepted")
        except QuerySyntaxError:
            outcomes.append("syntax")
        except Exception as exc:  # anything else is a crash
            outcomes.append(type(exc).__name__)
    bad = [(m, o) for m, o in zip(muts, outcomes) if o != "syntax"]
    passed = stable and not bad
    criterion(12, "parser golden ASTs + 50 malformed mutations", passed,
              f"golden stable={stable}; {50 - len(bad)}/50 mutations rejected with SyntaxError {bad[:3]}")
    assert passed


# -- 13 -----------------------------------------------------------------------


def test_c13_batch_size_independence(criterion):
    db = shell_suite_db()
    differing = []
    for text in SHELL_SUITE:
        results = [multiset(db.query(text, SHELL_PARAMS, batch_size=b).rows) for b in (1, 7, 1024)]
        if not results[0] == results[1] == results[2]:
            differing.append(text)
    criterion(13, "results identical for batch sizes 1, 7, 1024", not differing,
              f"{len(SHELL_SUITE)} statements, {len(differing)} differ")
    assert not differing


# -- 14 -----------------------------------------------------------------------


def _random_graph_db(rng: random.Random, labels: int = 1):
    n = rng.randint(1, 200)
    db = Database(None)
    db.define_schema({"vertex_labels": {f"l{i}": {} for i in range(labels)},
                      "edge_labels": {"e": {}}})
    vids = sorted(VertexId(rng.randrange(labels), i) for i in range(n))
    for v in vids:
        db.create_vertex(f"l{v.label_id}", {}, v.local_id)
    m = rng.randint(0, 3 * n)
    edges = [(rng.randrange(n), rng.randrange(n)) for _ in range(m)]
    for eid, (s, d) in enumerate(edges):
        db.insert_edge(vids[s], vids[d], "e", eid)
    return db, vids, edges


def test_c14_pagerank_oracle(criterion):
    rng = random.Random(14)
    worst, worst_sum = 0.0, 0.0
    for _ in range(50):
        db, vids, edges = _random_graph_db(rng)
        res = analytics.pagerank(db, 0.85, 200, 1e-12)
        got = dict(res.rows)
        oracle = dense_pagerank(len(vids), edges, 0.85, 200, 1e-12)
        worst = max(worst, max(abs(got[v] - oracle[i]) for i, v in enumerate(vids)))
        worst_sum = max(worst_sum, abs(sum(got.values()) - 1.0))
    passed = worst <= 1e-6 and worst_sum <= 1e-9
    criterion(14, "PageRank == dense power-iteration oracle", passed,
              f"50 graphs, max |diff| {worst:.2e}, max |sum-1| {worst_sum:.2e}")
    assert passed


# -- 15 -----------------------------------------------------------------------


def test_c15_wcc_oracle(criterion):
    rng = random.Random(15)
    mismatched = 0
    for _ in range(50):
        db, vids, edges = _random_graph_db(rng, labels=3)
        got = dict(analytics.weakly_connected_components(db).rows)
        oracle = union_find_components(len(vids), edges)
        mismatched += any(got[v] != vids[oracle[i]] for i, v in enumerate(vids))
    criterion(15, "WCC == union-find oracle", mismatched == 0, f"50 graphs, {mismatched} mismatched")
    assert mismatched == 0


# -- 16 -----------------------------------------------------------------------


def test_c16_htap_loop(criterion, tmp_path):
    graph = datagen.social_graph(2000, 12_000, seed=16)
    manifest = datagen.write_csv(graph, tmp_path / "csv")
    db = Database(tmp_path / "db")
    counts = loader.load(db, manifest).counts()
    assert counts == {"vertices": 2000, "edges": 12_000, "vectors": 0}
    pr = db.query("CALL pagerank(0.85, 100, 1e-10) YIELD vertex, score RETURN vertex, score")
    updated = db.query("CALL writeback('pagerank', 'rank', 0.85, 100, 1e-10) YIELD updated RETURN updated")
    top = "MATCH (n:person) RETURN n, n.rank ORDER BY n.rank DESC LIMIT 10"
    before = db.query(top).rows
    expected = sorted(pr.rows, key=lambda r: (-r[1], r[0]))[:10]
    db.crash()
    recovered = Database(tmp_path / "db")
    after = recovered.query(top).rows
    recovered.close()
    passed = (updated.rows == [(2000,)] and before == after
              and [r[0] for r in before] == [r[0] for r in expected])
    criterion(16, "load -> pagerank -> writeback -> top-10 -> crash -> recover", passed,
              f"top-10 before == after crash: {before == after}; leader {before[0][0]} {before[0][1]:.5f}")
    assert passed
