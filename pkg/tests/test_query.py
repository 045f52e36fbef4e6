from collections import Counter

import numpy as np
import pytest

from arcforge import Database
from arcforge.errors import ParameterError, QueryRuntimeError, SemanticError
from arcforge.model import VertexId
from shell_suite import SHELL_PARAMS, multiset, shell_suite_db


@pytest.fixture
def tiny():
    db = Database(None)
    db.define_schema({"vertex_labels": {"person": {"name": "text", "age": "int"}},
                      "edge_labels": {"knows": {}}})
    vs = [db.create_vertex("person", {"name": n, "age": a})
          for n, a in [("a", 10), ("b", 20), ("c", 30)]]
    db.create_edge(vs[0], "knows", vs[1])
    db.create_edge(vs[1], "knows", vs[0])
    db.create_edge(vs[1], "knows", vs[2])
    return db


def naive_walks(db, hops, label="knows"):
    """(start, end) pairs of every walk with the given hop count."""
    out = Counter()
    for start in db.engine.scan(0):
        frontier = [start]
        for _ in range(hops):
            frontier = [e.neighbor for v in frontier for e in db.neighbors(v, "out", label)]
        out.update((start, end) for end in frontier)
    return out


def test_walks_may_revisit_edges(tiny):
    rows = tiny.query("MATCH (m:person)-[:knows*3]->(n:person) RETURN m.name, n.name").rows
    assert sorted(rows) == [("a", "b"), ("b", "a"), ("b", "c")]


def test_var_length_matches_naive_composition():
    db = shell_suite_db(200, 900, seed=3)
    for lo, hi in [(1, 1), (2, 2), (1, 3)]:
        got = Counter(db.query(f"MATCH (m:person)-[:knows*{lo}..{hi}]->(n:person) RETURN m, n").rows)
        want = Counter()
        for h in range(lo, hi + 1):
            want.update(naive_walks(db, h))
        assert got == want


def test_single_hop_in_both_directions(tiny):
    out = tiny.query("MATCH (m:person)-[:knows]->(n:person) RETURN count(*)").rows
    both = tiny.query("MATCH (m:person)-[:knows]-(n:person) RETURN count(*)").rows
    assert out == [(3,)] and both == [(6,)]


def test_limit_stops_early_and_reports_counters():
    db = shell_suite_db(500, 2000)
    res = db.query("MATCH (m:person) RETURN m.firstName LIMIT 10", batch_size=16)
    assert len(res) == 10
    scan = next(c for c in res.counters if c["operator"] == "VertexScan")
    assert scan["rows_out"] < 500


def test_batch_size_does_not_change_results():
    db = shell_suite_db(300, 1500)
    text = "MATCH (m:person)-[:knows]->(n:person) WHERE m.age > 30 RETURN m, n.lastName"
    ref = multiset(db.query(text, batch_size=1).rows)
    for bs in (2, 7, 1024):
        assert multiset(db.query(text, batch_size=bs).rows) == ref


def test_order_skip_limit(tiny):
    rows = tiny.query("MATCH (m:person) RETURN m.name ORDER BY m.age DESC SKIP 1 LIMIT 1").rows
    assert rows == [("b",)]


def test_parameters(tiny):
    rows = tiny.query("MATCH (m:person) WHERE m.age >= $lo RETURN m.name", {"lo": 20}).rows
    assert sorted(rows) == [("b",), ("c",)]
    with pytest.raises(ParameterError):
        tiny.query("MATCH (m:person) WHERE m.age > $nope RETURN m")


def test_semantic_and_runtime_errors(tiny):
    with pytest.raises(SemanticError):
        tiny.query("MATCH (m:robot) RETURN m")
    with pytest.raises(SemanticError):
        tiny.query("MATCH (m:person) RETURN m.height")
    with pytest.raises(QueryRuntimeError):
        tiny.query("MATCH (m:person) RETURN m.age + 'x'")


def test_create_through_query(tiny):
    assert tiny.query("CREATE (p:person {name: 'd', age: 4}) RETURN p").rows == [(VertexId(0, 3),)]
    assert tiny.query("MATCH (m:person) RETURN count(*)").rows == [(4,)]


def test_vector_order_by_is_rewritten_with_filter_pushdown():
    db = shell_suite_db(300, 1000)
    text = "MATCH (n:person) WHERE n.age < 40 RETURN n ORDER BY vector_distance(n.emb, $q) ASC LIMIT 10"
    plan = db.explain(text, SHELL_PARAMS)
    assert "VertexVectorScan" in plan and "age < 40" in plan
    assert "VertexVectorScan" not in db.explain(text, SHELL_PARAMS, optimize=False)
    fast = db.query(text, SHELL_PARAMS).rows
    slow = db.query(text, SHELL_PARAMS, optimize=False).rows
    assert fast == slow


def test_vector_functions(tiny):
    tiny.add_field("person", "emb", "vector(2)")
    a = VertexId(0, 0)
    tiny.set_attribute(a, "emb", [3.0, 4.0])
    rows = tiny.query("MATCH (m:person) WHERE id(m) = 0 RETURN vector_norm(m.emb), "
                      "vector_distance(m.emb, [0.0, 0.0], 'euclidean')").rows
    assert rows == [(pytest.approx(5.0), pytest.approx(5.0))]


def test_explain_prefix(tiny):
    res = tiny.query("EXPLAIN MATCH (m:person) RETURN m")
    assert res.columns == ["plan"]
    assert any("VertexScan" in r[0] for r in res.rows)


def test_workers_give_same_multiset():
    db = shell_suite_db(300, 1500)
    text = "MATCH (m:person)-[:knows*2]->(n:person) RETURN m, n"
    assert multiset(db.query(text, workers=4).rows) == multiset(db.query(text, workers=1).rows)


def test_vector_search_procedure():
    db = shell_suite_db(200, 500)
    q = np.array(SHELL_PARAMS["q"])
    rows = db.query("CALL vector.search('person_emb', $q, 3) YIELD vertex, score RETURN vertex, score",
                    SHELL_PARAMS).rows
    exact = db.collection("person_emb").brute_force(q, 3)
    assert [r[0] for r in rows] == [h.key for h in exact]
