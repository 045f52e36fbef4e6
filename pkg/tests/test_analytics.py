import numpy as np
import pytest

from arcforge import Database, VertexId
from arcforge.analytics import pagerank, snapshot, weakly_connected_components, writeback
from arcforge.errors import EmptyGraph, TypeMismatch
from oracles import dense_pagerank, union_find_components


def graph(n, edges, fields=None):
    db = Database(None)
    db.define_schema({"vertex_labels": {"p": fields or {"rank": "float", "comp": "text", "ci": "int"}},
                      "edge_labels": {"e": {}}})
    vs = [db.create_vertex("p") for _ in range(n)]
    for s, d in edges:
        db.create_edge(vs[s], "e", vs[d])
    return db


def ranks(db, **kw):
    return np.array([r for _, r in pagerank(db, **kw).rows])


def test_single_vertex_has_all_the_mass():
    assert ranks(graph(1, [])).tolist() == [1.0]


def test_two_cycle_is_even():
    assert ranks(graph(2, [(0, 1), (1, 0)])) == pytest.approx([0.5, 0.5])


def test_dangling_vertices_spread_uniformly():
    r = ranks(graph(3, [(0, 1)]))
    assert r.sum() == pytest.approx(1.0)
    assert r[1] > r[0] == pytest.approx(r[2])


def test_empty_graph_raises():
    with pytest.raises(EmptyGraph):
        pagerank(graph(0, []))


@pytest.mark.parametrize("kw", [{"damping": 1.0}, {"damping": 0.0}, {"max_iter": 0}, {"tol": 0}])
def test_bad_parameters(kw):
    with pytest.raises(ValueError):
        pagerank(graph(2, [(0, 1)]), **kw)


def test_matches_dense_power_iteration_with_parallel_edges():
    rng = np.random.default_rng(5)
    n = 40
    edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(150, 2))]
    edges += edges[:10]  # parallel edges each carry weight
    db = graph(n, edges)
    got = ranks(db, damping=0.85, max_iter=200, tol=1e-12)
    want = dense_pagerank(n, edges, 0.85, 200, 1e-12)
    assert np.max(np.abs(got - want)) < 1e-9


def test_wcc_on_disjoint_edges():
    db = graph(5, [(1, 0), (3, 4)])
    comps = weakly_connected_components(db).as_dict()
    assert comps == {VertexId(0, 0): VertexId(0, 0), VertexId(0, 1): VertexId(0, 0),
                     VertexId(0, 2): VertexId(0, 2),
                     VertexId(0, 3): VertexId(0, 3), VertexId(0, 4): VertexId(0, 3)}


def test_wcc_empty_graph():
    res = weakly_connected_components(graph(0, []))
    assert res.rows == [] and res.metadata["components"] == 0


def test_wcc_matches_union_find():
    rng = np.random.default_rng(6)
    n = 300
    edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(200, 2))]
    db = graph(n, edges)
    got = [c.local_id for _, c in weakly_connected_components(db).rows]
    assert got == union_find_components(n, edges)


def test_snapshot_lists_every_edge():
    db = graph(3, [(0, 1), (0, 1), (2, 2)])
    snap = snapshot(db)
    assert snap.n == 3
    assert sorted(zip(snap.src.tolist(), snap.dst.tolist())) == [(0, 1), (0, 1), (2, 2)]


def test_writeback_pagerank_and_components():
    db = graph(3, [(0, 1), (1, 2)])
    pr = pagerank(db)
    assert writeback(db, pr, "rank") == 3
    assert db.get_attribute(VertexId(0, 1), "rank") == pytest.approx(pr.as_dict()[VertexId(0, 1)])
    wcc = weakly_connected_components(db)
    writeback(db, wcc, "comp")
    writeback(db, wcc, "ci")
    assert db.get_attribute(VertexId(0, 2), "comp") == "p:0"
    assert db.get_attribute(VertexId(0, 2), "ci") == 0


def test_writeback_type_mismatch_leaves_state_unchanged():
    db = graph(2, [(0, 1)])
    before = db.state_digest()
    with pytest.raises(TypeMismatch):
        writeback(db, pagerank(db), "comp")
    with pytest.raises(TypeMismatch):
        writeback(db, weakly_connected_components(db), "rank")
    assert db.state_digest() == before


def test_procedures_through_query():
    db = graph(4, [(0, 1), (2, 3)])
    rows = db.query("CALL wcc() YIELD vertex, component RETURN component, count(*)").rows
    assert sorted(rows) == [(VertexId(0, 0), 2), (VertexId(0, 2), 2)]
    top = db.query("CALL pagerank(0.85, 50, 1e-9) YIELD vertex, score "
                   "RETURN vertex ORDER BY score DESC LIMIT 2").rows
    assert {r[0] for r in top} == {VertexId(0, 1), VertexId(0, 3)}
