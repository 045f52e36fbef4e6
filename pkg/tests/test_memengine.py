import numpy as np
import pytest

from arcforge.catalog import Catalog
from arcforge.errors import UnknownVertex
from arcforge.memengine.cache import MISSING, AttributeCache
from arcforge.memengine.engine import MemEngine
from arcforge.memengine.topology import IN, OUT, GraphTopology
from arcforge.model import EdgeKey, VertexId


def v(i, label=0):
    return VertexId(label, i)


def test_cache_evicts_least_recently_used():
    c = AttributeCache(2)
    c.insert(("a", "f"), 1)
    c.insert(("b", "f"), 2)
    assert c.lookup(("a", "f")) == 1  # a is now most recent
    c.insert(("c", "f"), 3)
    assert c.lookup(("b", "f")) is MISSING
    assert c.lookup(("a", "f")) == 1
    assert c.hits == 2 and c.misses == 1
    assert len(c) == 2


def test_cache_update_if_present_does_not_insert():
    c = AttributeCache(4)
    c.update_if_present(("a", "f"), 9)
    assert ("a", "f") not in c
    c.insert(("a", "f"), 1)
    c.update_if_present(("a", "f"), 9)
    assert c.lookup(("a", "f")) == 9


def test_cache_capacity_must_be_positive():
    with pytest.raises(ValueError):
        AttributeCache(0)


def test_insert_and_neighbors_in_key_order():
    t = GraphTopology()
    for i in range(4):
        t.add_vertex(v(i))
    t.insert_edge(v(0), v(3), 1, 0)
    t.insert_edge(v(0), v(2), 0, 5)
    t.insert_edge(v(0), v(1), 0, 7)
    t.insert_edge(v(0), v(1), 0, 6)
    assert list(t.neighbors(v(0))) == [
        EdgeKey(0, v(1), 6), EdgeKey(0, v(1), 7), EdgeKey(0, v(2), 5), EdgeKey(1, v(3), 0)]
    assert list(t.neighbors(v(1), IN)) == [EdgeKey(0, v(0), 6), EdgeKey(0, v(0), 7)]
    assert list(t.neighbors(v(0), OUT, 1)) == [EdgeKey(1, v(3), 0)]
    assert t.degree(v(0)) == 4 and t.degree(v(1), IN) == 2
    assert t.edge_count == 4


def test_duplicate_edge_is_not_counted_twice():
    t = GraphTopology()
    t.add_vertex(v(0))
    t.add_vertex(v(1))
    assert t.insert_edge(v(0), v(1), 0, 0)
    assert not t.insert_edge(v(0), v(1), 0, 0)
    assert t.degree(v(0)) == 1 and t.edge_count == 1


def test_edges_need_existing_endpoints():
    t = GraphTopology()
    t.add_vertex(v(0))
    with pytest.raises(UnknownVertex):
        t.insert_edge(v(0), v(9), 0, 0)
    with pytest.raises(UnknownVertex):
        list(t.neighbors(v(9)))
    with pytest.raises(UnknownVertex):
        t.degree(v(9))


def test_remove_vertex_drops_incident_edges_and_self_loops():
    t = GraphTopology()
    for i in range(3):
        t.add_vertex(v(i))
    t.insert_edge(v(0), v(1), 0, 0)
    t.insert_edge(v(1), v(2), 0, 1)
    t.insert_edge(v(1), v(1), 0, 2)
    t.insert_edge(v(2), v(0), 0, 3)
    removed = t.remove_vertex(v(1))
    assert sorted(removed) == sorted([(v(0), 0, v(1), 0), (v(1), 0, v(2), 1), (v(1), 0, v(1), 2)])
    assert t.edge_count == 1
    assert t.degree(v(0)) == 0 and t.degree(v(2), IN) == 0
    assert list(t.edges()) == [(v(2), 0, v(0), 3)]


def _random_edges(rng, n_vertices, n_edges):
    src = rng.integers(0, n_vertices, n_edges)
    dst = rng.integers(0, n_vertices, n_edges)
    eid = rng.integers(0, 3, n_edges)
    return src, dst, eid


@pytest.mark.parametrize("threshold", [0, 4, 128, None])
def test_bulk_insert_equals_incremental(threshold):
    rng = np.random.default_rng(threshold or 1)
    n = 60
    src, dst, eid = _random_edges(rng, n, 900)  # includes duplicates and self loops
    bulk, inc = GraphTopology(threshold), GraphTopology(threshold)
    for t in (bulk, inc):
        for i in range(n):
            t.add_vertex(v(i))
    # a prior edge so that some collections take the non-empty path
    for t in (bulk, inc):
        t.insert_edge(v(0), v(1), 0, 99)
    pairs = lambda a: np.stack([np.zeros_like(a), a], axis=1)  # noqa: E731
    added = bulk.bulk_insert(0, pairs(src), pairs(dst), eid)
    expected = sum(inc.insert_edge(v(int(s)), v(int(d)), 0, int(e)) for s, d, e in zip(src, dst, eid))
    assert added == expected
    assert list(bulk.edges()) == list(inc.edges())
    for i in range(n):
        for side in (OUT, IN):
            assert list(bulk.neighbors(v(i), side)) == list(inc.neighbors(v(i), side))
            assert bulk.degree(v(i), side) == inc.degree(v(i), side)
            cb, ci = bulk.collection(v(i), side, 0), inc.collection(v(i), side, 0)
            if ci is not None:
                assert cb.representation == ci.representation


def test_footprint_counts_representations():
    t = GraphTopology(2)
    for i in range(5):
        t.add_vertex(v(i))
    for i in range(1, 5):
        t.insert_edge(v(0), v(i), 0, 0)
    report = t.footprint()
    # forward of v0 is large; reverse of each v1..v4 is small
    assert report.large_collections == 1
    assert report.small_collections == 4
    assert report.topology_bytes > 0


def _engine():
    cat = Catalog()
    cat.apply({"action": "add_vertex_label", "name": "person", "fields": {"name": "text"}})
    cat.apply({"action": "add_edge_label", "name": "knows", "fields": {}})
    return MemEngine(cat, cache_capacity=8)


def test_engine_attributes_go_through_cache():
    e = _engine()
    a = VertexId(0, 0)
    e.create_vertex(a)
    e.put_attribute(a, "name", "ann")
    assert e.get_attribute(a, "name") == "ann"
    assert e.get_attribute(a, "name") == "ann"
    assert e.cache.hits == 1 and e.cache.misses == 1
    e.put_attribute(a, "name", "bo")
    assert e.get_attribute(a, "name") == "bo"


def test_engine_delete_vertex_clears_attributes_and_scan():
    e = _engine()
    for i in range(3):
        e.create_vertex(VertexId(0, i))
        e.put_attribute(VertexId(0, i), "name", f"p{i}")
    e.get_attribute(VertexId(0, 1), "name")
    e.delete_vertex(VertexId(0, 1))
    assert list(e.scan(0)) == [VertexId(0, 0), VertexId(0, 2)]
    assert e.label_count(0) == 2
    assert (VertexId(0, 1), "name") not in e.cache
    assert e.store.fields_of(VertexId(0, 1)) == []
    with pytest.raises(UnknownVertex):
        e.get_attribute(VertexId(0, 1), "name")
