import math

import numpy as np
import pytest

from arcforge.errors import DimensionMismatch, TypeMismatch
from arcforge.model import VertexId
from arcforge.vector import Condition, HnswParams, HNSWIndex, Point, VectorCollection, distance, score
from arcforge.vector.payload import PayloadIndex
from oracles import brute_topk


def vid(i):
    return VertexId(0, i)


def test_reference_metrics():
    assert distance("euclidean", (0, 0), (3, 4)) == 5.0
    assert score("euclidean", (0, 0), (3, 4)) == -5.0
    assert distance("dot", (1, 2), (3, 4)) == 11.0
    assert distance("cosine", (1, 0), (0, 1)) == 0.0
    assert math.isclose(distance("cosine", (1, 1), (2, 2)), 1.0)
    assert distance("cosine", (0, 0), (1, 1)) == 0.0
    with pytest.raises(DimensionMismatch):
        distance("dot", (1, 2), (1, 2, 3))


def test_payload_conditions():
    idx = PayloadIndex()
    idx.set(vid(0), {"a": 1, "t": "x"})
    idx.set(vid(1), {"a": 5, "t": "y"})
    idx.set(vid(2), {"t": "x"})
    assert idx.select([Condition("a", ">=", 1)]) == {vid(0), vid(1)}
    assert idx.select([Condition("a", "<", 5), Condition("t", "=", "x")]) == {vid(0)}
    assert idx.select([Condition("t", "<>", "x")]) == {vid(1)}
    # a number never equals text
    assert idx.select([Condition("a", "=", "1")]) == set()
    idx.remove(vid(0))
    assert idx.select([Condition("a", ">=", 0)]) == {vid(1)}
    with pytest.raises(TypeMismatch):
        idx.check({"bad": [1, 2]})
    with pytest.raises(ValueError):
        Condition("a", "~", 1)


def test_hnsw_finds_exact_neighbors_on_small_data():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(300, 8)).astype(np.float32)
    index = HNSWIndex(8, "euclidean", m=8, ef_construction=64)
    assert index.add(data).tolist() == list(range(300))
    for q in rng.normal(size=(10, 8)).astype(np.float32):
        ids, _, _ = index.search(q, 300)
        assert set(ids[:5].tolist()) == brute_topk("euclidean", data, q, 5)


def test_hnsw_degree_bounds():
    rng = np.random.default_rng(1)
    index = HNSWIndex(4, "dot", m=4, ef_construction=16)
    index.add(rng.normal(size=(500, 4)))
    for node in range(500):
        assert len(index.neighbors(node, 0)) <= 8
        assert node not in index.neighbors(node, 0)
        for level in range(1, 4):
            assert len(index.neighbors(node, level)) <= 4


def test_empty_collection_search():
    c = VectorCollection("c", 3)
    assert c.search([1, 0, 0], 5) == []
    with pytest.raises(ValueError):
        c.search([1, 0, 0], 0)
    with pytest.raises(DimensionMismatch):
        c.search([1, 0], 5)


def test_upsert_replaces_and_orders_ties_by_key():
    c = VectorCollection("c", 2, "dot")
    c.bulk_upsert([Point(vid(2), [1, 0]), Point(vid(1), [1, 0]), Point(vid(3), [0, 1])])
    hits = c.search([1, 0], 3)
    assert [h.key for h in hits] == [vid(1), vid(2), vid(3)]
    c.bulk_upsert([Point(vid(3), [5, 0])])
    assert c.search([1, 0], 1)[0].key == vid(3)
    assert c.point_count == 3 and c.physical_count == 4


def test_batch_validation_is_atomic():
    c = VectorCollection("c", 2)
    with pytest.raises(TypeMismatch):
        c.bulk_upsert([Point(vid(0), [1, 0]), Point(vid(1), [np.nan, 0])])
    assert c.point_count == 0


def test_filtered_search_only_returns_matches():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(3000, 6)).astype(np.float32)
    c = VectorCollection("c", 6, "euclidean", HnswParams(m=8, ef_construction=64))
    c.bulk_upsert([Point(vid(i), data[i], {"g": int(i % 7)}) for i in range(3000)])
    mask = np.arange(3000) % 7 < 5  # large enough to use the graph, not a scan
    q = rng.normal(size=6).astype(np.float32)
    hits = c.search(q, 10, filter=[Condition("g", "<", 5)])
    assert len(hits) == 10
    assert all(h.key.local_id % 7 < 5 for h in hits)
    exact = brute_topk("euclidean", data, q, 10, mask)
    assert len({h.key.local_id for h in hits} & exact) >= 8


def test_segments_seal_and_compact():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(250, 4)).astype(np.float32)
    c = VectorCollection("c", 4, "cosine", HnswParams(m=4, ef_construction=32), seal_threshold=100)
    c.bulk_upsert([Point(vid(i), data[i], {"i": i}) for i in range(250)])
    assert [s.state for s in c.segments][:2] == ["sealed", "sealed"]
    before = c.digest()
    q = data[7]
    c.delete_points([vid(i) for i in range(0, 100, 2)])
    c.delete_points([vid(i) for i in range(0, 100, 2)])  # second delete is a no-op
    assert c.point_count == 200
    kept = c.digest()
    rewritten = c.compact()
    assert rewritten
    assert c.digest() == kept != before
    assert c.physical_count < 250
    live = np.array([i % 2 == 1 or i >= 100 for i in range(250)])
    assert {h.key.local_id for h in c.brute_force(q, 5)} == brute_topk("cosine", data, q, 5, live)
    assert {h.key for h in c.search(q, 200, ef_search=400)} == set(c.locations)


def test_save_and_load(tmp_path):
    rng = np.random.default_rng(4)
    data = rng.normal(size=(120, 5)).astype(np.float32)
    c = VectorCollection("c", 5, "dot", HnswParams(m=6, ef_construction=40, seed=9), seal_threshold=50)
    c.bulk_upsert([Point(vid(i), data[i], {"i": i}) for i in range(120)])
    c.delete_points([vid(3), vid(60)])
    c.save(tmp_path / "c")
    payloads = {vid(i): {"i": i} for i in range(120)}
    back = VectorCollection.load(tmp_path / "c", payloads)
    assert back.digest() == c.digest()
    q = rng.normal(size=5)
    assert back.search(q, 10) == c.search(q, 10)
