import numpy as np
import pytest

from arcforge import Database, EdgeRef, VertexId
from arcforge.errors import (
    BadDimension,
    DimensionMismatch,
    DuplicateCollection,
    DuplicateVertex,
    SchemaError,
    TypeMismatch,
    UnknownCollection,
    UnknownField,
    UnknownLabel,
    UnknownVertex,
)

SCHEMA = {
    "vertex_labels": {"person": {"name": "text", "age": "int", "emb": "vector(3)", "doc": "json"}},
    "edge_labels": {"knows": {"since": "int"}},
}


@pytest.fixture
def db():
    d = Database(None)
    d.define_schema(SCHEMA)
    return d


def test_vertex_ids_are_sequential_per_label(db):
    assert db.create_vertex("person") == VertexId(0, 0)
    assert db.create_vertex("person") == VertexId(0, 1)
    assert db.create_vertex("person", local_id=10) == VertexId(0, 10)
    with pytest.raises(DuplicateVertex):
        db.create_vertex("person", local_id=10)


def test_unknown_names(db):
    with pytest.raises(UnknownLabel):
        db.create_vertex("robot")
    with pytest.raises(UnknownField):
        db.create_vertex("person", {"height": 3})
    with pytest.raises(UnknownVertex):
        db.get_attribute(VertexId(0, 42), "name")


@pytest.mark.parametrize("field,value", [("age", "old"), ("age", 1.5), ("name", 3), ("emb", [1, 2])])
def test_type_checks(db, field, value):
    v = db.create_vertex("person")
    with pytest.raises((TypeMismatch, DimensionMismatch)):
        db.set_attribute(v, field, value)


def test_vector_attribute_dimension(db):
    v = db.create_vertex("person")
    with pytest.raises(DimensionMismatch):
        db.set_attribute(v, "emb", [1.0, 2.0])
    db.set_attribute(v, "emb", [1.0, 2.0, 3.0])
    assert np.array_equal(db.get_attribute(v, "emb"), np.array([1.0, 2.0, 3.0], dtype=np.float32))


def test_edge_attributes_and_removal(db):
    a, b = db.create_vertex("person"), db.create_vertex("person")
    ref = db.create_edge(a, "knows", b, {"since": 2001})
    assert isinstance(ref, EdgeRef)
    assert db.get_attribute(ref, "since") == 2001
    assert db.degree(a) == 1
    assert db.remove_edge(a, b, "knows", ref.edge_id)
    assert not db.remove_edge(a, b, "knows", ref.edge_id)
    with pytest.raises(UnknownVertex):
        db.get_attribute(ref, "since")


def test_delete_vertex_removes_edges(db):
    a, b, c = (db.create_vertex("person") for _ in range(3))
    db.create_edge(a, "knows", b)
    db.create_edge(b, "knows", c)
    db.delete_vertex(b)
    assert db.degree(a) == 0
    assert db.neighbors(c, "in") == []
    assert not db.has_vertex(b)


def test_schema_field_addition(db):
    db.add_field("person", "nick", "text")
    v = db.create_vertex("person", {"nick": "z"})
    assert db.get_attribute(v, "nick") == "z"
    with pytest.raises(SchemaError):
        db.add_field("person", "nick", "int")


def test_collection_errors(db):
    db.create_collection("c", 3, "euclidean")
    with pytest.raises(DuplicateCollection):
        db.create_collection("c", 3)
    with pytest.raises(UnknownCollection):
        db.knn_search("nope", [0, 0, 0], 1)
    with pytest.raises(BadDimension):
        db.create_collection("d", 0)
    with pytest.raises(DimensionMismatch):
        db.bulk_upsert("c", [(VertexId(0, 0), [1.0, 2.0], {})])
    with pytest.raises(ValueError):
        db.create_collection("e", 3, "manhattan")


def test_bound_collection_mirrors_attribute(db):
    db.create_vector_index("pe", "person", "emb", "euclidean")
    a = db.create_vertex("person", {"name": "a", "age": 30, "emb": [1, 0, 0]})
    b = db.create_vertex("person", {"name": "b", "age": 40})
    assert [h.key for h in db.knn_search("pe", [1, 0, 0], 5)] == [a]
    db.set_attribute(b, "emb", [0, 1, 0])
    hits = db.knn_search("pe", [0, 1, 0], 1)
    assert hits[0].key == b
    # scalar fields become payload; json fields are not mirrored
    db.set_attribute(b, "doc", {"k": [1]})
    assert db.collection("pe").payload.payloads[b] == {"name": "b", "age": 40}
    db.bulk_upsert("pe", [(a, [0, 0, 1], {})])
    assert np.array_equal(db.get_attribute(a, "emb"), np.array([0, 0, 1], dtype=np.float32))
    db.delete_points("pe", [a])
    assert db.get_attribute(a, "emb") is None
    db.delete_vertex(b)
    assert db.knn_search("pe", [0, 1, 0], 5) == []


def test_bound_collection_rejects_foreign_keys(db):
    db.create_vector_index("pe", "person", "emb")
    with pytest.raises(UnknownVertex):
        db.bulk_upsert("pe", [(VertexId(0, 99), [1, 0, 0], {})])
    with pytest.raises(DuplicateCollection):
        db.create_vector_index("pe2", "person", "emb")
    with pytest.raises(SchemaError):
        db.create_vector_index("pn", "person", "name")


def test_free_collection_is_independent_of_graph(db):
    db.create_collection("free", 2, "dot")
    db.bulk_upsert("free", [(VertexId(5, 5), [1, 2], {"tag": "x"})])
    db.create_vertex("person")
    db.delete_vertex(VertexId(0, 0))
    assert len(db.knn_search("free", [1, 1], 3)) == 1


def test_persistent_roundtrip(tmp_path):
    with Database(tmp_path) as d:
        d.define_schema(SCHEMA)
        d.create_vector_index("pe", "person", "emb")
        for i in range(20):
            d.create_vertex("person", {"name": f"p{i}", "emb": [i, 1, 0], "doc": {"i": i}})
        d.create_edge(VertexId(0, 0), "knows", VertexId(0, 1), {"since": 5})
        expected = d.state_digest()
    with Database(tmp_path) as d:
        assert d.state_digest() == expected
        assert d.get_attribute(VertexId(0, 3), "doc") == {"i": 3}


def test_threshold_survives_checkpoint(tmp_path):
    with Database(tmp_path, threshold=2) as d:
        d.define_schema(SCHEMA)
        vs = [d.create_vertex("person") for _ in range(5)]
        for v in vs[1:]:
            d.create_edge(vs[0], "knows", v)
        d.checkpoint()
        assert d.engine.topology.collection(vs[0], "out", 0).representation == "large"
    with Database(tmp_path, threshold=2) as d:
        assert d.engine.topology.collection(vs[0], "out", 0).representation == "large"


def test_in_memory_database_cannot_checkpoint(db):
    with pytest.raises(RuntimeError):
        db.checkpoint()
