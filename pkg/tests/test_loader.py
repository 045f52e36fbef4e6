import json

import numpy as np
import pytest

from arcforge import Database, VertexId, datagen
from arcforge.loader import LoadError, load, parse_vector

SCHEMA = {"vertex_labels": {"person": {"name": "text", "age": "int", "emb": "vector(3)"}},
          "edge_labels": {"knows": {"since": "int"}}}


def write_toy(tmp_path, persons, knows, delimiter="|", **extra):
    (tmp_path / "person.csv").write_text(persons)
    (tmp_path / "knows.csv").write_text(knows)
    manifest = {
        "schema": SCHEMA,
        "delimiter": delimiter,
        "files": [
            {"path": "person.csv", "kind": "vertex", "label": "person", "id": "id",
             "columns": {"name": "name", "age": "age"}},
            {"path": "knows.csv", "kind": "edge", "label": "knows",
             "src": {"label": "person", "column": "a"}, "dst": {"label": "person", "column": "b"},
             "columns": {"since": "since"}},
        ],
        **extra,
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


TOY_PERSONS = "id|name|age\n0|ann|31\n1|bo|\n2|cy|40\n"
TOY_KNOWS = "a|b|since\n0|1|2001\n1|2|2010\n"


def test_toy_load_counts(tmp_path):
    db = Database(None)
    report = load(db, write_toy(tmp_path, TOY_PERSONS, TOY_KNOWS))
    assert report.counts() == {"vertices": 3, "edges": 2, "vectors": 0}
    assert report.rejected == 0 and report.rejects_path is None
    assert db.get_attribute(VertexId(0, 1), "age") is None
    assert db.get_attribute(VertexId(0, 2), "name") == "cy"
    assert [e.neighbor for e in db.neighbors(VertexId(0, 0))] == [VertexId(0, 1)]


def test_empty_files_load_nothing(tmp_path):
    db = Database(None)
    report = load(db, write_toy(tmp_path, "", ""))
    assert report.counts() == {"vertices": 0, "edges": 0, "vectors": 0}
    assert report.rows == 0


def test_comma_delimiter(tmp_path):
    db = Database(None)
    path = write_toy(tmp_path, TOY_PERSONS.replace("|", ","), TOY_KNOWS.replace("|", ","), delimiter=",")
    assert load(db, path).counts()["edges"] == 2


def test_bad_rows_go_to_rejects(tmp_path):
    persons = TOY_PERSONS + "3|dee|old\n-1|neg|5\n"
    knows = TOY_KNOWS + "0|99|2000\n"
    db = Database(None)
    with pytest.raises(LoadError, match="rejected"):
        load(db, write_toy(tmp_path, persons, knows))
    db = Database(None)
    report = load(db, write_toy(tmp_path, persons, knows), max_reject_ratio=0.5)
    assert report.rejected == 3
    assert report.reject_ratio == pytest.approx(3 / 8)
    lines = (tmp_path / "rejects.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("file")
    assert report.counts() == {"vertices": 3, "edges": 2, "vectors": 0}


def test_manifest_errors(tmp_path):
    with pytest.raises(LoadError):
        load(Database(None), tmp_path / "absent.json")
    (tmp_path / "m.json").write_text(json.dumps({"files": [{"path": "nope.csv", "kind": "vertex"}]}))
    with pytest.raises(LoadError, match="missing"):
        load(Database(None), tmp_path / "m.json")
    path = write_toy(tmp_path, TOY_PERSONS, TOY_KNOWS, delimiter=";")
    with pytest.raises(LoadError, match="delimiter"):
        load(Database(None), path)


def test_undeclared_label_is_rejected_up_front(tmp_path):
    path = write_toy(tmp_path, TOY_PERSONS, TOY_KNOWS)
    manifest = json.loads(path.read_text())
    manifest["files"][1]["label"] = "likes"
    path.write_text(json.dumps(manifest))
    with pytest.raises(LoadError, match="undeclared"):
        load(Database(None), path)


@pytest.mark.parametrize("text", ["1;2;3", "1,2,3", "1 2 3", "[1;2;3]"])
def test_vector_cell_forms(text):
    assert parse_vector(text) == [1.0, 2.0, 3.0]


def test_vectors_into_bound_collection(tmp_path):
    persons = "id|name|emb\n0|ann|1;0;0\n1|bo|0;1;0\n2|cy|\n3|dee|1;2\n"
    path = write_toy(tmp_path, persons, "a|b|since\n", max_reject_ratio=0.5,
                     collections=[{"name": "pe", "label": "person", "field": "emb", "metric": "euclidean"}])
    manifest = json.loads(path.read_text())
    manifest["files"][0]["columns"] = {"name": "name"}
    manifest["files"][0]["vectors"] = [{"column": "emb", "collection": "pe", "dim": 3}]
    path.write_text(json.dumps(manifest))
    db = Database(None)
    report = load(db, path)
    assert report.vectors == 2 and report.vertices == 3 and report.rejected == 1
    assert db.knn_search("pe", [0, 1, 0], 1)[0].key == VertexId(0, 1)
    assert np.array_equal(db.get_attribute(VertexId(0, 0), "emb"), np.array([1, 0, 0], dtype=np.float32))


def test_load_is_deterministic(tmp_path):
    graph = datagen.social_graph(300, 2000, seed=4)
    manifest = datagen.write_csv(graph, tmp_path)
    digests = []
    for _ in range(2):
        db = Database(None)
        load(db, manifest)
        digests.append(db.state_digest())
    assert digests[0] == digests[1]


def test_power_law_edges_all_arrive(tmp_path):
    graph = datagen.social_graph(2000, 10_000, seed=1)
    manifest = datagen.write_csv(graph, tmp_path)
    lines = (tmp_path / "person_knows_person.csv").read_text().count("\n") - 1
    db = Database(tmp_path / "db", durability="group")
    report = load(db, manifest)
    assert report.edges == lines == 10_000
    assert report.vertices == 2000
    assert report.degree["max"] > 10 * report.degree["median"]
    db.close()
