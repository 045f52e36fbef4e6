"""Build a small social graph with embeddings and query it both ways."""

import numpy as np

from arcforge import Database, VertexId

db = Database(None)
db.define_schema({
    "vertex_labels": {"person": {"name": "text", "age": "int", "emb": "vector(4)"}},
    "edge_labels": {"knows": {"since": "int"}},
})
db.create_vector_index("person_emb", "person", "emb", "cosine")

rng = np.random.default_rng(0)
names = ["ada", "bo", "cy", "dee", "eli", "fay", "gus", "hal"]
people = [db.create_vertex("person", {"name": n, "age": int(20 + 5 * i), "emb": rng.normal(size=4)})
          for i, n in enumerate(names)]
for i, p in enumerate(people):
    db.create_edge(p, "knows", people[(i + 1) % len(people)], {"since": 2000 + i})
    db.create_edge(p, "knows", people[(i + 3) % len(people)], {"since": 2010 + i})

print("friends of friends of ada:")
res = db.query("MATCH (a:person {name: 'ada'})-[:knows*2]->(c:person) RETURN DISTINCT c.name")
for (name,) in res.rows:
    print("  ", name)

q = [1.0, 0.0, 0.0, 0.0]
text = ("MATCH (n:person) WHERE n.age > 25 RETURN n.name, vector_similarity(n.emb, $q) AS s "
        "ORDER BY s DESC LIMIT 3")
print("\nplan:")
print(db.explain(text, {"q": q}))
print("\nclosest people over 25:")
for name, s in db.query(text, {"q": q}).rows:
    print(f"   {name:4s} {s:.3f}")

hits = db.knn_search("person_emb", q, 2)
print("\ndirect knn:", [(db.get_attribute(h.key, "name"), round(h.score, 3)) for h in hits])
assert db.degree(VertexId(0, 0)) == 2
