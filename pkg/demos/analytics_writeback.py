"""Rank a generated power-law graph and store the result as a vertex field."""

from arcforge import Database, datagen
from arcforge.analytics import pagerank, weakly_connected_components, writeback

graph = datagen.social_graph(n_persons=2000, n_edges=12_000, seed=1)
print("out-degree:", graph.degree_summary())

db = Database(None)
datagen.load_into(db, graph)

pr = pagerank(db, damping=0.85, max_iter=100, tol=1e-10)
print(f"pagerank converged after {pr.metadata.get('iterations')} iterations")
writeback(db, pr, "rank")

wcc = weakly_connected_components(db)
print(f"{wcc.metadata['components']} weakly connected components")
writeback(db, wcc, "component")

top = db.query("MATCH (p:person) RETURN p.firstName, p.lastName, p.rank ORDER BY p.rank DESC LIMIT 5")
for first, last, rank in top.rows:
    print(f"  {first} {last}: {rank:.5f}")
