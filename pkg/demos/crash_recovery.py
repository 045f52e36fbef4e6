"""Write, checkpoint, write more, crash, reopen: nothing acknowledged is lost."""

import shutil
import tempfile
from pathlib import Path

from arcforge import Database

root = Path(tempfile.mkdtemp(prefix="arcforge-demo-"))
try:
    db = Database(root)
    db.define_schema({"vertex_labels": {"acct": {"balance": "int"}}, "edge_labels": {"pays": {}}})
    accts = [db.create_vertex("acct", {"balance": 100}) for _ in range(10)]
    lsn = db.checkpoint()
    print(f"checkpoint at lsn {lsn}")

    for a, b in zip(accts, accts[1:]):
        db.create_edge(a, "pays", b)
        db.set_attribute(b, "balance", db.get_attribute(b, "balance") + 5)
    before = db.state_digest()
    print(f"applied through lsn {db.applied_lsn}; simulating a crash")
    db.crash()

    again = Database(root)
    print(f"recovered: checkpoint {again.checkpoint_lsn}, replayed to lsn {again.applied_lsn}")
    assert again.state_digest() == before
    print("state matches what was acknowledged before the crash")
    again.close()
finally:
    shutil.rmtree(root)
