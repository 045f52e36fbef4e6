"""Checkpoint directories.

Layout under the data directory::

    checkpoint/<lsn>/catalog.json          schema + engine counters
    checkpoint/<lsn>/topology_image.npz    vertices and forward edges
    checkpoint/<lsn>/attribute_image.jsonl attribute and payload key-value pairs
    checkpoint/<lsn>/vectors/<collection>/ segment files + collection.json
    checkpoint/<lsn>/MANIFEST.json         crc32c of every file above
    CURRENT                                name of the latest valid checkpoint

A checkpoint is assembled in ``checkpoint/<lsn>.tmp`` and renamed into place
before ``CURRENT`` is (atomically) switched, so a crash at any point leaves
the previous checkpoint as the recovery base.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

import crc32c

from ..errors import CorruptCheckpoint
from .log import _fsync_dir

log = logging.getLogger(__name__)

CURRENT = "CURRENT"
MANIFEST = "MANIFEST.json"
KEEP = 2


def _file_crc(path: Path) -> int:
    crc = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            crc = crc32c.crc32c(chunk, crc)
    return crc


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def _write_lines(path: Path, rows: Iterable[Any]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


@dataclass
class CheckpointContent:
    """What the engine hands over to be persisted."""

    lsn: int
    catalog: dict
    write_topology: Callable[[Path], None]
    attribute_rows: Iterable[Any]
    write_vectors: Callable[[Path], list[str]]


def write_checkpoint(root: Path, content: CheckpointContent) -> Path:
    base = root / "checkpoint"
    base.mkdir(parents=True, exist_ok=True)
    final = base / str(content.lsn)
    tmp = base / f"{content.lsn}.tmp"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    _write_json(tmp / "catalog.json", content.catalog)
    content.write_topology(tmp / "topology_image.npz")
    _write_lines(tmp / "attribute_image.jsonl", content.attribute_rows)
    manifest_vectors = content.write_vectors(tmp / "vectors")
    files = sorted(p for p in tmp.rglob("*") if p.is_file())
    for p in files:
        with open(p, "rb") as fh:
            os.fsync(fh.fileno())
    manifest = {
        "lsn": content.lsn,
        "vector_manifest": manifest_vectors,
        "files": {str(p.relative_to(tmp)): _file_crc(p) for p in files},
    }
    _write_json(tmp / MANIFEST, manifest)
    with open(tmp / MANIFEST, "rb") as fh:
        os.fsync(fh.fileno())
    _fsync_dir(tmp)
    if final.exists():
        shutil.rmtree(final)
    os.rename(tmp, final)
    _fsync_dir(base)
    cur_tmp = root / (CURRENT + ".tmp")
    cur_tmp.write_text(str(content.lsn))
    with open(cur_tmp, "rb") as fh:
        os.fsync(fh.fileno())
    os.replace(cur_tmp, root / CURRENT)
    _fsync_dir(root)
    _remove_old(base, keep_from=content.lsn)
    return final


def _remove_old(base: Path, keep_from: int) -> None:
    lsns = sorted(list_checkpoints(base.parent), reverse=True)
    keep = set(lsns[:KEEP]) | {keep_from}
    for lsn in lsns:
        if lsn not in keep:
            shutil.rmtree(base / str(lsn), ignore_errors=True)
    for stale in base.glob("*.tmp"):
        shutil.rmtree(stale, ignore_errors=True)


def list_checkpoints(root: Path) -> list[int]:
    base = root / "checkpoint"
    if not base.is_dir():
        return []
    out = []
    for p in base.iterdir():
        if p.is_dir() and p.name.isdigit():
            out.append(int(p.name))
    return sorted(out)


def current_lsn(root: Path) -> int | None:
    path = root / CURRENT
    if not path.exists():
        return None
    text = path.read_text().strip()
    return int(text) if text.isdigit() else None


def verify(path: Path) -> dict:
    """Check every file against the manifest; return the manifest."""
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except (OSError, ValueError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable manifest ({exc})") from exc
    for rel, crc in manifest.get("files", {}).items():
        f = path / rel
        if not f.is_file():
            raise CorruptCheckpoint(f"{path}: missing {rel}")
        if _file_crc(f) != crc:
            raise CorruptCheckpoint(f"{path}: checksum mismatch in {rel}")
    if int(manifest.get("lsn", -1)) != int(path.name):
        raise CorruptCheckpoint(f"{path}: manifest lsn does not match directory")
    return manifest


def candidates(root: Path) -> list[Path]:
    """Checkpoint directories to try, best first (CURRENT, then newest)."""
    base = root / "checkpoint"
    order = []
    cur = current_lsn(root)
    if cur is not None:
        order.append(cur)
    order.extend(l for l in sorted(list_checkpoints(root), reverse=True) if l != cur)
    return [base / str(l) for l in order]


def read_lines(path: Path) -> Iterable[Any]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
