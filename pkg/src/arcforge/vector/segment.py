"""Vector segments and their on-disk form.

A segment file is laid out as::

    header   magic "AVS1", dimension, metric, point count, HNSW parameters
    vectors  n x dim float32, row-major
    hnsw     levels, layer-0 lists, upper-layer lists (u32 ids, 0xFFFFFFFF = empty)
    keys     n x (u16 label_id, u64 local_id)

Every block starts on an 8-byte boundary so sealed segments can be mapped
straight into memory.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..model import VertexId
from .distance import METRIC_CODES, METRICS
from .hnsw import MAX_LEVEL, HNSWIndex

MAGIC = b"AVS1"
HEADER = struct.Struct("<4sIIIQIIQqIQQB7x")
MUTABLE = "mutable"
SEALED = "sealed"


class Segment:
    def __init__(self, seg_id: int, dim: int, metric: str, m: int, ef_construction: int,
                 seed: int, capacity: int = 64):
        self.id = seg_id
        self.dim = dim
        self.metric = metric
        self.state = MUTABLE
        self.index = HNSWIndex(dim, metric, m, ef_construction, seed, capacity)
        self._raw = np.zeros((max(capacity, 1), dim), dtype=np.float32)
        self.keys: list[VertexId] = []
        self.deleted = np.zeros(max(capacity, 1), dtype=np.bool_)
        self.tombstones = 0

    def __len__(self) -> int:
        """Physical point count (live plus tombstoned)."""
        return len(self.keys)

    @property
    def live(self) -> int:
        return len(self.keys) - self.tombstones

    @property
    def tombstone_ratio(self) -> float:
        return self.tombstones / len(self.keys) if self.keys else 0.0

    @property
    def vectors(self) -> np.ndarray:
        return self._raw[:len(self.keys)]

    def add(self, keys: list[VertexId], vectors: np.ndarray) -> np.ndarray:
        if self.state != MUTABLE:
            raise RuntimeError(f"segment {self.id} is sealed")
        n0 = len(self.keys)
        n1 = n0 + len(keys)
        if n1 > self._raw.shape[0]:
            cap = max(n1, 2 * self._raw.shape[0])
            raw = np.zeros((cap, self.dim), dtype=np.float32)
            raw[:n0] = self._raw[:n0]
            self._raw = raw
            deleted = np.zeros(cap, dtype=np.bool_)
            deleted[:n0] = self.deleted[:n0]
            self.deleted = deleted
        self._raw[n0:n1] = vectors
        self.keys.extend(keys)
        return self.index.add(vectors)

    def tombstone(self, ordinal: int) -> None:
        if not self.deleted[ordinal]:
            self.deleted[ordinal] = True
            self.tombstones += 1

    def seal(self) -> None:
        self.state = SEALED

    def search(self, query: np.ndarray, ef: int, allowed: np.ndarray | None
               ) -> tuple[np.ndarray, int]:
        """Ordinals of up to ``ef`` nearest accepted points and the visit count."""
        n = len(self.keys)
        if allowed is None and self.tombstones:
            allowed = ~self.deleted[:n]
        ids, _, visited = self.index.search(query, ef, allowed)
        return ids, visited

    # -- file image -----------------------------------------------------------

    def save(self, path: Path) -> None:
        n = len(self.keys)
        arrays = self.index.arrays()
        ucount = len(arrays["up"])
        header = HEADER.pack(MAGIC, 1, self.dim, METRIC_CODES[self.metric], n,
                             self.index.m, self.index.ef_construction, self.index.seed,
                             self.index.entry_point, self.index.max_level, ucount, self.id,
                             1 if self.state == SEALED else 0)
        labels = np.array([k[0] for k in self.keys], dtype="<u2")
        locals_ = np.array([k[1] for k in self.keys], dtype="<u8")
        blocks = [
            self.vectors.astype("<f4"),
            arrays["levels"].astype("<i4"),
            arrays["l0"].astype("<i4").view("<u4"),
            arrays["l0n"].astype("<i4"),
            arrays["uidx"].astype("<i4"),
            arrays["up"].astype("<i4").view("<u4"),
            arrays["upn"].astype("<i4"),
            labels,
            locals_,
        ]
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(header)
            for block in blocks:
                fh.write(np.ascontiguousarray(block).tobytes())
                pad = (-fh.tell()) % 8
                fh.write(b"\0" * pad)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Path, mmap: bool = True) -> "Segment":
        """Open a segment file; sealed segments are memory-mapped read-only."""
        with open(path, "rb") as fh:
            head = fh.read(HEADER.size)
        (magic, _version, dim, metric_code, n, m, efc, seed, entry, max_level, ucount,
         seg_id, sealed) = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a vector segment file")
        metric = METRICS[metric_code]
        m0 = 2 * m
        shapes = [
            ("vectors", "<f4", (n, dim)),
            ("levels", "<i4", (n,)),
            ("l0", "<i4", (n, m0)),
            ("l0n", "<i4", (n,)),
            ("uidx", "<i4", (n,)),
            ("up", "<i4", (ucount, MAX_LEVEL, m)),
            ("upn", "<i4", (ucount, MAX_LEVEL)),
            ("labels", "<u2", (n,)),
            ("locals", "<u8", (n,)),
        ]
        use_map = mmap and sealed and n > 0
        raw = np.memmap(path, dtype=np.uint8, mode="r") if use_map else np.fromfile(path, dtype=np.uint8)
        offset = HEADER.size
        blocks = {}
        for name, dtype, shape in shapes:
            count = int(np.prod(shape))
            nbytes = count * np.dtype(dtype).itemsize
            view = np.asarray(raw[offset:offset + nbytes]).view(dtype).reshape(shape)
            blocks[name] = view if use_map else view.copy()
            offset += nbytes + (-(offset + nbytes)) % 8
        seg = cls.__new__(cls)
        seg.id = int(seg_id)
        seg.dim = dim
        seg.metric = metric
        seg.state = SEALED if sealed else MUTABLE
        seg.keys = [VertexId(int(a), int(b)) for a, b in zip(blocks["labels"].tolist(), blocks["locals"].tolist())]
        seg.deleted = np.zeros(max(n, 1), dtype=np.bool_)
        seg.tombstones = 0
        arrays = {k: blocks[k] for k in ("levels", "l0", "l0n", "uidx", "up", "upn")}
        if use_map:
            seg._raw = blocks["vectors"]
            seg.index = HNSWIndex.mapped(dim, metric, m, efc, seed, blocks["vectors"], arrays,
                                         entry, max_level)
        else:
            seg._raw = np.array(blocks["vectors"], dtype=np.float32).reshape(n, dim) if n else \
                np.zeros((1, dim), dtype=np.float32)
            seg.index = HNSWIndex.from_arrays(dim, metric, m, efc, seed, blocks["vectors"], arrays,
                                              entry, max_level)
        return seg
