"""Adaptive edge collection.

Low-degree vertices keep their edges in a packed, sorted byte array: fixed
18-byte big-endian records ``(neighbor label u16, neighbor local id u64,
edge id u64)``.  Big-endian packing makes bytewise comparison agree with
tuple comparison, so membership is a binary search over raw bytes and
iteration is a single ``struct.iter_unpack``.

Once a collection holds more than ``threshold`` entries it switches, once and
for good, to a ``SortedList`` of tuples (the ordered-set representation).
Both representations iterate in the same ascending order.
"""

from __future__ import annotations

import struct
import sys
from typing import Iterable, Iterator

from sortedcontainers import SortedList

Entry = tuple[int, int, int]

RECORD = struct.Struct(">HQQ")
RECORD_SIZE = RECORD.size

DEFAULT_THRESHOLD = 128

SMALL = "small"
LARGE = "large"

# per-key cost of the ordered-set representation: the tuple plus its three ints
_TUPLE_BYTES = sys.getsizeof((0, 0, 0))


def _int_bytes(x: int) -> int:
    return sys.getsizeof(x)


class AdaptiveEdgeCollection:
    """Set of edge entries whose storage adapts to its size.

    ``threshold=None`` disables the upgrade (always packed); ``threshold=0``
    upgrades on the first insert (always ordered set).
    """

    __slots__ = ("threshold", "_buf", "_set")

    def __init__(self, threshold: int | None = DEFAULT_THRESHOLD):
        if threshold is not None and threshold < 0:
            raise ValueError("threshold must be non-negative or None")
        self.threshold = threshold
        self._buf: bytearray | None = bytearray()
        self._set: SortedList | None = None

    @classmethod
    def from_sorted(cls, packed: bytes, threshold: int | None = DEFAULT_THRESHOLD
                    ) -> "AdaptiveEdgeCollection":
        """Build from already sorted, duplicate-free packed records."""
        coll = cls(threshold)
        n = len(packed) // RECORD_SIZE
        if threshold is not None and n > threshold:
            coll._buf = None
            coll._set = SortedList(RECORD.iter_unpack(packed))
        else:
            coll._buf = bytearray(packed)
        return coll

    @property
    def representation(self) -> str:
        return SMALL if self._set is None else LARGE

    def __len__(self) -> int:
        if self._set is None:
            return len(self._buf) // RECORD_SIZE
        return len(self._set)

    def _locate(self, packed: bytes) -> tuple[int, bool]:
        buf = self._buf
        n = len(buf) // RECORD_SIZE
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) >> 1
            start = mid * RECORD_SIZE
            if buf[start:start + RECORD_SIZE] < packed:
                lo = mid + 1
            else:
                hi = mid
        start = lo * RECORD_SIZE
        return lo, lo < n and buf[start:start + RECORD_SIZE] == packed

    def __contains__(self, entry: Entry) -> bool:
        if self._set is not None:
            return entry in self._set
        return self._locate(RECORD.pack(*entry))[1]

    def add(self, entry: Entry) -> bool:
        """Insert ``entry``; return False if it was already present."""
        if self._set is not None:
            if entry in self._set:
                return False
            self._set.add(entry)
            return True
        packed = RECORD.pack(*entry)
        pos, found = self._locate(packed)
        if found:
            return False
        count = len(self._buf) // RECORD_SIZE
        if self.threshold is not None and count + 1 > self.threshold:
            upgraded = SortedList(RECORD.iter_unpack(self._buf))
            upgraded.add(entry)
            # single reference swap; a reader sees either the old or new form
            self._set = upgraded
            self._buf = None
            return True
        start = pos * RECORD_SIZE
        self._buf[start:start] = packed
        return True

    def upgrade(self) -> None:
        """Switch to the ordered-set form now (used when restoring images)."""
        if self._set is None:
            self._set = SortedList(RECORD.iter_unpack(self._buf))
            self._buf = None

    def discard(self, entry: Entry) -> bool:
        """Remove ``entry``; return False if absent.  Never downgrades."""
        if self._set is not None:
            if entry not in self._set:
                return False
            self._set.remove(entry)
            return True
        pos, found = self._locate(RECORD.pack(*entry))
        if not found:
            return False
        start = pos * RECORD_SIZE
        del self._buf[start:start + RECORD_SIZE]
        return True

    def __iter__(self) -> Iterator[Entry]:
        if self._set is not None:
            return iter(list(self._set))
        return RECORD.iter_unpack(bytes(self._buf))

    def packed(self) -> bytes:
        """All entries as sorted packed records (checkpoint image form)."""
        if self._set is None:
            return bytes(self._buf)
        return b"".join(RECORD.pack(*e) for e in self._set)

    def nbytes(self) -> int:
        """Bytes attributable to this collection, by allocation accounting."""
        own = sys.getsizeof(self)
        if self._set is None:
            return own + sys.getsizeof(self._buf)
        sl = self._set
        total = own + sys.getsizeof(sl) + sys.getsizeof(sl._lists) + sys.getsizeof(sl._maxes)
        total += sys.getsizeof(sl._index)
        for sub in sl._lists:
            total += sys.getsizeof(sub)
            for a, b, c in sub:
                total += _TUPLE_BYTES + _int_bytes(a) + _int_bytes(b) + _int_bytes(c)
        return total

    def __repr__(self) -> str:
        return f"AdaptiveEdgeCollection({self.representation}, n={len(self)}, threshold={self.threshold})"


def pack_entries(entries: Iterable[Entry]) -> bytes:
    return b"".join(RECORD.pack(*e) for e in sorted(set(entries)))
