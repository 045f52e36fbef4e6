"""Segmented write-ahead log.

Segments live in ``wal/<start_lsn>.log`` (zero padded so names sort).  On
open, the log is scanned; the first torn or checksum-failing frame marks the
end of the valid log, and everything after it is truncated away.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from pathlib import Path
from typing import Any, Iterator

from ..errors import IoError
from .records import TornFrame, WalRecord, decode_frame, encode_frame

log = logging.getLogger(__name__)

DEFAULT_SEGMENT_BYTES = 64 * 1024 * 1024
GROUP_WINDOW = 0.005

SYNC = "sync"    # fsync before append returns
GROUP = "group"  # fsync at most every GROUP_WINDOW seconds
DURABILITY_MODES = (SYNC, GROUP)


def segment_name(start_lsn: int) -> str:
    return f"{start_lsn:020d}.log"


class WriteAheadLog:
    def __init__(self, directory: str | os.PathLike, segment_bytes: int = DEFAULT_SEGMENT_BYTES,
                 durability: str = SYNC):
        if durability not in DURABILITY_MODES:
            raise ValueError(f"durability must be one of {DURABILITY_MODES}")
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.segment_bytes = segment_bytes
        self.durability = durability
        self.segments: list[tuple[int, Path]] = []
        self.last_lsn = 0
        self.truncated_bytes = 0
        self._fd = -1
        self._size = 0
        self._dirty = False
        self._last_sync = 0.0
        self._lock = threading.Lock()
        self._write = os.write  # swapped out by fault-injection tests
        self._flusher: threading.Thread | None = None
        self._closing = threading.Event()
        self._scan()
        self._open_active()

    # -- open / scan ----------------------------------------------------------

    def _list_segments(self) -> list[tuple[int, Path]]:
        out = []
        for p in self.dir.glob("*.log"):
            try:
                out.append((int(p.stem), p))
            except ValueError:
                continue
        return sorted(out)

    def _scan(self) -> None:
        segments = self._list_segments()
        valid: list[tuple[int, Path]] = []
        expected: int | None = None
        broken = False
        for start, path in segments:
            if broken or (expected is not None and start != expected):
                log.warning("dropping WAL segment %s past the end of the valid log", path.name)
                self.truncated_bytes += path.stat().st_size
                path.unlink()
                broken = True
                continue
            data = path.read_bytes()
            offset = 0
            lsn = start - 1
            while offset < len(data):
                try:
                    rec, nxt = decode_frame(data, offset)
                except TornFrame as exc:
                    log.warning("WAL %s: %s at byte %d; truncating", path.name, exc, offset)
                    broken = True
                    break
                if rec.lsn != lsn + 1:
                    log.warning("WAL %s: lsn %d after %d; truncating", path.name, rec.lsn, lsn)
                    broken = True
                    break
                lsn = rec.lsn
                offset = nxt
            if offset < len(data):
                self.truncated_bytes += len(data) - offset
                with open(path, "r+b") as fh:
                    fh.truncate(offset)
                    fh.flush()
                    os.fsync(fh.fileno())
            valid.append((start, path))
            expected = lsn + 1
            self.last_lsn = max(self.last_lsn, lsn)
        self.segments = valid

    def _open_active(self) -> None:
        if not self.segments:
            path = self.dir / segment_name(self.last_lsn + 1)
            self.segments.append((self.last_lsn + 1, path))
        path = self.segments[-1][1]
        self._fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
        self._size = os.fstat(self._fd).st_size

    @property
    def first_lsn(self) -> int:
        """Lowest lsn still on disk (or the next lsn if the log is empty)."""
        return self.segments[0][0] if self.segments else self.last_lsn + 1

    # -- reading --------------------------------------------------------------

    def records(self, after_lsn: int = 0) -> Iterator[WalRecord]:
        for i, (start, path) in enumerate(list(self.segments)):
            nxt_start = self.segments[i + 1][0] if i + 1 < len(self.segments) else None
            if nxt_start is not None and nxt_start - 1 <= after_lsn:
                continue
            data = path.read_bytes()
            offset = 0
            while offset < len(data):
                try:
                    rec, offset = decode_frame(data, offset)
                except TornFrame:
                    return
                if rec.lsn > after_lsn:
                    yield rec

    # -- writing --------------------------------------------------------------

    def append(self, op: str, payload: dict[str, Any]) -> int:
        """Durably append one record and return its lsn.

        On failure the partial write is cut off and :class:`IoError` raised;
        the lsn counter does not advance.
        """
        with self._lock:
            lsn = self.last_lsn + 1
            frame = encode_frame(lsn, op, payload)
            if self._size > 0 and self._size + len(frame) > self.segment_bytes:
                self._roll(lsn)
            try:
                view = memoryview(frame)
                while view:
                    n = self._write(self._fd, view)
                    view = view[n:]
                if self.durability == SYNC:
                    os.fsync(self._fd)
                else:
                    self._dirty = True
                    self._maybe_group_sync()
            except OSError as exc:
                try:
                    os.ftruncate(self._fd, self._size)
                except OSError:
                    pass
                raise IoError(f"WAL append failed: {exc}") from exc
            self._size += len(frame)
            self.last_lsn = lsn
            return lsn

    def _maybe_group_sync(self) -> None:
        now = time.monotonic()
        if now - self._last_sync >= GROUP_WINDOW:
            os.fsync(self._fd)
            self._dirty = False
            self._last_sync = now
        elif self._flusher is None:
            self._flusher = threading.Thread(target=self._flush_loop, name="wal-flush", daemon=True)
            self._flusher.start()

    def _flush_loop(self) -> None:
        while not self._closing.wait(GROUP_WINDOW):
            with self._lock:
                if self._dirty and self._fd >= 0:
                    os.fsync(self._fd)
                    self._dirty = False
                    self._last_sync = time.monotonic()

    def _roll(self, start_lsn: int) -> None:
        os.fsync(self._fd)
        os.close(self._fd)
        path = self.dir / segment_name(start_lsn)
        self.segments.append((start_lsn, path))
        self._fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
        self._size = 0
        _fsync_dir(self.dir)

    def sync(self) -> None:
        with self._lock:
            if self._fd >= 0:
                os.fsync(self._fd)
                self._dirty = False

    def prune(self, upto_lsn: int) -> int:
        """Delete segments holding only records <= ``upto_lsn``; returns the count."""
        with self._lock:
            if upto_lsn <= 0:
                return 0
            if self.last_lsn <= upto_lsn and self._size > 0:
                self._roll(self.last_lsn + 1)
            removed = 0
            while len(self.segments) > 1 and self.segments[1][0] - 1 <= upto_lsn:
                _, path = self.segments.pop(0)
                path.unlink(missing_ok=True)
                removed += 1
            if removed:
                _fsync_dir(self.dir)
            return removed

    def reset(self, next_lsn: int) -> None:
        """Discard every segment and continue numbering at ``next_lsn``."""
        with self._lock:
            if self._fd >= 0:
                os.close(self._fd)
            for _, path in self.segments:
                path.unlink(missing_ok=True)
            path = self.dir / segment_name(next_lsn)
            self.segments = [(next_lsn, path)]
            self.last_lsn = next_lsn - 1
            self._fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
            self._size = 0
            _fsync_dir(self.dir)

    def close(self) -> None:
        self._closing.set()
        with self._lock:
            if self._fd >= 0:
                os.fsync(self._fd)
                os.close(self._fd)
                self._fd = -1
        if self._flusher is not None:
            self._flusher.join(timeout=1)

    def abandon(self) -> None:
        """Drop the file handle without syncing, as a crashed process would."""
        self._closing.set()
        with self._lock:
            if self._fd >= 0:
                os.close(self._fd)
                self._fd = -1


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)
