"""WAL record types and binary framing.

Frame layout (little-endian)::

    u32 body_length | body = (u64 lsn, u8 op, payload bytes) | u32 crc32c(body)

Payloads are compact JSON with sorted keys, so encoding is deterministic and
vectors round-trip bit-exactly through base64 float32 blobs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any

import crc32c

OPS = (
    "CreateVertex",
    "DeleteVertex",
    "InsertEdge",
    "RemoveEdge",
    "SetAttribute",
    "CreateCollection",
    "DeleteCollection",
    "UpsertPoints",
    "DeletePoints",
    "SchemaChange",
)
OP_CODES = {name: i + 1 for i, name in enumerate(OPS)}
OP_NAMES = {code: name for name, code in OP_CODES.items()}

LENGTH = struct.Struct("<I")
BODY_HEAD = struct.Struct("<QB")
CRC = struct.Struct("<I")

MAX_BODY = 1 << 30


@dataclass(frozen=True)
class WalRecord:
    lsn: int
    op: str
    payload: dict[str, Any]

    def encode(self) -> bytes:
        return encode_frame(self.lsn, self.op, self.payload)


def encode_payload(payload: dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def encode_frame(lsn: int, op: str, payload: dict[str, Any]) -> bytes:
    body = BODY_HEAD.pack(lsn, OP_CODES[op]) + encode_payload(payload)
    return LENGTH.pack(len(body)) + body + CRC.pack(crc32c.crc32c(body))


class TornFrame(Exception):
    """Raised while scanning when the bytes at an offset are not a valid frame."""


def decode_frame(buf: bytes | memoryview, offset: int) -> tuple[WalRecord, int]:
    """Decode the frame starting at ``offset``; return it and the next offset."""
    end = len(buf)
    if offset + LENGTH.size > end:
        raise TornFrame("truncated length prefix")
    (length,) = LENGTH.unpack_from(buf, offset)
    if length < BODY_HEAD.size or length > MAX_BODY:
        raise TornFrame(f"implausible frame length {length}")
    body_start = offset + LENGTH.size
    body_end = body_start + length
    if body_end + CRC.size > end:
        raise TornFrame("truncated body")
    body = bytes(buf[body_start:body_end])
    (crc,) = CRC.unpack_from(buf, body_end)
    if crc != crc32c.crc32c(body):
        raise TornFrame("checksum mismatch")
    lsn, code = BODY_HEAD.unpack_from(body, 0)
    if code not in OP_NAMES:
        raise TornFrame(f"unknown op code {code}")
    try:
        payload = json.loads(body[BODY_HEAD.size:])
    except ValueError as exc:
        raise TornFrame("undecodable payload") from exc
    return WalRecord(lsn, OP_NAMES[code], payload), body_end + CRC.size
