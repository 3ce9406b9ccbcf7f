"""Append-only journal and snapshot encoding.

Journal file: length-prefixed binary records, each
{seq: u64, sim_time: u64, virtual_tick: u64, kind: u8, payload bytes, crc32}.
Snapshot file: header {magic "PVW1", journal_pos} + canonical entity dump
sorted by id. Replaying snapshot + journal suffix reproduces live state.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable

from pervadia.errors import CorruptSnapshotError, JournalGapError

SNAPSHOT_MAGIC = b"PVW1"

# Record kinds
KIND_CREATE_ENTITY = 1
KIND_SET_PROPERTY = 2
KIND_MOVE_ENTITY = 3
KIND_TICK = 4
KIND_CREATE_TIMER = 5
KIND_CANCEL_TIMER = 6
KIND_DESPAWN = 7

_HEADER = struct.Struct("<QQQB")  # seq, sim_time, virtual_tick, kind


@dataclass(frozen=True)
class JournalRecord:
    seq: int
    sim_time: int
    virtual_tick: int
    kind: int
    payload: dict

    def encode(self) -> bytes:
        body = _HEADER.pack(self.seq, self.sim_time, self.virtual_tick, self.kind)
        body += json.dumps(self.payload, sort_keys=True, separators=(",", ":")).encode()
        crc = zlib.crc32(body)
        return struct.pack("<I", len(body)) + body + struct.pack("<I", crc)


def decode_records(blob: bytes) -> list[JournalRecord]:
    """Decode a byte stream of records, verifying CRCs and gapless seq."""
    records: list[JournalRecord] = []
    offset = 0
    while offset < len(blob):
        if offset + 4 > len(blob):
            raise JournalGapError("truncated record length prefix")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + length + 4 > len(blob):
            raise JournalGapError("truncated record body")
        body = blob[offset : offset + length]
        (crc,) = struct.unpack_from("<I", blob, offset + length)
        offset += length + 4
        if zlib.crc32(body) != crc:
            raise JournalGapError("record CRC mismatch")
        seq, sim_time, virtual_tick, kind = _HEADER.unpack_from(body)
        payload = json.loads(body[_HEADER.size :].decode())
        records.append(JournalRecord(seq, sim_time, virtual_tick, kind, payload))
    _check_gapless(records)
    return records


def encode_records(records: Iterable[JournalRecord]) -> bytes:
    return b"".join(r.encode() for r in records)


def _check_gapless(records: list[JournalRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if cur.seq != prev.seq + 1:
            raise JournalGapError(f"seq gap: {prev.seq} -> {cur.seq}")


def encode_snapshot(journal_pos: int, state: dict) -> bytes:
    """Snapshot blob: magic, journal position, canonical JSON state, crc32."""
    body = json.dumps(state, sort_keys=True, separators=(",", ":")).encode()
    crc = zlib.crc32(body)
    return SNAPSHOT_MAGIC + struct.pack("<qI", journal_pos, crc) + body


def decode_snapshot(blob: bytes) -> tuple[int, dict]:
    if blob[:4] != SNAPSHOT_MAGIC:
        raise CorruptSnapshotError("bad snapshot magic")
    journal_pos, crc = struct.unpack_from("<qI", blob, 4)
    body = blob[4 + struct.calcsize("<qI") :]
    if zlib.crc32(body) != crc:
        raise CorruptSnapshotError("snapshot checksum mismatch")
    return journal_pos, json.loads(body.decode())
