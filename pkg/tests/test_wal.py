import os

import pytest

from arcforge import Database
from arcforge.errors import CorruptCheckpoint, IoError, PruneBeyondCheckpoint
from arcforge.wal import checkpoint as ckpt
from arcforge.wal.log import WriteAheadLog
from arcforge.wal.records import TornFrame, decode_frame, encode_frame


def test_frame_roundtrip():
    frame = encode_frame(7, "SetAttribute", {"field": "x", "value": [1, 2]})
    rec, end = decode_frame(frame, 0)
    assert (rec.lsn, rec.op, rec.payload) == (7, "SetAttribute", {"field": "x", "value": [1, 2]})
    assert end == len(frame)
    assert rec.encode() == frame


@pytest.mark.parametrize("cut", [1, 3, 4, 12, -1])
def test_truncated_frame_is_torn(cut):
    frame = encode_frame(1, "CreateVertex", {"v": [0, 0]})
    with pytest.raises(TornFrame):
        decode_frame(frame[:cut], 0)


def test_flipped_byte_fails_checksum():
    frame = bytearray(encode_frame(1, "CreateVertex", {"v": [0, 0]}))
    frame[-6] ^= 0x01
    with pytest.raises(TornFrame, match="checksum"):
        decode_frame(bytes(frame), 0)


def _fill(wal, n):
    return [wal.append("CreateVertex", {"v": [0, i]}) for i in range(n)]


def test_append_assigns_consecutive_lsns(tmp_path):
    wal = WriteAheadLog(tmp_path)
    assert _fill(wal, 5) == [1, 2, 3, 4, 5]
    wal.close()
    again = WriteAheadLog(tmp_path)
    assert again.last_lsn == 5
    assert [r.lsn for r in again.records(after_lsn=2)] == [3, 4, 5]
    again.close()


def test_torn_tail_is_truncated_on_open(tmp_path):
    wal = WriteAheadLog(tmp_path)
    _fill(wal, 3)
    wal.close()
    seg = sorted(tmp_path.glob("*.log"))[-1]
    size = seg.stat().st_size
    with open(seg, "ab") as fh:
        fh.write(encode_frame(4, "CreateVertex", {"v": [0, 3]})[:-3])
    wal = WriteAheadLog(tmp_path)
    assert wal.last_lsn == 3
    assert wal.truncated_bytes > 0
    assert seg.stat().st_size == size
    assert wal.append("CreateVertex", {"v": [0, 9]}) == 4
    wal.close()


def test_corrupt_middle_record_ends_the_log(tmp_path):
    wal = WriteAheadLog(tmp_path)
    _fill(wal, 4)
    wal.close()
    seg = sorted(tmp_path.glob("*.log"))[0]
    data = bytearray(seg.read_bytes())
    one = len(encode_frame(1, "CreateVertex", {"v": [0, 0]}))
    data[one + 10] ^= 0xFF  # inside record 2
    seg.write_bytes(bytes(data))
    wal = WriteAheadLog(tmp_path)
    assert wal.last_lsn == 1
    wal.close()


def test_segments_roll_and_prune(tmp_path):
    wal = WriteAheadLog(tmp_path, segment_bytes=200)
    _fill(wal, 20)
    assert len(wal.segments) > 2
    before = len(wal.segments)
    removed = wal.prune(10)
    assert removed > 0 and len(wal.segments) == before - removed
    assert wal.first_lsn <= 11
    assert [r.lsn for r in wal.records(after_lsn=10)] == list(range(11, 21))
    wal.close()
    wal = WriteAheadLog(tmp_path, segment_bytes=200)
    assert wal.last_lsn == 20
    wal.close()


def test_reset_continues_numbering(tmp_path):
    wal = WriteAheadLog(tmp_path)
    _fill(wal, 3)
    wal.reset(50)
    assert wal.append("CreateVertex", {"v": [0, 0]}) == 50
    assert [r.lsn for r in wal.records()] == [50]
    wal.close()


def test_failed_write_leaves_no_partial_record(tmp_path):
    wal = WriteAheadLog(tmp_path)
    _fill(wal, 2)

    def short_then_fail(fd, view):
        os.write(fd, bytes(view[:5]))
        raise OSError("disk full")

    wal._write = short_then_fail
    with pytest.raises(IoError):
        wal.append("CreateVertex", {"v": [0, 2]})
    assert wal.last_lsn == 2
    wal._write = os.write
    assert wal.append("CreateVertex", {"v": [0, 2]}) == 3
    wal.close()
    assert [r.lsn for r in WriteAheadLog(tmp_path).records()] == [1, 2, 3]


def test_unknown_durability_rejected(tmp_path):
    with pytest.raises(ValueError):
        WriteAheadLog(tmp_path, durability="eventually")


def _db_with_people(path, n=5):
    db = Database(path)
    db.define_schema({"vertex_labels": {"person": {"name": "text"}}, "edge_labels": {"knows": {}}})
    vs = [db.create_vertex("person", {"name": f"p{i}"}) for i in range(n)]
    for a, b in zip(vs, vs[1:]):
        db.create_edge(a, "knows", b)
    return db


def test_checkpoint_then_replay_tail(tmp_path):
    db = _db_with_people(tmp_path)
    lsn = db.checkpoint()
    assert ckpt.current_lsn(tmp_path) == lsn
    db.create_vertex("person", {"name": "late"})
    expected = db.state_digest()
    db.crash()
    again = Database(tmp_path)
    assert again.checkpoint_lsn == lsn
    assert again.state_digest() == expected
    again.close()


def test_corrupt_checkpoint_falls_back_to_older(tmp_path):
    db = _db_with_people(tmp_path)
    first = db.checkpoint()
    db.create_vertex("person", {"name": "x"})
    second = db.checkpoint()
    expected = db.state_digest()
    db.close()
    img = tmp_path / "checkpoint" / str(second) / "attribute_image.jsonl"
    img.write_text(img.read_text().replace("p1", "zz"))
    with pytest.raises(CorruptCheckpoint):
        ckpt.verify(img.parent)
    again = Database(tmp_path)
    assert again.checkpoint_lsn == first
    assert again.state_digest() == expected
    again.close()


def test_old_checkpoints_are_removed(tmp_path):
    db = _db_with_people(tmp_path)
    for i in range(4):
        db.create_vertex("person", {"name": f"n{i}"})
        db.checkpoint()
    assert len(ckpt.list_checkpoints(tmp_path)) == ckpt.KEEP
    db.close()


def test_prune_is_bounded_by_checkpoint(tmp_path):
    db = _db_with_people(tmp_path)
    lsn = db.checkpoint()
    with pytest.raises(PruneBeyondCheckpoint):
        db.prune(lsn + 1)
    db.prune(lsn)
    expected = db.state_digest()
    db.close()
    again = Database(tmp_path)
    assert again.state_digest() == expected
    again.close()


def test_missing_prefix_without_checkpoint_is_an_error(tmp_path):
    db = _db_with_people(tmp_path, n=30)
    db.wal.segment_bytes = 100
    for i in range(10):
        db.create_vertex("person", {"name": f"q{i}"})
    db.close()
    first = sorted((tmp_path / "wal").glob("*.log"))[0]
    first.unlink()
    with pytest.raises(CorruptCheckpoint):
        Database(tmp_path)
