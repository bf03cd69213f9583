"""Audit journal: dense offsets, append/read round-trip, torn-tail recovery."""

import json

import pytest

from lampgrid.audit import (
    AuditError,
    AuditKind,
    AuditLog,
    AuditRecord,
    file_digest,
    iter_kinds,
    read_audit_log,
)


def fill(log: AuditLog) -> None:
    log.append(AuditKind.DEPLOY, 0, {"event": "run_config", "config": {}})
    log.append(AuditKind.FEED, 500, {"event": "signal_added", "source": "weather"})
    log.append(AuditKind.INGEST, 1000, {"event": "alert_created", "alert_id": "a-1"})
    log.append(AuditKind.ACTION, 2000, {"event": "operator_action", "action": "confirm"})


class TestAppend:
    def test_offsets_dense_from_zero(self):
        with AuditLog() as log:
            fill(log)
            offsets = [record.offset for record in log.records()]
        assert offsets == [0, 1, 2, 3]

    def test_append_returns_record(self):
        with AuditLog() as log:
            record = log.append(AuditKind.ERROR, 10, {"event": "boom"})
        assert record.offset == 0
        assert record.kind is AuditKind.ERROR
        assert record.sim_time_ms == 10

    def test_negative_time_rejected(self):
        with AuditLog() as log:
            with pytest.raises(AuditError, match="sim_time_ms"):
                log.append(AuditKind.INGEST, -1, {})

    def test_one_line_per_record(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        assert len(path.read_bytes().splitlines()) == 4


class TestReadBack:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
            written = log.records()
        read, warnings = read_audit_log(path)
        assert read == written
        assert warnings == []

    def test_torn_final_line_dropped_with_warning(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        data = path.read_bytes()
        path.write_bytes(data[:-20])  # simulate interrupted final write
        records, warnings = read_audit_log(path)
        assert len(records) == 3
        assert len(warnings) == 1
        assert "torn" in warnings[0]

    def test_corrupt_interior_line_is_an_error(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        lines = path.read_bytes().splitlines(keepends=True)
        lines[1] = b'{"offset": 1, "kind": ???\n'
        path.write_bytes(b"".join(lines))
        with pytest.raises(AuditError, match="line 2"):
            read_audit_log(path)

    def test_offset_gap_is_an_error(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        lines = path.read_bytes().splitlines(keepends=True)
        del lines[1]
        path.write_bytes(b"".join(lines))
        with pytest.raises(AuditError, match="offset"):
            read_audit_log(path)

    def test_unknown_kind_is_an_error(self, tmp_path):
        path = tmp_path / "audit.hal"
        doc = {"offset": 0, "kind": "gossip", "sim_time_ms": 0, "data": {}}
        path.write_bytes(json.dumps(doc).encode() + b"\n")
        with pytest.raises(AuditError, match="gossip"):
            read_audit_log(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "audit.hal"
        path.write_bytes(b"")
        records, warnings = read_audit_log(path)
        assert records == []
        assert warnings == []


class TestHelpers:
    def test_iter_kinds_filters(self):
        with AuditLog() as log:
            fill(log)
            feeds = list(iter_kinds(log.records(), AuditKind.FEED))
        assert [record.offset for record in feeds] == [1]

    def test_record_round_trips_as_dict(self):
        record = AuditRecord(7, AuditKind.PROPAGATE, 123, {"alert_id": "a-1"})
        assert AuditRecord.from_dict(record.as_dict()) == record

    def test_file_digest_stable(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        assert file_digest(path) == file_digest(path)
        assert len(file_digest(path)) == 64

    def test_resume_appends_after_existing(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        with AuditLog(path, resume=True) as log:
            record = log.append(AuditKind.ACTION, 3000, {"event": "late"})
        assert record.offset == 4
        records, _ = read_audit_log(path)
        assert [r.offset for r in records] == [0, 1, 2, 3, 4]

    def test_resume_truncates_torn_tail(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        path.write_bytes(path.read_bytes()[:-20])
        with AuditLog(path, resume=True) as log:
            record = log.append(AuditKind.ACTION, 3000, {"event": "late"})
        assert record.offset == 3
        records, warnings = read_audit_log(path)
        assert [r.offset for r in records] == [0, 1, 2, 3]
        assert warnings == []

    def test_fresh_open_replaces_existing(self, tmp_path):
        path = tmp_path / "audit.hal"
        with AuditLog(path) as log:
            fill(log)
        with AuditLog(path) as log:
            log.append(AuditKind.DEPLOY, 0, {"event": "run_config"})
        records, _ = read_audit_log(path)
        assert len(records) == 1
