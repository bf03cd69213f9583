"""Append-only audit journal (.hal, historical audit log).

Every state-changing event at the control service lands here as one JSON
line with a dense offset, so a run can be diffed byte-for-byte against
another run and replayed to reconstruct the exact final state. Records are
never rewritten; a torn final line from an interrupted writer is dropped
with a warning on read, while corruption anywhere else is an error.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Optional, Union


class AuditError(ValueError):
    pass


class AuditKind(str, Enum):
    INGEST = "ingest"
    ACTION = "action"
    PROPAGATE = "propagate"
    WARNING = "warning"
    FEED = "feed"
    DEPLOY = "deploy"
    ERROR = "error"


@dataclass(frozen=True)
class AuditRecord:
    offset: int
    kind: AuditKind
    sim_time_ms: int
    data: dict

    def as_dict(self) -> dict:
        return {
            "offset": self.offset,
            "kind": self.kind.value,
            "sim_time_ms": self.sim_time_ms,
            "data": self.data,
        }

    def encode_line(self) -> bytes:
        line = json.dumps(self.as_dict(), separators=(",", ":"),
                          ensure_ascii=False, allow_nan=False)
        return line.encode("utf-8") + b"\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "AuditRecord":
        for key in ("offset", "kind", "sim_time_ms", "data"):
            if key not in doc:
                raise AuditError(f"audit record missing field '{key}'")
        offset = doc["offset"]
        if not isinstance(offset, int) or isinstance(offset, bool) or offset < 0:
            raise AuditError("'offset' must be a non-negative integer")
        try:
            kind = AuditKind(doc["kind"])
        except ValueError:
            raise AuditError(f"unknown audit kind {doc['kind']!r}") from None
        sim_time = doc["sim_time_ms"]
        if not isinstance(sim_time, int) or isinstance(sim_time, bool) or sim_time < 0:
            raise AuditError("'sim_time_ms' must be a non-negative integer")
        data = doc["data"]
        if not isinstance(data, dict):
            raise AuditError("'data' must be an object")
        return cls(offset=offset, kind=kind, sim_time_ms=sim_time, data=data)


class AuditLog:
    """Writer that assigns dense offsets and keeps an in-memory mirror.

    With a path the journal is also streamed to disk, flushed per record so
    at most the final line can be torn by a crash. With path=None it is
    memory-only, which the tests use.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None,
                 resume: bool = False):
        self.path = Path(path) if path is not None else None
        self._records: list[AuditRecord] = []
        self._sink: Optional[IO[bytes]] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if resume and self.path.exists():
                self._resume_existing()
            self._sink = open(self.path, "ab" if resume else "wb")

    def _resume_existing(self) -> None:
        # Continue a journal left by a previous process. Only the torn tail
        # (if any) is cut off; committed records are never rewritten.
        self._records, _ = read_audit_log(self.path)
        raw = self.path.read_bytes()
        clean = raw.rfind(b"\n") + 1
        if clean != len(raw):
            with open(self.path, "rb+") as sink:
                sink.truncate(clean)

    def append(self, kind: AuditKind, sim_time_ms: int, data: dict) -> AuditRecord:
        if sim_time_ms < 0:
            raise AuditError("'sim_time_ms' must be a non-negative integer")
        record = AuditRecord(
            offset=len(self._records),
            kind=kind,
            sim_time_ms=sim_time_ms,
            data=data,
        )
        self._records.append(record)
        if self._sink is not None:
            self._sink.write(record.encode_line())
            self._sink.flush()
        return record

    @property
    def next_offset(self) -> int:
        return len(self._records)

    def records(self) -> list[AuditRecord]:
        return list(self._records)

    def close(self) -> None:
        if self._sink is not None:
            self._sink.close()
            self._sink = None

    def __enter__(self) -> "AuditLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._records)


def read_audit_log(path: Union[str, Path]) -> tuple[list[AuditRecord], list[str]]:
    """Load a journal, returning (records, warnings).

    A torn final line is truncated away and reported as a warning; any other
    malformed line or a non-dense offset raises AuditError.
    """
    raw = Path(path).read_bytes()
    records: list[AuditRecord] = []
    warnings: list[str] = []
    if not raw:
        return records, warnings

    lines = raw.split(b"\n")
    # split leaves b"" after a clean trailing newline; anything else is a
    # partial record from an interrupted write.
    torn_tail = lines.pop()
    if torn_tail:
        warnings.append(
            f"dropped torn final record ({len(torn_tail)} bytes without newline)"
        )

    for lineno, line in enumerate(lines, start=1):
        if line == b"":
            raise AuditError(f"blank line at line {lineno}")
        try:
            doc = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise AuditError(f"malformed record at line {lineno}: {exc}") from exc
        if not isinstance(doc, dict):
            raise AuditError(f"record at line {lineno} is not an object")
        record = AuditRecord.from_dict(doc)
        if record.offset != len(records):
            raise AuditError(
                f"offset {record.offset} at line {lineno}, expected {len(records)}"
            )
        records.append(record)
    return records, warnings


def iter_kinds(records: Iterable[AuditRecord], *kinds: AuditKind):
    wanted = set(kinds)
    for record in records:
        if record.kind in wanted:
            yield record


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
