"""Scripted external-information feeds (weather, civil protection, utilities).

Feeds are declarative line-oriented scripts replayed on the simulation
clock instead of live services, so every run is reproducible. The control
service applies per-source weights on ingest; scripts carry raw severities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from lampgrid import protocol
from lampgrid.protocol import Envelope, MessageType
from lampgrid.risk import RiskSignal

KNOWN_SOURCES = ("weather", "civil_protection", "public_utility")


class FeedScriptError(ValueError):
    """Script rejected before any emission; message names the line."""


@dataclass(frozen=True)
class FeedEntry:
    t_ms: int
    source: str
    severity: float
    ttl_ms: int
    desc: str = ""

    def as_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "source": self.source,
            "severity": self.severity,
            "ttl_ms": self.ttl_ms,
            "desc": self.desc,
        }


def _parse_entry(doc: dict, lineno: int) -> FeedEntry:
    for key in ("t_ms", "source", "severity", "ttl_ms"):
        if key not in doc:
            raise FeedScriptError(f"missing key '{key}' line {lineno}")
    t_ms = doc["t_ms"]
    if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
        raise FeedScriptError(f"'t_ms' must be a non-negative integer line {lineno}")
    source = doc["source"]
    if source not in KNOWN_SOURCES:
        raise FeedScriptError(f"unknown source {source!r} line {lineno}")
    severity = doc["severity"]
    if (isinstance(severity, bool) or not isinstance(severity, (int, float))
            or not math.isfinite(float(severity))
            or not 0.0 <= float(severity) <= 1.0):
        raise FeedScriptError(f"severity out of range line {lineno}")
    ttl_ms = doc["ttl_ms"]
    if not isinstance(ttl_ms, int) or isinstance(ttl_ms, bool) or ttl_ms <= 0:
        raise FeedScriptError(f"'ttl_ms' must be a positive integer line {lineno}")
    desc = doc.get("desc", "")
    if not isinstance(desc, str):
        raise FeedScriptError(f"'desc' must be a string line {lineno}")
    return FeedEntry(t_ms=t_ms, source=source, severity=float(severity),
                     ttl_ms=ttl_ms, desc=desc)


def parse_feed_script(text: str) -> list[FeedEntry]:
    """Parse one JSON object per line; reject out-of-range or unordered entries."""
    entries: list[FeedEntry] = []
    last_t: Optional[int] = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FeedScriptError(f"malformed JSON line {lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise FeedScriptError(f"entry is not an object line {lineno}")
        entry = _parse_entry(doc, lineno)
        if last_t is not None and entry.t_ms < last_t:
            raise FeedScriptError(f"non-monotone time line {lineno}")
        last_t = entry.t_ms
        entries.append(entry)
    return entries


def parse_feed_entries(docs: Iterable[dict]) -> list[FeedEntry]:
    """Same validation for entries already deserialized (scenario files)."""
    entries: list[FeedEntry] = []
    last_t: Optional[int] = None
    for index, doc in enumerate(docs, start=1):
        if not isinstance(doc, dict):
            raise FeedScriptError(f"entry is not an object line {index}")
        entry = _parse_entry(doc, index)
        if last_t is not None and entry.t_ms < last_t:
            raise FeedScriptError(f"non-monotone time line {index}")
        last_t = entry.t_ms
        entries.append(entry)
    return entries


def entry_to_signal(entry: FeedEntry, weight: float) -> RiskSignal:
    return RiskSignal(
        source_id=entry.source,
        severity=entry.severity,
        weight=weight,
        issued_sim_time_ms=entry.t_ms,
        ttl_ms=entry.ttl_ms,
        description=entry.desc,
    )


def run_feed(script: list[FeedEntry], sink: Callable[[Envelope], None],
             sender: str = "feed") -> int:
    """Emit one FEED_UPDATE per entry, in script order. Returns the count."""
    sequencer = protocol.Sequencer(sender)
    for entry in script:
        envelope = sequencer.next_envelope(
            MessageType.FEED_UPDATE, entry.t_ms,
            protocol.feed_update_payload(
                source=entry.source,
                severity=entry.severity,
                ttl_ms=entry.ttl_ms,
                issued_sim_time_ms=entry.t_ms,
                description=entry.desc,
            ),
        )
        sink(envelope)
    return len(script)
