"""Scenario-driven discrete-event simulation of a full deployment.

One seeded run wires a control unit, a fleet of lamppost units, and the
scripted feeds together in-process and replays the merged timeline on the
logical millisecond clock. Wall-clock time never enters state or logs, so
a (scenario, seed) pair always produces byte-identical audit journals.

Ordering at equal timestamps: signal expiries fire first (inside the
control unit's clock advance), then feed updates, then scene events.
"""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from lampgrid import audit as audit_mod
from lampgrid import geo
from lampgrid.audit import read_audit_log
from lampgrid.config import weight_for
from lampgrid.feeds import entry_to_signal
from lampgrid.llu import LamppostUnit
from lampgrid.model import AlertState
from lampgrid.protocol import MessageType
from lampgrid.scenario import Scenario
from lampgrid.tcu import ControlUnit

AUDIT_FILENAME = "audit.hal"
SUMMARY_FILENAME = "summary.json"
METRICS_FILENAME = "metrics.csv"

_FEED_TIER = 1
_SCENE_TIER = 2


@dataclass
class RunSummary:
    scenario_name: str
    seed: int
    duration_ms: int
    kernel_backend: str
    counters: dict
    final_state: dict
    audit_sha256: Optional[str] = None

    def as_dict(self) -> dict:
        doc = {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "kernel_backend": self.kernel_backend,
            "counters": self.counters,
            "final_state": self.final_state,
        }
        if self.audit_sha256 is not None:
            doc["audit_sha256"] = self.audit_sha256
        return doc


def run_scenario(scenario: Scenario,
                 out_dir: Optional[Union[str, Path]] = None) -> RunSummary:
    """Execute one scenario; write audit.hal, summary.json, metrics.csv.

    With out_dir=None everything stays in memory (no files), which the
    tests use for speed.
    """
    out_path = Path(out_dir) if out_dir is not None else None
    audit_path = out_path / AUDIT_FILENAME if out_path is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    config = scenario.to_config()
    tcu = ControlUnit(config, audit_path=audit_path)
    llus = {
        lamppost_id: LamppostUnit(
            lamppost_id, position, scenario.profile, scenario.bounds,
            seed=scenario.seed,
        )
        for lamppost_id, position in scenario.fleet
    }
    counters = {"reports_emitted": 0, "commands_delivered": 0}

    def deliver_outbound() -> None:
        for envelope in tcu.pop_outbound():
            if envelope.type is not MessageType.COMMAND:
                continue
            target = envelope.payload["target"]
            unit = llus.get(target)
            if unit is not None:
                unit.handle_envelope(envelope)
                counters["commands_delivered"] += 1

    timeline: list = []
    serial = 0
    for entry in scenario.feeds:
        timeline.append((entry.t_ms, _FEED_TIER, serial, entry))
        serial += 1
    for lamppost_id, events in scenario.scene_events.items():
        for event in events:
            timeline.append((event.sim_time_ms, _SCENE_TIER, serial,
                             (lamppost_id, event)))
            serial += 1
    heapq.heapify(timeline)

    while timeline:
        t_ms, tier, _, item = heapq.heappop(timeline)
        tcu.advance_to(t_ms)
        if tier == _FEED_TIER:
            tcu.add_signal(entry_to_signal(
                item, weight_for(item.source, config.feed_weights)
            ))
        else:
            lamppost_id, event = item
            envelope = llus[lamppost_id].handle_scene_event(event)
            if envelope is not None:
                counters["reports_emitted"] += 1
                tcu.dispatch_envelope(envelope)
        deliver_outbound()

    tcu.advance_to(scenario.duration_ms)
    deliver_outbound()

    summary = RunSummary(
        scenario_name=scenario.name,
        seed=scenario.seed,
        duration_ms=scenario.duration_ms,
        kernel_backend=geo.kernel_backend(),
        counters={**counters, **tcu.counters},
        final_state=tcu.state_snapshot(),
    )
    metrics = build_metrics(summary, tcu)
    tcu.close()

    if out_path is not None:
        summary.audit_sha256 = audit_mod.file_digest(out_path / AUDIT_FILENAME)
        write_summary(summary, out_path / SUMMARY_FILENAME)
        write_metrics(metrics, out_path / METRICS_FILENAME)
    return summary


def build_metrics(summary: RunSummary, tcu: ControlUnit) -> list[tuple[str, object]]:
    alerts = list(tcu.alerts.values())
    by_state = {state: 0 for state in AlertState}
    fanouts: dict[int, int] = {}
    for alert in alerts:
        by_state[alert.state] += 1
        fanout = len(alert.propagated_to)
        fanouts[fanout] = fanouts.get(fanout, 0) + 1

    rows: list[tuple[str, object]] = [
        ("reports_emitted", summary.counters["reports_emitted"]),
        ("reports_ingested", summary.counters["reports_ingested"]),
        ("reports_duplicate", summary.counters["reports_duplicate"]),
        ("reports_rejected", summary.counters["reports_rejected"]),
        ("alerts_total", len(alerts)),
    ]
    for state in AlertState:
        rows.append((f"alerts_{state.value}", by_state[state]))
    rows.extend([
        ("warnings_issued", summary.counters["warnings_issued"]),
        ("warnings_cleared", summary.counters["warnings_cleared"]),
        ("commands_sent", summary.counters["commands_sent"]),
        ("lambda_final", summary.final_state["risk"]["lambda"]),
        ("queue_length_final", len(summary.final_state["queue"])),
    ])
    if fanouts:
        for fanout in range(max(fanouts) + 1):
            rows.append((f"propagation_fanout_{fanout}", fanouts.get(fanout, 0)))
    return rows


def write_summary(summary: RunSummary, path: Path) -> None:
    text = json.dumps(summary.as_dict(), indent=2, sort_keys=True,
                      ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_metrics(rows: list[tuple[str, object]], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as sink:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["metric", "value"])
        writer.writerows(rows)


def replay_run(audit_path: Union[str, Path]) -> tuple[ControlUnit, list[str]]:
    """Rebuild the final control-unit state from a run's journal."""
    records, warnings = read_audit_log(audit_path)
    unit = ControlUnit.replay(records)
    return unit, warnings
