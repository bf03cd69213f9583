"""Territorial control service.

Ingests lamppost reports, reassesses their criticality against the live
global risk index, manages alert lifecycle and the operator triage queue,
propagates signalling to proximal units, raises preventive warnings, and
journals every state change to the audit log.

State model: the audit log is the source of truth; everything in memory is
a projection of it, and ``ControlUnit.replay`` rebuilds the projection from
a log alone. Per-lamppost signalling modes are a derived view (max severity
over active alerts and warnings), so commands are pure diffs and dismissing
one alert never turns off a mode another alert still justifies.

Concurrency: all mutations go through one lock, giving the single total
event order the audit log records. Reads take the same lock briefly and
return plain dict snapshots.
"""

from __future__ import annotations

import threading
from array import array
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

from lampgrid import geo, protocol
from lampgrid.audit import AuditKind, AuditLog, AuditRecord
from lampgrid.config import TcuConfig, weight_for
from lampgrid.model import (
    Alert,
    AlertState,
    AnomalyClass,
    AnomalyReport,
    GeoPoint,
    IllegalTransition,
    ModelError,
    SignallingMode,
    mode_for_criticality,
    reassess_criticality,
)
from lampgrid.profiles import DetectorProfile
from lampgrid.protocol import Envelope, MessageType
from lampgrid.registry import DeploymentReport, ProfileRegistry
from lampgrid.risk import GlobalRiskContext, RiskSignal, SignalStore


class TcuError(Exception):
    pass


class UnknownLamppost(TcuError):
    def __init__(self, lamppost_id: str):
        super().__init__(f"unknown lamppost {lamppost_id!r}")
        self.lamppost_id = lamppost_id


class UnknownAlert(TcuError):
    def __init__(self, alert_id: str):
        super().__init__(f"unknown alert {alert_id!r}")
        self.alert_id = alert_id


class TargetUnreachable(TcuError):
    """Deploy channel exists but has no live link to the target right now."""

    def __init__(self, target: str):
        super().__init__(f"no live connection to {target!r}")
        self.target = target


class IllegalAction(TcuError):
    """Action not legal for the alert's current state (conflict)."""

    def __init__(self, alert_id: str, action: str, current_state: AlertState):
        super().__init__(
            f"action {action!r} not allowed on {alert_id!r} "
            f"in state {current_state.value}"
        )
        self.alert_id = alert_id
        self.action = action
        self.current_state = current_state


class BadAction(TcuError):
    """Malformed operator request (unknown action name, bad radius)."""


OPERATOR_ACTIONS = (
    "confirm",
    "dismiss_false_positive",
    "propagate_further",
    "deactivate",
)

_ACTION_TARGET_STATE = {
    "confirm": AlertState.CONFIRMED,
    "dismiss_false_positive": AlertState.DISMISSED_FALSE_POSITIVE,
    "deactivate": AlertState.DEACTIVATED,
}

QUEUE_STATES = (AlertState.ACTIVE, AlertState.CONFIRMED)


@dataclass(frozen=True)
class Notification:
    """One triage-queue row for an active or confirmed alert."""

    alert_id: str
    varphi: int
    created_sim_time_ms: int
    anomaly: AnomalyClass
    lamppost_id: str

    def sort_key(self) -> tuple:
        return (-self.varphi, self.created_sim_time_ms, self.alert_id)

    def as_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "varphi": self.varphi,
            "created_sim_time_ms": self.created_sim_time_ms,
            "anomaly": self.anomaly.value,
            "lamppost_id": self.lamppost_id,
        }


def priority_compare(a: Notification, b: Notification) -> int:
    """Strict total order: criticality desc, age asc, id asc. -1/0/+1."""
    ka, kb = a.sort_key(), b.sort_key()
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def notification_for(alert: Alert) -> Notification:
    return Notification(
        alert_id=alert.alert_id,
        varphi=alert.varphi,
        created_sim_time_ms=alert.created_sim_time_ms,
        anomaly=alert.source_report.anomaly,
        lamppost_id=alert.source_report.lamppost_id,
    )


@dataclass(frozen=True)
class PreventiveWarning:
    warning_id: str
    trigger_source_id: str
    lambda_at_issue: int
    affected_lampposts: tuple
    issued_sim_time_ms: int
    active: bool = True

    def as_dict(self) -> dict:
        return {
            "warning_id": self.warning_id,
            "trigger_source_id": self.trigger_source_id,
            "lambda_at_issue": self.lambda_at_issue,
            "affected_lampposts": list(self.affected_lampposts),
            "issued_sim_time_ms": self.issued_sim_time_ms,
            "active": self.active,
        }


class FleetIndex:
    """Immutable id/position index with columnar coordinates.

    Coordinates live in flat double arrays so the radius kernel scans them
    without per-object overhead; the compiled and pure kernels accept the
    same buffers.
    """

    def __init__(self, entries: Iterable[tuple[str, GeoPoint]]):
        self._ids: list[str] = []
        self._positions: dict[str, GeoPoint] = {}
        lats, lons = [], []
        for lamppost_id, position in entries:
            if lamppost_id in self._positions:
                raise ModelError(f"duplicate lamppost id {lamppost_id!r}")
            self._ids.append(lamppost_id)
            self._positions[lamppost_id] = position
            lats.append(position.lat)
            lons.append(position.lon)
        self._lats = array("d", lats)
        self._lons = array("d", lons)

    def __contains__(self, lamppost_id: str) -> bool:
        return lamppost_id in self._positions

    def __len__(self) -> int:
        return len(self._ids)

    def ids(self) -> list[str]:
        return list(self._ids)

    def position(self, lamppost_id: str) -> GeoPoint:
        return self._positions[lamppost_id]

    def neighbors_within(self, origin: GeoPoint, radius_m: float,
                         exclude: Optional[str] = None) -> list[tuple[str, float]]:
        """(id, distance_m) for every lamppost within radius_m of origin,
        boundary inclusive, sorted by distance then id, exclude omitted."""
        if not radius_m > 0:
            raise ModelError("radius_m must be > 0")
        hits = geo.radius_query(origin.lat, origin.lon,
                                self._lats, self._lons, radius_m)
        named = [
            (self._ids[index], distance)
            for index, distance in hits
            if self._ids[index] != exclude
        ]
        named.sort(key=lambda pair: (pair[1], pair[0]))
        return named


def neighbors_within(origin: GeoPoint, fleet: FleetIndex, radius_m: float,
                     exclude: Optional[str] = None) -> list[str]:
    """Id-only convenience over FleetIndex.neighbors_within."""
    return [lamppost_id for lamppost_id, _ in
            fleet.neighbors_within(origin, radius_m, exclude)]


EventCallback = Callable[[str, dict], None]


class ControlUnit:
    """The territorial service: one lock, one audit log, derived views."""

    def __init__(self, config: TcuConfig,
                 audit_path=None, record_config: bool = True):
        self.config = config
        self.bounds = config.bounds
        self.fleet = FleetIndex(config.fleet)
        self.audit = AuditLog(audit_path)
        self.registry = ProfileRegistry()
        self.signals = SignalStore()
        self.alerts: dict[str, Alert] = {}
        self.warnings: dict[str, PreventiveWarning] = {}
        self.now_ms = 0
        self._lock = threading.RLock()
        self._report_to_alert: dict[str, str] = {}
        self._active_warning_by_source: dict[str, str] = {}
        self._warning_serial = 0
        self._risk = GlobalRiskContext(lambda_=0, contributing=(),
                                       computed_sim_time_ms=0)
        self._modes: dict[str, SignallingMode] = {
            lamppost_id: SignallingMode.OFF for lamppost_id in self.fleet.ids()
        }
        # Per-lamppost contribution counts by mode rank, so signalling
        # recomputes stay fleet-bounded instead of scanning every alert.
        self._mode_votes: dict[str, list[int]] = {
            lamppost_id: [0] * len(SignallingMode)
            for lamppost_id in self.fleet.ids()
        }
        self._profile_versions: dict[str, int] = {
            lamppost_id: 1 for lamppost_id in self.fleet.ids()
        }
        self._outbox: list[Envelope] = []
        self._sequencer = protocol.Sequencer("tcu")
        self._seq_tracker = protocol.SequenceTracker()
        self._subscribers: list[EventCallback] = []
        self._deploy_channel: Optional[
            Callable[[str, Envelope], Optional[Envelope]]] = None
        self.counters: dict[str, int] = {
            "reports_ingested": 0,
            "reports_duplicate": 0,
            "reports_rejected": 0,
            "commands_sent": 0,
            "warnings_issued": 0,
            "warnings_cleared": 0,
        }
        if record_config:
            self.audit.append(AuditKind.DEPLOY, 0, {
                "event": "run_config",
                "config": config.as_dict(),
            })

    # -- pub/sub ---------------------------------------------------------

    def subscribe(self, callback: EventCallback) -> Callable[[], None]:
        with self._lock:
            self._subscribers.append(callback)

        def unsubscribe():
            with self._lock:
                if callback in self._subscribers:
                    self._subscribers.remove(callback)

        return unsubscribe

    def _publish(self, event_type: str, data: dict) -> None:
        for callback in list(self._subscribers):
            callback(event_type, data)

    def set_deploy_channel(
            self, channel: Callable[[str, Envelope], Optional[Envelope]]) -> None:
        self._deploy_channel = channel

    # -- clock and risk ----------------------------------------------------

    def advance_to(self, now_ms: int) -> None:
        """Move the logical clock forward, firing due expiry checkpoints.

        Checkpoints are processed in time order before the clock lands on
        now_ms, so expiries always take effect ahead of any event carrying
        the same timestamp.
        """
        with self._lock:
            if now_ms <= self.now_ms:
                return
            for t in self.signals.due_checkpoints(now_ms):
                if t > self.now_ms:
                    self.now_ms = t
                self._recompute_risk(max(t, self.now_ms), cause="expiry")
            self.now_ms = now_ms

    def _recompute_risk(self, t_ms: int, cause: str) -> None:
        ctx = self.signals.context(t_ms, self.bounds)
        unchanged = (
            ctx.lambda_ == self._risk.lambda_
            and ctx.contributing == self._risk.contributing
        )
        if unchanged:
            return
        self._risk = ctx
        self.audit.append(AuditKind.FEED, t_ms, {
            "event": "risk_recomputed",
            "cause": cause,
            "lambda": ctx.lambda_,
            "contributing": [s.as_dict() for s in ctx.contributing],
        })
        self._publish("risk_changed", {"risk": ctx.as_dict()})
        self._evaluate_preventive(t_ms)

    def add_signal(self, signal: RiskSignal) -> None:
        """Admit one external risk signal and fold it into the live index."""
        with self._lock:
            if signal.issued_sim_time_ms > self.now_ms:
                self.now_ms = signal.issued_sim_time_ms
            self.signals.add(signal)
            self.audit.append(AuditKind.FEED, self.now_ms, {
                "event": "signal_added",
                "signal": signal.as_dict(),
            })
            self._recompute_risk(self.now_ms, cause="signal_added")

    def handle_feed_update(self, envelope: Envelope) -> None:
        payload = envelope.payload
        weight = weight_for(payload["source"], self.config.feed_weights)
        self.advance_to(envelope.sent_sim_time_ms)
        self.add_signal(RiskSignal(
            source_id=payload["source"],
            severity=payload["severity"],
            weight=weight,
            issued_sim_time_ms=payload["issued_sim_time_ms"],
            ttl_ms=payload["ttl_ms"],
            description=payload.get("description", ""),
        ))

    def risk_context(self) -> GlobalRiskContext:
        with self._lock:
            return self._risk

    # -- preventive warnings -----------------------------------------------

    def _evaluate_preventive(self, t_ms: int) -> None:
        lam = self._risk.lambda_
        threshold = self.config.preventive_threshold
        if lam >= threshold:
            dominant = self.signals.dominant(t_ms)
            if dominant is not None and (
                    dominant.source_id not in self._active_warning_by_source):
                self._issue_warning(dominant, lam, t_ms)
            return
        # Below threshold: retire warnings whose trigger has gone quiet.
        live_sources = {s.source_id for s in self.signals.live(t_ms)}
        for source, warning_id in list(self._active_warning_by_source.items()):
            if source in live_sources:
                continue
            before = self._warning_votes(self.warnings[warning_id])
            warning = replace(self.warnings[warning_id], active=False)
            self.warnings[warning_id] = warning
            del self._active_warning_by_source[source]
            self.counters["warnings_cleared"] += 1
            self.audit.append(AuditKind.WARNING, t_ms, {
                "event": "cleared",
                "warning_id": warning_id,
                "trigger_source_id": source,
                "lambda": lam,
            })
            self._publish("warning_cleared", {"warning": warning.as_dict()})
            touched = self._swap_votes(before, [])
            self._recompute_signalling(t_ms, touched)

    def _issue_warning(self, trigger: RiskSignal, lam: int, t_ms: int) -> None:
        self._warning_serial += 1
        warning = PreventiveWarning(
            warning_id=f"w-{self._warning_serial:04d}-{trigger.source_id}",
            trigger_source_id=trigger.source_id,
            lambda_at_issue=lam,
            affected_lampposts=tuple(sorted(self.fleet.ids())),
            issued_sim_time_ms=t_ms,
            active=True,
        )
        self.warnings[warning.warning_id] = warning
        self._active_warning_by_source[trigger.source_id] = warning.warning_id
        self.counters["warnings_issued"] += 1
        self.audit.append(AuditKind.WARNING, t_ms, {
            "event": "issued",
            "warning": warning.as_dict(),
            "threshold": self.config.preventive_threshold,
        })
        self._publish("warning_issued", {"warning": warning.as_dict()})
        touched = self._swap_votes([], self._warning_votes(warning))
        self._recompute_signalling(t_ms, touched)

    def active_warnings(self) -> list[PreventiveWarning]:
        with self._lock:
            return [w for w in self.warnings.values() if w.active]

    # -- report ingestion ----------------------------------------------------

    def ingest_report(self, report: AnomalyReport) -> Alert:
        """Create (or idempotently return) the alert for one report."""
        with self._lock:
            self.advance_to(report.sim_time_ms)
            if report.lamppost_id not in self.fleet:
                self.counters["reports_rejected"] += 1
                self.audit.append(AuditKind.ERROR, report.sim_time_ms, {
                    "event": "report_rejected",
                    "reason": "unknown_lamppost",
                    "report": report.as_dict(),
                })
                raise UnknownLamppost(report.lamppost_id)
            existing = self._report_to_alert.get(report.report_id)
            if existing is not None:
                self.counters["reports_duplicate"] += 1
                return self.alerts[existing]

            lam = self.signals.context(report.sim_time_ms, self.bounds).lambda_
            varphi = reassess_criticality(
                report.phi, self.config.alpha, lam, self.bounds
            )
            alert = Alert(
                alert_id=f"a-{report.report_id}",
                source_report=report,
                varphi=varphi,
                lambda_at_ingest=lam,
                state=AlertState.ACTIVE,
                propagated_to=[],
                created_sim_time_ms=report.sim_time_ms,
            )
            self.alerts[alert.alert_id] = alert
            self._report_to_alert[report.report_id] = alert.alert_id
            self.counters["reports_ingested"] += 1
            self.audit.append(AuditKind.INGEST, report.sim_time_ms, {
                "event": "alert_created",
                "alert": alert.as_dict(),
            })
            self._publish("alert_created", {"alert": alert.as_dict()})
            self._publish("queue_changed", {})
            if varphi >= 1:
                self._propagate(alert, self.config.propagation_radius_m,
                                report.sim_time_ms)
            touched = self._swap_votes([], self._alert_votes(alert))
            self._recompute_signalling(self.now_ms, touched)
            return alert

    def handle_report_envelope(self, envelope: Envelope) -> Envelope:
        """Full wire-side path: dedup by (sender, seq), ingest, ACK."""
        with self._lock:
            self.advance_to(envelope.sent_sim_time_ms)
            freshness = self._seq_tracker.observe(envelope)
            if freshness == "duplicate":
                return self._ack(envelope, "ok", "duplicate delivery")
            if freshness == "gap":
                self.audit.append(AuditKind.ERROR, self.now_ms, {
                    "event": "sequence_gap",
                    "sender": envelope.sender,
                    "seq": envelope.seq,
                })
            try:
                report = protocol.report_from_payload(envelope.payload)
            except ModelError as exc:
                return self._ack(envelope, "error", str(exc))
            try:
                self.ingest_report(report)
            except UnknownLamppost as exc:
                return self._ack(envelope, "rejected", str(exc))
            return self._ack(envelope, "ok")

    def _ack(self, envelope: Envelope, status: str, detail: str = "") -> Envelope:
        return self._sequencer.next_envelope(
            MessageType.ACK, self.now_ms,
            protocol.ack_payload(envelope.type, envelope.seq, status, detail),
        )

    def dispatch_envelope(self, envelope: Envelope) -> Optional[Envelope]:
        """Route one inbound envelope; returns the ACK owed, if any."""
        if envelope.type is MessageType.REPORT:
            return self.handle_report_envelope(envelope)
        if envelope.type is MessageType.ACK:
            return None
        with self._lock:
            self.advance_to(envelope.sent_sim_time_ms)
            freshness = self._seq_tracker.observe(envelope)
            if freshness == "duplicate":
                return self._ack(envelope, "ok", "duplicate delivery")
            if freshness == "gap":
                self.audit.append(AuditKind.ERROR, self.now_ms, {
                    "event": "sequence_gap",
                    "sender": envelope.sender,
                    "seq": envelope.seq,
                })
            if envelope.type is MessageType.FEED_UPDATE:
                self.handle_feed_update(envelope)
                return self._ack(envelope, "ok")
            if envelope.type is MessageType.HEARTBEAT:
                return self._ack(envelope, "ok")
            return self._ack(envelope, "rejected",
                             f"unexpected inbound {envelope.type.value}")

    # -- propagation and signalling -------------------------------------------

    def _propagate(self, alert: Alert, radius_m: float, t_ms: int) -> list[str]:
        neighbors = self.fleet.neighbors_within(
            alert.source_report.position, radius_m,
            exclude=alert.source_report.lamppost_id,
        )
        known = set(alert.propagated_to)
        new_targets = [lamppost_id for lamppost_id, _ in neighbors
                       if lamppost_id not in known]
        if not new_targets:
            return []
        alert.propagated_to.extend(new_targets)
        mode = mode_for_criticality(alert.varphi, self.bounds)
        self.audit.append(AuditKind.PROPAGATE, t_ms, {
            "event": "propagated",
            "alert_id": alert.alert_id,
            "radius_m": radius_m,
            "mode": mode.value,
            "targets": new_targets,
        })
        self._publish("alert_updated", {"alert": alert.as_dict()})
        return new_targets

    def propagate_alert(self, alert: Alert, radius_m: float) -> list[Envelope]:
        """Propagate one alert now and return the commands it produced."""
        with self._lock:
            if alert.state not in QUEUE_STATES or alert.varphi < 1:
                return []
            before = self._alert_votes(alert)
            self._propagate(alert, radius_m, self.now_ms)
            touched = self._swap_votes(before, self._alert_votes(alert))
            return self._recompute_signalling(self.now_ms, touched)

    def _desired_modes(self) -> dict[str, SignallingMode]:
        """Reference projection: desired modes recomputed from first principles.

        The live path keeps the equivalent answer in ``_mode_votes``; this
        full scan backs replay rebuilds and equivalence checks.
        """
        desired = {lamppost_id: SignallingMode.OFF
                   for lamppost_id in self.fleet.ids()}

        def raise_to(lamppost_id: str, mode: SignallingMode) -> None:
            if lamppost_id in desired and mode.rank > desired[lamppost_id].rank:
                desired[lamppost_id] = mode

        for warning in self.warnings.values():
            if not warning.active:
                continue
            for lamppost_id in warning.affected_lampposts:
                raise_to(lamppost_id, SignallingMode.MODERATE_SPEED)
        for alert in self.alerts.values():
            for lamppost_id, mode in self._alert_votes(alert):
                raise_to(lamppost_id, mode)
        return desired

    def _alert_votes(self, alert: Alert) -> list[tuple[str, SignallingMode]]:
        if alert.state not in QUEUE_STATES or alert.varphi < 1:
            return []
        mode = mode_for_criticality(alert.varphi, self.bounds)
        return [(lamppost_id, mode) for lamppost_id in
                (alert.source_report.lamppost_id, *alert.propagated_to)]

    def _warning_votes(
            self, warning: PreventiveWarning
    ) -> list[tuple[str, SignallingMode]]:
        if not warning.active:
            return []
        return [(lamppost_id, SignallingMode.MODERATE_SPEED)
                for lamppost_id in warning.affected_lampposts]

    def _swap_votes(self, before, after) -> set[str]:
        """Retract one contributor's old votes, count its new ones."""
        for lamppost_id, mode in before:
            if lamppost_id in self._mode_votes:
                self._mode_votes[lamppost_id][mode.rank] -= 1
        for lamppost_id, mode in after:
            if lamppost_id in self._mode_votes:
                self._mode_votes[lamppost_id][mode.rank] += 1
        return {lamppost_id for lamppost_id, _ in before + after}

    def _rebuild_mode_votes(self) -> None:
        for votes in self._mode_votes.values():
            votes[:] = [0] * len(votes)
        for alert in self.alerts.values():
            self._swap_votes([], self._alert_votes(alert))
        for warning in self.warnings.values():
            self._swap_votes([], self._warning_votes(warning))

    def _recompute_signalling(self, t_ms: int,
                              touched: Optional[set] = None) -> list[Envelope]:
        """Diff desired modes against last commanded; emit only changes.

        Only ``touched`` lampposts can have changed, so the scan (in stable
        fleet order) is restricted to them; None means the whole fleet.
        """
        by_rank = sorted(SignallingMode, key=lambda m: m.rank)
        commands = []
        for lamppost_id in self.fleet.ids():
            if touched is not None and lamppost_id not in touched:
                continue
            votes = self._mode_votes[lamppost_id]
            mode = next((by_rank[rank] for rank in range(len(votes) - 1, 0, -1)
                         if votes[rank]), SignallingMode.OFF)
            if mode is self._modes[lamppost_id]:
                continue
            self._modes[lamppost_id] = mode
            commands.append(self._sequencer.next_envelope(
                MessageType.COMMAND, t_ms,
                protocol.command_payload(
                    target=lamppost_id, mode=mode, override=False,
                    reason="signalling_update",
                ),
            ))
        self.counters["commands_sent"] += len(commands)
        self._outbox.extend(commands)
        return commands

    def pop_outbound(self) -> list[Envelope]:
        with self._lock:
            out, self._outbox = self._outbox, []
            return out

    def signalling_mode(self, lamppost_id: str) -> SignallingMode:
        with self._lock:
            return self._modes[lamppost_id]

    # -- operator actions -------------------------------------------------------

    def operator_action(self, alert_id: str, action: str, operator: str,
                        radius_m: Optional[float] = None) -> Alert:
        """Apply one operator decision; audited with the operator's name."""
        if action not in OPERATOR_ACTIONS:
            raise BadAction(f"unknown action {action!r}")
        with self._lock:
            alert = self.alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(alert_id)
            before = self._alert_votes(alert)
            if action == "propagate_further":
                if radius_m is None or not radius_m > 0:
                    raise BadAction("propagate_further requires radius_m > 0")
                if alert.state not in QUEUE_STATES:
                    raise IllegalAction(alert_id, action, alert.state)
                self._propagate(alert, radius_m, self.now_ms)
            else:
                target_state = _ACTION_TARGET_STATE[action]
                try:
                    alert.transition(target_state)
                except IllegalTransition:
                    raise IllegalAction(alert_id, action, alert.state) from None
            touched = self._swap_votes(before, self._alert_votes(alert))
            record = {
                "event": "operator_action",
                "alert_id": alert_id,
                "action": action,
                "operator": operator,
                "resulting_state": alert.state.value,
            }
            if radius_m is not None:
                record["radius_m"] = radius_m
            self.audit.append(AuditKind.ACTION, self.now_ms, record)
            self._publish("alert_updated", {"alert": alert.as_dict()})
            self._publish("queue_changed", {})
            self._recompute_signalling(self.now_ms, touched)
            return alert

    # -- queue and snapshots -----------------------------------------------------

    def snapshot_queue(self) -> list[Notification]:
        with self._lock:
            notifications = [
                notification_for(alert)
                for alert in self.alerts.values()
                if alert.state in QUEUE_STATES
            ]
            notifications.sort(key=Notification.sort_key)
            return notifications

    def list_alerts(self, state: Optional[AlertState] = None) -> list[Alert]:
        with self._lock:
            alerts = sorted(self.alerts.values(), key=lambda a: a.alert_id)
            if state is None:
                return alerts
            return [a for a in alerts if a.state is state]

    def lamppost_view(self) -> list[dict]:
        """Fleet descriptors as the service believes them to be."""
        with self._lock:
            return [
                {
                    "lamppost_id": lamppost_id,
                    "position": self.fleet.position(lamppost_id).as_dict(),
                    "signalling_mode": self._modes[lamppost_id].value,
                    "active_profile_version": self._profile_versions[lamppost_id],
                }
                for lamppost_id in self.fleet.ids()
            ]

    def state_snapshot(self) -> dict:
        """Clock-independent projection of all durable state."""
        with self._lock:
            return {
                "alerts": {
                    alert_id: self.alerts[alert_id].as_dict()
                    for alert_id in sorted(self.alerts)
                },
                "queue": [n.as_dict() for n in self.snapshot_queue()],
                "risk": self._risk.as_dict(),
                "warnings": {
                    warning_id: self.warnings[warning_id].as_dict()
                    for warning_id in sorted(self.warnings)
                },
                "signalling": {
                    lamppost_id: self._modes[lamppost_id].value
                    for lamppost_id in sorted(self._modes)
                },
                "profile_versions": dict(sorted(self._profile_versions.items())),
            }

    # -- profile registry and deployment -------------------------------------------

    def register_profile(self, profile_doc: dict) -> int:
        with self._lock:
            version = self.registry.register(profile_doc)
            self.audit.append(AuditKind.DEPLOY, self.now_ms, {
                "event": "profile_registered",
                "version": version,
                "profile": self.registry.get(version).as_dict(),
            })
            return version

    def deploy_profile(self, version: int, targets: list[str]) -> DeploymentReport:
        """Push a registered profile to targets over the deploy channel."""
        with self._lock:
            profile = self.registry.get(version)

            def send(target: str, prof: DetectorProfile) -> str:
                if target not in self.fleet:
                    return "unknown_target"
                if self._deploy_channel is None:
                    return "no_channel"
                envelope = self._sequencer.next_envelope(
                    MessageType.PROFILE_DEPLOY, self.now_ms,
                    protocol.profile_deploy_payload(version, prof.as_dict()),
                )
                try:
                    ack = self._deploy_channel(target, envelope)
                except TargetUnreachable:
                    return "unreachable"
                if ack is None:
                    return "timeout"
                status = ack.payload["status"]
                detail = ack.payload.get("detail", "")
                return status if not detail else f"{status}: {detail}"

            report = self.registry.deploy(version, targets, send)
            for target in report.ok_targets:
                self._profile_versions[target] = version
            self.audit.append(AuditKind.DEPLOY, self.now_ms, {
                "event": "deployed",
                "version": version,
                "results": dict(report.results),
            })
            return report

    # -- replay --------------------------------------------------------------------

    @classmethod
    def replay(cls, records: list[AuditRecord],
               config: Optional[TcuConfig] = None) -> "ControlUnit":
        """Rebuild a service's final state from its journal alone.

        Recorded values are applied, not recomputed, so the projection is
        exact even if defaults change between versions. The first record of
        a run carries the config; an explicit config overrides it.
        """
        if config is None:
            header = next(
                (r for r in records
                 if r.kind is AuditKind.DEPLOY
                 and r.data.get("event") == "run_config"),
                None,
            )
            if header is None:
                raise TcuError("log has no run_config record; pass a config")
            config = TcuConfig.from_dict(header.data["config"])
        unit = cls(config, audit_path=None, record_config=False)
        for record in records:
            unit._apply_record(record)
            if record.sim_time_ms > unit.now_ms:
                unit.now_ms = record.sim_time_ms
        unit._rebuild_mode_votes()
        unit._modes = unit._desired_modes()
        return unit

    def _apply_record(self, record: AuditRecord) -> None:
        data = record.data
        event = data.get("event")
        if record.kind is AuditKind.DEPLOY:
            if event == "profile_registered":
                self.registry.register(data["profile"])
            elif event == "deployed":
                for target, status in data["results"].items():
                    if status == "ok":
                        self._profile_versions[target] = data["version"]
        elif record.kind is AuditKind.FEED:
            if event == "signal_added":
                self.signals.add(RiskSignal.from_dict(data["signal"]))
            elif event == "risk_recomputed":
                self._risk = GlobalRiskContext(
                    lambda_=data["lambda"],
                    contributing=tuple(
                        RiskSignal.from_dict(s) for s in data["contributing"]
                    ),
                    computed_sim_time_ms=record.sim_time_ms,
                )
        elif record.kind is AuditKind.INGEST:
            alert = Alert.from_dict(data["alert"])
            self.alerts[alert.alert_id] = alert
            self._report_to_alert[alert.source_report.report_id] = alert.alert_id
            self.counters["reports_ingested"] += 1
        elif record.kind is AuditKind.PROPAGATE:
            alert = self.alerts[data["alert_id"]]
            known = set(alert.propagated_to)
            alert.propagated_to.extend(
                t for t in data["targets"] if t not in known
            )
        elif record.kind is AuditKind.ACTION:
            alert = self.alerts[data["alert_id"]]
            target_state = AlertState(data["resulting_state"])
            if alert.state is not target_state:
                alert.transition(target_state)
        elif record.kind is AuditKind.WARNING:
            if event == "issued":
                warning_doc = data["warning"]
                warning = PreventiveWarning(
                    warning_id=warning_doc["warning_id"],
                    trigger_source_id=warning_doc["trigger_source_id"],
                    lambda_at_issue=warning_doc["lambda_at_issue"],
                    affected_lampposts=tuple(warning_doc["affected_lampposts"]),
                    issued_sim_time_ms=warning_doc["issued_sim_time_ms"],
                    active=True,
                )
                self.warnings[warning.warning_id] = warning
                self._active_warning_by_source[warning.trigger_source_id] = (
                    warning.warning_id
                )
                self._warning_serial += 1
                self.counters["warnings_issued"] += 1
            elif event == "cleared":
                warning_id = data["warning_id"]
                self.warnings[warning_id] = replace(
                    self.warnings[warning_id], active=False
                )
                self._active_warning_by_source.pop(
                    data["trigger_source_id"], None
                )
                self.counters["warnings_cleared"] += 1
        elif record.kind is AuditKind.ERROR:
            if event == "report_rejected":
                self.counters["reports_rejected"] += 1

    def close(self) -> None:
        self.audit.close()
