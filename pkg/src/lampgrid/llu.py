"""Lamppost local unit: scripted detection, report emission, signalling.

Each unit replays scripted scene events through a probability-gated detector
(the stand-in for on-device inference), stamps detections with the base
criticality from its active profile, and emits reports upstream. It also
owns the local signalling devices: band-driven modes from upstream commands,
with operator overrides dominating until explicitly cleared.

Determinism contract: one RNG draw is consumed per scene event whether or
not it detects, so the draw stream never shifts when profiles change.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional

from lampgrid.model import (
    AnomalyClass,
    AnomalyReport,
    CriticalityBounds,
    GeoPoint,
    ModelError,
    SignallingMode,
    SignallingState,
    check_confidence,
    mode_for_criticality,
)
from lampgrid.profiles import DetectorProfile, base_criticality
from lampgrid import protocol
from lampgrid.protocol import Envelope, MessageType


@dataclass
class LamppostDescriptor:
    lamppost_id: str
    position: GeoPoint
    signalling: SignallingState
    active_profile_version: int = 1

    def as_dict(self) -> dict:
        return {
            "lamppost_id": self.lamppost_id,
            "position": self.position.as_dict(),
            "signalling": self.signalling.as_dict(),
            "active_profile_version": self.active_profile_version,
        }


@dataclass(frozen=True)
class SceneEvent:
    """One scripted moment in front of a lamppost's camera."""

    sim_time_ms: int
    anomaly: AnomalyClass
    true_positive: bool
    detection_probability: float
    confidence_if_detected: float
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.sim_time_ms < 0:
            raise ModelError("sim_time_ms must be >= 0")
        check_confidence(self.detection_probability, "detection_probability")
        check_confidence(self.confidence_if_detected, "confidence_if_detected")

    def as_dict(self) -> dict:
        doc = {
            "t_ms": self.sim_time_ms,
            "anomaly": self.anomaly.value,
            "true_positive": self.true_positive,
            "detection_probability": self.detection_probability,
            "confidence": self.confidence_if_detected,
        }
        if self.metadata:
            doc["metadata"] = dict(self.metadata)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SceneEvent":
        for key in ("t_ms", "anomaly", "detection_probability", "confidence"):
            if key not in doc:
                raise ModelError(f"scene event missing field '{key}'")
        t_ms = doc["t_ms"]
        if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
            raise ModelError("'t_ms' must be a non-negative integer")
        try:
            anomaly = AnomalyClass(doc["anomaly"])
        except ValueError:
            raise ModelError(f"unknown anomaly class {doc['anomaly']!r}") from None
        true_positive = doc.get("true_positive", True)
        if not isinstance(true_positive, bool):
            raise ModelError("'true_positive' must be a boolean")
        metadata = doc.get("metadata", {})
        if not isinstance(metadata, dict) or any(
            not isinstance(k, str) or not isinstance(v, str)
            for k, v in metadata.items()
        ):
            raise ModelError("'metadata' must map strings to strings")
        return cls(
            sim_time_ms=t_ms,
            anomaly=anomaly,
            true_positive=true_positive,
            detection_probability=float(doc["detection_probability"]),
            confidence_if_detected=float(doc["confidence"]),
            metadata=metadata,
        )


@dataclass(frozen=True)
class Detection:
    anomaly: AnomalyClass
    confidence: float


def detect(event: SceneEvent, profile: DetectorProfile,
           rng_draw: float) -> Optional[Detection]:
    """Scripted detector: class enabled, draw under p, confidence over threshold.

    The draw boundary is strict (draw == p misses), matching how a uniform
    [0,1) sample models a probability-p event.
    """
    if event.anomaly not in profile.enabled_classes:
        return None
    if not rng_draw < event.detection_probability:
        return None
    if event.confidence_if_detected < profile.confidence_thresholds[event.anomaly]:
        return None
    return Detection(anomaly=event.anomaly, confidence=event.confidence_if_detected)


def build_report(det: Detection, lamppost: LamppostDescriptor,
                 profile: DetectorProfile, now_ms: int,
                 serial: int, extra_metadata: Optional[Mapping[str, str]] = None,
                 ) -> AnomalyReport:
    """Assemble the upstream report for one detection.

    serial is the unit's report counter; ids are reproducible so a rerun of
    the same scenario names the same reports.
    """
    metadata = {
        "profile_version": str(profile.version),
        "clip_ref": f"clip://{lamppost.lamppost_id}/{now_ms}/{serial:04d}",
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    return AnomalyReport(
        report_id=f"{lamppost.lamppost_id}-r{serial:04d}",
        lamppost_id=lamppost.lamppost_id,
        anomaly=det.anomaly,
        phi=base_criticality(det.anomaly, profile),
        position=lamppost.position,
        sim_time_ms=now_ms,
        confidence=det.confidence,
        metadata=metadata,
    )


def apply_signalling(state: SignallingState, varphi: int,
                     bounds: CriticalityBounds, now_ms: int) -> SignallingState:
    """Band-driven mode change; assumes no operator override is active."""
    mode = mode_for_criticality(varphi, bounds)
    if mode is state.mode:
        return state
    return SignallingState(mode=mode, since_sim_time_ms=now_ms, override=None)


def apply_override(state: SignallingState, cmd: Optional[SignallingMode],
                   now_ms: int) -> SignallingState:
    """Set or clear an operator-forced mode.

    Clearing keeps the current mode; the next band update recomputes it.
    """
    if cmd is None:
        if state.override is None:
            return state
        return SignallingState(mode=state.mode, since_sim_time_ms=now_ms,
                               override=None)
    if state.override is cmd and state.mode is cmd:
        return state
    return SignallingState(mode=cmd, since_sim_time_ms=now_ms, override=cmd)


def rng_for(seed: int, lamppost_id: str) -> random.Random:
    """Split one run seed into an independent per-unit stream."""
    digest = hashlib.sha256(f"{seed}:{lamppost_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class LamppostUnit:
    """One simulated unit: detector, report counter, signalling state."""

    def __init__(self, lamppost_id: str, position: GeoPoint,
                 profile: DetectorProfile, bounds: CriticalityBounds,
                 seed: int = 0):
        self.descriptor = LamppostDescriptor(
            lamppost_id=lamppost_id,
            position=position,
            signalling=SignallingState(
                mode=SignallingMode.OFF, since_sim_time_ms=0, override=None
            ),
            active_profile_version=profile.version,
        )
        self.profile = profile
        self.bounds = bounds
        self._rng = rng_for(seed, lamppost_id)
        self._serial = 0
        self._sequencer = protocol.Sequencer(lamppost_id)

    @property
    def lamppost_id(self) -> str:
        return self.descriptor.lamppost_id

    def handle_scene_event(self, event: SceneEvent) -> Optional[Envelope]:
        """Run one scripted event through the detector; maybe emit a REPORT."""
        draw = self._rng.random()
        det = detect(event, self.profile, draw)
        if det is None:
            return None
        self._serial += 1
        report = build_report(
            det, self.descriptor, self.profile, event.sim_time_ms,
            self._serial, extra_metadata=event.metadata,
        )
        return self._sequencer.next_envelope(
            MessageType.REPORT, event.sim_time_ms,
            protocol.report_payload(report),
        )

    def handle_envelope(self, envelope: Envelope) -> Optional[Envelope]:
        """Apply one downstream message; returns an ACK when one is owed."""
        if envelope.type is MessageType.COMMAND:
            self._apply_command(envelope)
            return None
        if envelope.type is MessageType.PROFILE_DEPLOY:
            return self._apply_deploy(envelope)
        return None

    def _apply_command(self, envelope: Envelope) -> None:
        payload = envelope.payload
        if payload["target"] != self.lamppost_id:
            return
        mode = SignallingMode(payload["mode"])
        now = envelope.sent_sim_time_ms
        state = self.descriptor.signalling
        if payload["override"]:
            self.descriptor.signalling = apply_override(state, mode, now)
            return
        # Band commands never displace an operator override.
        if state.override is not None:
            return
        if mode is not state.mode:
            self.descriptor.signalling = SignallingState(
                mode=mode, since_sim_time_ms=now, override=None
            )

    def _apply_deploy(self, envelope: Envelope) -> Envelope:
        payload = envelope.payload
        now = envelope.sent_sim_time_ms
        version = payload["version"]
        if version <= self.descriptor.active_profile_version:
            status, detail = "rejected", (
                f"version {version} not newer than "
                f"{self.descriptor.active_profile_version}"
            )
        else:
            try:
                profile = DetectorProfile.from_dict(payload["profile"])
            except ModelError as exc:
                status, detail = "error", str(exc)
            else:
                self.profile = profile.with_version(version)
                self.descriptor.active_profile_version = version
                status, detail = "ok", ""
        return self._sequencer.next_envelope(
            MessageType.ACK, now,
            protocol.ack_payload(MessageType.PROFILE_DEPLOY, envelope.seq,
                                 status, detail),
        )

    def heartbeat(self, now_ms: int) -> Envelope:
        return self._sequencer.next_envelope(
            MessageType.HEARTBEAT, now_ms,
            protocol.heartbeat_payload(
                profile_version=self.descriptor.active_profile_version
            ),
        )
