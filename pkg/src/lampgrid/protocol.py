"""Wire message schemas and newline-delimited JSON framing.

Every message travels as one UTF-8 JSON object per line with a fixed
top-level key order, so frames are human-inspectable, concatenate losslessly,
and re-encode byte-identically after a decode. Payloads carry a schema
version key ``v`` and tolerate unknown extra keys for forward compatibility;
everything else is validated strictly.

Delivery is at-least-once: receivers deduplicate on (sender, seq) and the
control service additionally deduplicates reports by report_id.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Union

from lampgrid.model import AnomalyClass, AnomalyReport, SignallingMode

PAYLOAD_VERSION = 1

_TOP_LEVEL_KEYS = ("type", "seq", "sender", "sent_sim_time_ms", "payload")


class MessageType(str, Enum):
    REPORT = "REPORT"
    COMMAND = "COMMAND"
    ACK = "ACK"
    FEED_UPDATE = "FEED_UPDATE"
    HEARTBEAT = "HEARTBEAT"
    PROFILE_DEPLOY = "PROFILE_DEPLOY"


class ProtocolError(ValueError):
    """Structured decode/encode failure.

    ``field`` names the offending payload or envelope field when known;
    ``offset`` is the byte offset of a JSON syntax error.
    """

    def __init__(self, message: str, field: Optional[str] = None,
                 offset: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.offset = offset


@dataclass
class Envelope:
    """One framed message: routing header plus a typed payload."""

    type: MessageType
    seq: int
    sender: str
    sent_sim_time_ms: int
    payload: dict


def encode(envelope: Envelope) -> bytes:
    """Serialize an envelope to a single newline-terminated JSON frame."""
    doc = {
        "type": envelope.type.value,
        "seq": envelope.seq,
        "sender": envelope.sender,
        "sent_sim_time_ms": envelope.sent_sim_time_ms,
        "payload": envelope.payload,
    }
    try:
        line = json.dumps(doc, separators=(",", ":"), ensure_ascii=False,
                          allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"payload not serializable: {exc}") from exc
    return line.encode("utf-8") + b"\n"


def decode(frame: Union[bytes, str]) -> Envelope:
    """Parse and validate one frame back into an envelope.

    Unknown message types, missing or mistyped fields, and out-of-range
    values raise ProtocolError naming the field. Extra payload keys are
    preserved untouched for forward compatibility.
    """
    if isinstance(frame, bytes):
        text = frame.decode("utf-8")
    else:
        text = frame
    if not text.endswith("\n"):
        raise ProtocolError("frame is not newline-terminated")
    body = text[:-1]
    if "\n" in body:
        raise ProtocolError("frame contains an embedded newline")
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ProtocolError(
            f"malformed JSON at byte {exc.pos}: {exc.msg}", offset=exc.pos
        ) from exc
    if not isinstance(doc, dict):
        raise ProtocolError("frame is not a JSON object")

    for key in _TOP_LEVEL_KEYS:
        if key not in doc:
            raise ProtocolError(f"missing field '{key}'", field=key)
    extra = set(doc) - set(_TOP_LEVEL_KEYS)
    if extra:
        name = sorted(extra)[0]
        raise ProtocolError(f"unexpected envelope field '{name}'", field=name)

    type_name = doc["type"]
    try:
        msg_type = MessageType(type_name)
    except ValueError:
        raise ProtocolError(f"unknown type {type_name}", field="type") from None

    seq = _require_int(doc, "seq", minimum=0)
    sender = doc["sender"]
    if not isinstance(sender, str) or not sender:
        raise ProtocolError("'sender' must be a non-empty string", field="sender")
    sent = _require_int(doc, "sent_sim_time_ms", minimum=0)

    payload = doc["payload"]
    if not isinstance(payload, dict):
        raise ProtocolError("'payload' must be an object", field="payload")
    _validate_payload(msg_type, payload)

    return Envelope(
        type=msg_type, seq=seq, sender=sender, sent_sim_time_ms=sent,
        payload=payload,
    )


def _require_int(doc: Mapping, key: str, minimum: Optional[int] = None,
                 prefix: str = "") -> int:
    value = doc.get(key)
    name = prefix + key
    if not isinstance(value, int) or isinstance(value, bool):
        raise ProtocolError(f"'{name}' must be an integer", field=name)
    if minimum is not None and value < minimum:
        raise ProtocolError(f"'{name}' must be >= {minimum}", field=name)
    return value


def _require_str(payload: Mapping, key: str, allow_empty: bool = False) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or (not allow_empty and not value):
        raise ProtocolError(f"'{key}' must be a non-empty string", field=key)
    return value


def _require_fraction(payload: Mapping, key: str) -> float:
    value = payload.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"'{key}' must be a number", field=key)
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ProtocolError(f"'{key}' out of range [0, 1]", field=key)
    return value


def _require_payload_field(payload: Mapping, key: str):
    if key not in payload:
        raise ProtocolError(f"missing field '{key}'", field=key)


def _validate_payload(msg_type: MessageType, payload: dict) -> None:
    _require_payload_field(payload, "v")
    version = payload["v"]
    if not isinstance(version, int) or isinstance(version, bool):
        raise ProtocolError("'v' must be an integer", field="v")
    if version != PAYLOAD_VERSION:
        raise ProtocolError(
            f"unsupported payload version {version}", field="v"
        )
    validator = _PAYLOAD_VALIDATORS[msg_type]
    validator(payload)


def _validate_report(payload: dict) -> None:
    for key in ("report_id", "lamppost_id", "anomaly", "phi", "position",
                "sim_time_ms", "confidence", "metadata"):
        _require_payload_field(payload, key)
    _require_str(payload, "report_id")
    _require_str(payload, "lamppost_id")
    anomaly = _require_str(payload, "anomaly")
    try:
        AnomalyClass(anomaly)
    except ValueError:
        raise ProtocolError(
            f"'anomaly' has unknown class {anomaly!r}", field="anomaly"
        ) from None
    _require_int(payload, "phi", minimum=0)
    _require_int(payload, "sim_time_ms", minimum=0)
    _require_fraction(payload, "confidence")
    position = payload["position"]
    if not isinstance(position, dict):
        raise ProtocolError("'position' must be an object", field="position")
    for axis, limit in (("lat", 90.0), ("lon", 180.0)):
        value = position.get(axis)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError(f"'position.{axis}' must be a number",
                                field=f"position.{axis}")
        if not math.isfinite(float(value)) or abs(float(value)) > limit:
            raise ProtocolError(f"'position.{axis}' out of range",
                                field=f"position.{axis}")
    metadata = payload["metadata"]
    if not isinstance(metadata, dict):
        raise ProtocolError("'metadata' must be an object", field="metadata")
    for key, value in metadata.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise ProtocolError(
                f"'metadata' entries must map strings to strings "
                f"(offending key {key!r})",
                field="metadata",
            )


def _validate_command(payload: dict) -> None:
    for key in ("target", "mode", "override"):
        _require_payload_field(payload, key)
    _require_str(payload, "target")
    mode = _require_str(payload, "mode")
    try:
        SignallingMode(mode)
    except ValueError:
        raise ProtocolError(f"'mode' has unknown value {mode!r}",
                            field="mode") from None
    if not isinstance(payload["override"], bool):
        raise ProtocolError("'override' must be a boolean", field="override")


def _validate_ack(payload: dict) -> None:
    for key in ("ack_type", "ack_seq", "status"):
        _require_payload_field(payload, key)
    ack_type = _require_str(payload, "ack_type")
    if ack_type not in MessageType.__members__:
        raise ProtocolError(f"'ack_type' has unknown value {ack_type!r}",
                            field="ack_type")
    _require_int(payload, "ack_seq", minimum=0)
    status = _require_str(payload, "status")
    if status not in ("ok", "rejected", "error"):
        raise ProtocolError(f"'status' has unknown value {status!r}",
                            field="status")


def _validate_feed_update(payload: dict) -> None:
    for key in ("source", "severity", "ttl_ms", "issued_sim_time_ms"):
        _require_payload_field(payload, key)
    _require_str(payload, "source")
    _require_fraction(payload, "severity")
    ttl = _require_int(payload, "ttl_ms")
    if ttl <= 0:
        raise ProtocolError("'ttl_ms' must be > 0", field="ttl_ms")
    _require_int(payload, "issued_sim_time_ms", minimum=0)


def _validate_heartbeat(payload: dict) -> None:
    _require_payload_field(payload, "status")
    _require_str(payload, "status")
    if "profile_version" in payload:
        _require_int(payload, "profile_version", minimum=1)


def _validate_profile_deploy(payload: dict) -> None:
    for key in ("version", "profile"):
        _require_payload_field(payload, key)
    _require_int(payload, "version", minimum=1)
    if not isinstance(payload["profile"], dict):
        raise ProtocolError("'profile' must be an object", field="profile")


_PAYLOAD_VALIDATORS = {
    MessageType.REPORT: _validate_report,
    MessageType.COMMAND: _validate_command,
    MessageType.ACK: _validate_ack,
    MessageType.FEED_UPDATE: _validate_feed_update,
    MessageType.HEARTBEAT: _validate_heartbeat,
    MessageType.PROFILE_DEPLOY: _validate_profile_deploy,
}


# -- payload builders ---------------------------------------------------------

def report_payload(report: AnomalyReport) -> dict:
    payload = {"v": PAYLOAD_VERSION}
    payload.update(report.as_dict())
    return payload


def report_from_payload(payload: Mapping) -> AnomalyReport:
    return AnomalyReport.from_dict(payload)


def command_payload(target: str, mode: SignallingMode, override: bool = False,
                    reason: str = "", alert_id: Optional[str] = None) -> dict:
    payload = {
        "v": PAYLOAD_VERSION,
        "target": target,
        "mode": mode.value,
        "override": override,
        "reason": reason,
    }
    if alert_id is not None:
        payload["alert_id"] = alert_id
    return payload


def ack_payload(ack_type: MessageType, ack_seq: int, status: str = "ok",
                detail: str = "") -> dict:
    payload = {
        "v": PAYLOAD_VERSION,
        "ack_type": ack_type.value,
        "ack_seq": ack_seq,
        "status": status,
    }
    if detail:
        payload["detail"] = detail
    return payload


def feed_update_payload(source: str, severity: float, ttl_ms: int,
                        issued_sim_time_ms: int, description: str = "") -> dict:
    return {
        "v": PAYLOAD_VERSION,
        "source": source,
        "severity": severity,
        "ttl_ms": ttl_ms,
        "issued_sim_time_ms": issued_sim_time_ms,
        "description": description,
    }


def heartbeat_payload(status: str = "up",
                      profile_version: Optional[int] = None) -> dict:
    payload = {"v": PAYLOAD_VERSION, "status": status}
    if profile_version is not None:
        payload["profile_version"] = profile_version
    return payload


def profile_deploy_payload(version: int, profile_doc: dict) -> dict:
    return {"v": PAYLOAD_VERSION, "version": version, "profile": profile_doc}


class SequenceTracker:
    """Per-sender sequence bookkeeping for at-least-once streams.

    ``observe`` classifies each envelope as 'ok', 'duplicate' (seq at or
    below the last seen; skip processing) or 'gap' (seq jumped; process but
    surface the loss).
    """

    def __init__(self):
        self._last: dict[str, int] = {}

    def observe(self, envelope: Envelope) -> str:
        last = self._last.get(envelope.sender, 0)
        if envelope.seq <= last:
            return "duplicate"
        self._last[envelope.sender] = envelope.seq
        if envelope.seq > last + 1:
            return "gap"
        return "ok"

    def last_seq(self, sender: str) -> int:
        return self._last.get(sender, 0)


class Sequencer:
    """Outbound sequence counter for one sender identity."""

    def __init__(self, sender: str):
        self.sender = sender
        self._seq = 0

    def next_envelope(self, msg_type: MessageType, sim_time_ms: int,
                      payload: dict) -> Envelope:
        self._seq += 1
        return Envelope(
            type=msg_type,
            seq=self._seq,
            sender=self.sender,
            sent_sim_time_ms=sim_time_ms,
            payload=payload,
        )
