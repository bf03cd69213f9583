"""Domain types shared by every tier, plus the criticality arithmetic.

Severity flows through the system as two small integers: a local criticality
index assigned by the lamppost that saw the anomaly (``phi``), and a
territory-wide risk index fused from external feeds (``lambda``). The control
service combines the two into the reassessed index ``varphi`` that drives
triage ordering and signalling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional


class ModelError(ValueError):
    """Raised when a value violates a domain invariant."""


class AnomalyKind(Enum):
    """Whether recognising the anomaly needs a time component."""

    STATIC = "static"
    DYNAMIC = "dynamic"


class AnomalyClass(str, Enum):
    """Closed vocabulary of detectable traffic anomalies."""

    ILLEGALLY_PARKED_VEHICLE = "illegally_parked_vehicle"
    RISKY_OVERTAKING = "risky_overtaking"
    VEHICLE_ON_PEDESTRIAN_AREA = "vehicle_on_pedestrian_area"
    RED_LIGHT_VIOLATION = "red_light_violation"
    VEHICLE_COLLISION = "vehicle_collision"
    WRONG_WAY_DRIVING = "wrong_way_driving"
    RISKY_U_TURN = "risky_u_turn"
    TRAFFIC_CONGESTION = "traffic_congestion"

    @property
    def kind(self) -> AnomalyKind:
        if self in (
            AnomalyClass.ILLEGALLY_PARKED_VEHICLE,
            AnomalyClass.VEHICLE_ON_PEDESTRIAN_AREA,
        ):
            return AnomalyKind.STATIC
        return AnomalyKind.DYNAMIC


class SignallingMode(str, Enum):
    """Sound/light device state on a lamppost, ordered by severity."""

    OFF = "off"
    MODERATE_SPEED = "moderate_speed"
    ACCIDENT = "accident"

    @property
    def rank(self) -> int:
        return _MODE_RANK[self]


_MODE_RANK = {
    SignallingMode.OFF: 0,
    SignallingMode.MODERATE_SPEED: 1,
    SignallingMode.ACCIDENT: 2,
}


class AlertState(str, Enum):
    """Lifecycle of a control-service alert."""

    ACTIVE = "active"
    CONFIRMED = "confirmed"
    DISMISSED_FALSE_POSITIVE = "dismissed_false_positive"
    DEACTIVATED = "deactivated"


# Legal alert state transitions; states absent from the map are terminal.
ALERT_TRANSITIONS: dict[AlertState, frozenset[AlertState]] = {
    AlertState.ACTIVE: frozenset(
        {
            AlertState.CONFIRMED,
            AlertState.DISMISSED_FALSE_POSITIVE,
            AlertState.DEACTIVATED,
        }
    ),
    AlertState.CONFIRMED: frozenset({AlertState.DEACTIVATED}),
    AlertState.DISMISSED_FALSE_POSITIVE: frozenset(),
    AlertState.DEACTIVATED: frozenset(),
}

TERMINAL_ALERT_STATES = frozenset(
    state for state, nxt in ALERT_TRANSITIONS.items() if not nxt
)


@dataclass(frozen=True)
class CriticalityBounds:
    """Deployment-wide ceilings for the two severity scales.

    ``n_max`` caps the per-area criticality index, ``m_max`` caps the
    territory-wide risk index. Both are fixed for the lifetime of a run.
    """

    n_max: int = 5
    m_max: int = 10

    def __post_init__(self):
        if self.n_max < 1:
            raise ModelError(f"n_max must be >= 1, got {self.n_max}")
        if self.m_max < 1:
            raise ModelError(f"m_max must be >= 1, got {self.m_max}")

    def check_phi(self, value: int) -> int:
        """Validate a local criticality index against these bounds."""
        if not isinstance(value, int) or isinstance(value, bool):
            raise ModelError(f"criticality index must be an integer, got {value!r}")
        if not 0 <= value <= self.n_max:
            raise ModelError(
                f"criticality index {value} outside [0, {self.n_max}]"
            )
        return value

    def check_lambda(self, value: int) -> int:
        """Validate a global risk index against these bounds."""
        if not isinstance(value, int) or isinstance(value, bool):
            raise ModelError(f"risk index must be an integer, got {value!r}")
        if not 0 <= value <= self.m_max:
            raise ModelError(f"risk index {value} outside [0, {self.m_max}]")
        return value


def check_alpha(value: float) -> float:
    """Validate the risk weighting fraction (must lie in [0, 1])."""
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ModelError(f"alpha must be in [0, 1], got {value!r}")
    return value


def check_confidence(value: float, name: str = "confidence") -> float:
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ModelError(f"{name} must be in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ModelError(f"latitude {self.lat!r} outside [-90, 90]")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ModelError(f"longitude {self.lon!r} outside [-180, 180]")

    def as_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}


@dataclass(frozen=True)
class AnomalyReport:
    """One detection event emitted by a lamppost unit.

    ``metadata`` is an opaque string map standing in for the recording
    artefacts a real unit would attach (clip references, sensor extras).
    """

    report_id: str
    lamppost_id: str
    anomaly: AnomalyClass
    phi: int
    position: GeoPoint
    sim_time_ms: int
    confidence: float
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.sim_time_ms < 0:
            raise ModelError(f"sim_time_ms must be >= 0, got {self.sim_time_ms}")
        if self.phi < 0:
            raise ModelError(f"phi must be >= 0, got {self.phi}")
        check_confidence(self.confidence)

    def as_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "lamppost_id": self.lamppost_id,
            "anomaly": self.anomaly.value,
            "phi": self.phi,
            "position": self.position.as_dict(),
            "sim_time_ms": self.sim_time_ms,
            "confidence": self.confidence,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnomalyReport":
        return cls(
            report_id=data["report_id"],
            lamppost_id=data["lamppost_id"],
            anomaly=AnomalyClass(data["anomaly"]),
            phi=int(data["phi"]),
            position=GeoPoint(data["position"]["lat"], data["position"]["lon"]),
            sim_time_ms=int(data["sim_time_ms"]),
            confidence=float(data["confidence"]),
            metadata=dict(data.get("metadata", {})),
        )


class IllegalTransition(ModelError):
    """Raised on an alert state change outside the allowed edges."""

    def __init__(self, current: AlertState, requested: AlertState):
        super().__init__(
            f"cannot move alert from state '{current.value}' to "
            f"'{requested.value}'"
        )
        self.current = current
        self.requested = requested


@dataclass
class Alert:
    """Control-service lifecycle object wrapping a report.

    ``varphi`` is the reassessed criticality, frozen together with the risk
    index observed at ingest so the value stays recomputable from the audit
    trail.
    """

    alert_id: str
    source_report: AnomalyReport
    varphi: int
    lambda_at_ingest: int
    state: AlertState = AlertState.ACTIVE
    propagated_to: list[str] = field(default_factory=list)
    created_sim_time_ms: int = 0

    def transition(self, new_state: AlertState) -> None:
        """Move to ``new_state``, enforcing the lifecycle edges."""
        if new_state not in ALERT_TRANSITIONS[self.state]:
            raise IllegalTransition(self.state, new_state)
        self.state = new_state

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_ALERT_STATES

    def as_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "source_report": self.source_report.as_dict(),
            "varphi": self.varphi,
            "lambda_at_ingest": self.lambda_at_ingest,
            "state": self.state.value,
            "propagated_to": list(self.propagated_to),
            "created_sim_time_ms": self.created_sim_time_ms,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Alert":
        return cls(
            alert_id=data["alert_id"],
            source_report=AnomalyReport.from_dict(data["source_report"]),
            varphi=int(data["varphi"]),
            lambda_at_ingest=int(data["lambda_at_ingest"]),
            state=AlertState(data["state"]),
            propagated_to=list(data["propagated_to"]),
            created_sim_time_ms=int(data["created_sim_time_ms"]),
        )


def reassess_criticality(
    phi: int, alpha: float, lam: int, bounds: CriticalityBounds
) -> int:
    """Raise a local criticality index by the weighted territory risk.

    The weighted risk contribution is computed in double precision, the sum
    is rounded up, and the result is clamped from above at ``n_max``: the
    territory context can only ever increase severity, never push it past
    the area's maximum level.
    """
    raised = math.ceil(phi + alpha * lam)
    return min(raised, bounds.n_max)


def mode_for_criticality(varphi: int, bounds: CriticalityBounds) -> SignallingMode:
    """Map a reassessed criticality onto a signalling band.

    Zero keeps devices off; the lower half of the scale (inclusive of the
    midpoint, rounded up) asks drivers to moderate speed; anything above
    signals an accident.
    """
    if varphi <= 0:
        return SignallingMode.OFF
    if varphi <= math.ceil(bounds.n_max / 2):
        return SignallingMode.MODERATE_SPEED
    return SignallingMode.ACCIDENT


@dataclass(frozen=True)
class SignallingState:
    """Current device state on one lamppost.

    When an operator override is present the mode always equals it; the
    automatic band logic only applies while no override is active.
    """

    mode: SignallingMode = SignallingMode.OFF
    since_sim_time_ms: int = 0
    override: Optional[SignallingMode] = None

    def __post_init__(self):
        if self.override is not None and self.mode != self.override:
            raise ModelError(
                f"override {self.override.value} present but mode is "
                f"{self.mode.value}"
            )

    def as_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "since_sim_time_ms": self.since_sim_time_ms,
            "override": self.override.value if self.override else None,
        }
