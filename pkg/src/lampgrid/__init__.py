"""Smart-lamppost traffic-anomaly surveillance: simulator and services.

Layers, bottom up: per-lamppost units detect scripted anomalies and report
them with a local criticality index; a territorial control service fuses
external risk feeds into a global risk index, reassesses each report's
criticality, propagates signalling to proximal lampposts, and keeps the
operator's priority-ordered triage queue; everything it does lands in an
append-only, replayable audit journal.
"""

from lampgrid.model import (
    Alert,
    AlertState,
    AnomalyClass,
    AnomalyReport,
    CriticalityBounds,
    GeoPoint,
    SignallingMode,
    mode_for_criticality,
    reassess_criticality,
)
from lampgrid.risk import GlobalRiskContext, RiskSignal, compute_global_risk
from lampgrid.tcu import ControlUnit, Notification, PreventiveWarning

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AlertState",
    "AnomalyClass",
    "AnomalyReport",
    "ControlUnit",
    "CriticalityBounds",
    "GeoPoint",
    "GlobalRiskContext",
    "Notification",
    "PreventiveWarning",
    "RiskSignal",
    "SignallingMode",
    "compute_global_risk",
    "mode_for_criticality",
    "reassess_criticality",
    "__version__",
]
