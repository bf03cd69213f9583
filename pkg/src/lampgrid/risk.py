"""Territory-wide risk fusion from external information feeds.

External sources (weather, civil protection, public utilities) deliver
scored signals; the fusion rule is a weighted maximum, so a single grave
civil-protection alert dominates no matter how many benign feeds are live.
Signals age out by TTL; there is no explicit retraction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from lampgrid.model import CriticalityBounds, ModelError


@dataclass(frozen=True)
class RiskSignal:
    """One scored item from an external feed."""

    source_id: str
    severity: float
    weight: float
    issued_sim_time_ms: int
    ttl_ms: int
    description: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.severity) and 0.0 <= self.severity <= 1.0):
            raise ModelError(f"severity {self.severity!r} outside [0, 1]")
        if not (math.isfinite(self.weight) and 0.0 <= self.weight <= 1.0):
            raise ModelError(f"weight {self.weight!r} outside [0, 1]")
        if self.ttl_ms <= 0:
            raise ModelError(f"ttl_ms must be > 0, got {self.ttl_ms}")

    @property
    def expires_at_ms(self) -> int:
        return self.issued_sim_time_ms + self.ttl_ms

    def as_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "severity": self.severity,
            "weight": self.weight,
            "issued_sim_time_ms": self.issued_sim_time_ms,
            "ttl_ms": self.ttl_ms,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RiskSignal":
        return cls(
            source_id=data["source_id"],
            severity=float(data["severity"]),
            weight=float(data["weight"]),
            issued_sim_time_ms=int(data["issued_sim_time_ms"]),
            ttl_ms=int(data["ttl_ms"]),
            description=data.get("description", ""),
        )


@dataclass(frozen=True)
class GlobalRiskContext:
    """Current risk index plus the live signals it was derived from."""

    lambda_: int
    contributing: tuple[RiskSignal, ...]
    computed_sim_time_ms: int

    def as_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "contributing": [s.as_dict() for s in self.contributing],
            "computed_sim_time_ms": self.computed_sim_time_ms,
        }


def expire_signals(signals: Iterable[RiskSignal], now_ms: int) -> list[RiskSignal]:
    """Drop signals whose TTL has run out, preserving order.

    Expiry is strict: a signal whose TTL ends exactly at now_ms is gone.
    """
    return [s for s in signals if s.issued_sim_time_ms + s.ttl_ms > now_ms]


def compute_global_risk(
    signals: Iterable[RiskSignal], now_ms: int, bounds: CriticalityBounds
) -> int:
    """Fuse live signals into the territory risk index.

    The strongest weight*severity product among live signals sets the level,
    scaled onto [0, m_max] and rounded up. No live signals means zero risk.
    """
    live = expire_signals(signals, now_ms)
    if not live:
        return 0
    strongest = max(s.weight * s.severity for s in live)
    return min(bounds.m_max, math.ceil(bounds.m_max * strongest))


def dominant_signal(
    signals: Iterable[RiskSignal], now_ms: int
) -> Optional[RiskSignal]:
    """The live signal that sets the current risk level, if any.

    Ties resolve to the earliest-issued, then lexicographically smallest
    source, so the choice is deterministic regardless of input order.
    """
    live = expire_signals(signals, now_ms)
    if not live:
        return None
    return max(
        live,
        key=lambda s: (
            s.weight * s.severity,
            -s.issued_sim_time_ms,
            _reversed_order_key(s.source_id),
        ),
    )


def _reversed_order_key(text: str) -> tuple:
    # max() picks the largest key; invert each character so the
    # lexicographically smallest source wins ties.
    return tuple(-ord(c) for c in text)


class SignalStore:
    """Append-only signal history owned by the control service.

    Signals are never removed: point-in-time queries filter by issue time
    and TTL, which keeps risk evaluation correct even when reports and feed
    updates arrive out of order across transports. ``checkpoints`` yields
    the sim times at which the live set changes (issues and expiries), so
    the owner can re-derive the current context exactly when needed.
    """

    def __init__(self):
        self._signals: list[RiskSignal] = []
        self._checkpoints: list[int] = []

    def add(self, signal: RiskSignal) -> None:
        self._signals.append(signal)
        heapq.heappush(self._checkpoints, signal.issued_sim_time_ms)
        heapq.heappush(self._checkpoints, signal.expires_at_ms)

    def live(self, now_ms: int) -> list[RiskSignal]:
        """Signals contributing at now_ms: already issued and not expired."""
        return [
            s
            for s in expire_signals(self._signals, now_ms)
            if s.issued_sim_time_ms <= now_ms
        ]

    def context(self, now_ms: int, bounds: CriticalityBounds) -> GlobalRiskContext:
        live = self.live(now_ms)
        lam = compute_global_risk(live, now_ms, bounds)
        return GlobalRiskContext(
            lambda_=lam,
            contributing=tuple(live),
            computed_sim_time_ms=now_ms,
        )

    def dominant(self, now_ms: int) -> Optional[RiskSignal]:
        return dominant_signal(self.live(now_ms), now_ms)

    def due_checkpoints(self, now_ms: int) -> list[int]:
        """Pop and return all change points at or before now_ms, ascending."""
        due = []
        while self._checkpoints and self._checkpoints[0] <= now_ms:
            t = heapq.heappop(self._checkpoints)
            if not due or due[-1] != t:
                due.append(t)
        return due

    def __len__(self) -> int:
        return len(self._signals)
