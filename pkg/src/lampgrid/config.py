"""Control-service configuration: bounds, weights, fleet layout.

One JSON document configures a deployment. Unknown feed sources default to
weight 1.0 so an unrecognized but live source is never silently muted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

from lampgrid.model import CriticalityBounds, GeoPoint, ModelError, check_alpha
from lampgrid.profiles import DetectorProfile, default_profile, load_profile

DEFAULT_FEED_WEIGHTS: Mapping[str, float] = {
    "civil_protection": 1.0,
    "weather": 0.7,
    "public_utility": 0.4,
}

DEFAULT_PROPAGATION_RADIUS_M = 300.0


class ConfigError(ModelError):
    pass


def default_preventive_threshold(m_max: int) -> int:
    return math.ceil(0.6 * m_max)


def weight_for(source: str, weights: Mapping[str, float]) -> float:
    return weights.get(source, 1.0)


@dataclass(frozen=True)
class TcuConfig:
    bounds: CriticalityBounds = field(
        default_factory=lambda: CriticalityBounds(n_max=5, m_max=10)
    )
    alpha: float = 0.5
    propagation_radius_m: float = DEFAULT_PROPAGATION_RADIUS_M
    preventive_threshold: Optional[int] = None
    feed_weights: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_FEED_WEIGHTS)
    )
    fleet: tuple = ()
    profile: Optional[DetectorProfile] = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.propagation_radius_m > 0:
            raise ConfigError("propagation_radius_m must be > 0")
        threshold = self.preventive_threshold
        if threshold is None:
            threshold = default_preventive_threshold(self.bounds.m_max)
            object.__setattr__(self, "preventive_threshold", threshold)
        if not isinstance(threshold, int) or threshold < 0:
            raise ConfigError("preventive_threshold must be a non-negative integer")
        for source, weight in self.feed_weights.items():
            if not 0.0 <= float(weight) <= 1.0:
                raise ConfigError(
                    f"feed weight for {source!r} out of range [0, 1]"
                )
        seen = set()
        for lamppost_id, _pos in self.fleet:
            if lamppost_id in seen:
                raise ConfigError(f"duplicate lamppost id {lamppost_id!r}")
            seen.add(lamppost_id)
        if self.profile is None:
            object.__setattr__(self, "profile", default_profile())

    def as_dict(self) -> dict:
        return {
            "n_max": self.bounds.n_max,
            "m_max": self.bounds.m_max,
            "alpha": self.alpha,
            "propagation_radius_m": self.propagation_radius_m,
            "preventive_threshold": self.preventive_threshold,
            "feed_weights": dict(self.feed_weights),
            "fleet": [
                {"id": lamppost_id, "lat": pos.lat, "lon": pos.lon}
                for lamppost_id, pos in self.fleet
            ],
            "profile": self.profile.as_dict(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: Optional[Path] = None) -> "TcuConfig":
        if not isinstance(doc, Mapping):
            raise ConfigError("config must be a JSON object")
        try:
            bounds = CriticalityBounds(
                n_max=_int_key(doc, "n_max", 5),
                m_max=_int_key(doc, "m_max", 10),
            )
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc
        fleet = _parse_fleet(doc.get("fleet", []))
        profile: Optional[DetectorProfile] = None
        if "profile" in doc:
            profile = DetectorProfile.from_dict(doc["profile"])
        elif "profile_path" in doc:
            path = Path(doc["profile_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            profile = load_profile(path)
        threshold = doc.get("preventive_threshold")
        if threshold is not None and (
            not isinstance(threshold, int) or isinstance(threshold, bool)
        ):
            raise ConfigError("preventive_threshold must be an integer")
        weights = doc.get("feed_weights", dict(DEFAULT_FEED_WEIGHTS))
        if not isinstance(weights, Mapping):
            raise ConfigError("feed_weights must be an object")
        return cls(
            bounds=bounds,
            alpha=float(doc.get("alpha", 0.5)),
            propagation_radius_m=float(
                doc.get("propagation_radius_m", DEFAULT_PROPAGATION_RADIUS_M)
            ),
            preventive_threshold=threshold,
            feed_weights=dict(weights),
            fleet=fleet,
            profile=profile,
        )


def _int_key(doc: Mapping, key: str, default: int) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"'{key}' must be an integer")
    return value


def _parse_fleet(entries) -> tuple:
    if not isinstance(entries, list):
        raise ConfigError("'fleet' must be a list")
    fleet = []
    for index, entry in enumerate(entries):
        if not isinstance(entry, Mapping):
            raise ConfigError(f"fleet entry {index} is not an object")
        for key in ("id", "lat", "lon"):
            if key not in entry:
                raise ConfigError(f"fleet entry {index} missing '{key}'")
        lamppost_id = entry["id"]
        if not isinstance(lamppost_id, str) or not lamppost_id:
            raise ConfigError(f"fleet entry {index}: 'id' must be a non-empty string")
        try:
            position = GeoPoint(lat=float(entry["lat"]), lon=float(entry["lon"]))
        except (TypeError, ValueError, ModelError) as exc:
            raise ConfigError(f"fleet entry {index}: {exc}") from exc
        fleet.append((lamppost_id, position))
    return tuple(fleet)


def load_config(path: Union[str, Path]) -> TcuConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    return TcuConfig.from_dict(doc, base_dir=path.parent)
