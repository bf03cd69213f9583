"""Detection profiles: the deployable configuration of a lamppost detector.

A profile is the unit the modelling tier ships to the field: which anomaly
classes the detector reports, per-class confidence thresholds, and the base
criticality each class starts from. Profiles are versioned and immutable
once registered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from lampgrid.model import AnomalyClass, ModelError


class ProfileError(ModelError):
    """Raised for incomplete or out-of-range profile definitions."""


@dataclass(frozen=True)
class DetectorProfile:
    version: int
    enabled_classes: frozenset[AnomalyClass]
    confidence_thresholds: Mapping[AnomalyClass, float]
    base_criticality_table: Mapping[AnomalyClass, int]

    def __post_init__(self):
        if self.version < 1:
            raise ProfileError(f"profile version must be >= 1, got {self.version}")
        missing = [
            c.value for c in AnomalyClass if c not in self.base_criticality_table
        ]
        if missing:
            raise ProfileError(
                "base criticality table missing classes: " + ", ".join(missing)
            )
        missing = [
            c.value for c in AnomalyClass if c not in self.confidence_thresholds
        ]
        if missing:
            raise ProfileError(
                "confidence thresholds missing classes: " + ", ".join(missing)
            )
        for cls, threshold in self.confidence_thresholds.items():
            if not 0.0 <= threshold <= 1.0:
                raise ProfileError(
                    f"threshold for {cls.value} outside [0, 1]: {threshold}"
                )
        for cls, level in self.base_criticality_table.items():
            if not isinstance(level, int) or level < 0:
                raise ProfileError(
                    f"base criticality for {cls.value} must be a non-negative "
                    f"integer, got {level!r}"
                )

    def with_version(self, version: int) -> "DetectorProfile":
        return DetectorProfile(
            version=version,
            enabled_classes=self.enabled_classes,
            confidence_thresholds=self.confidence_thresholds,
            base_criticality_table=self.base_criticality_table,
        )

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "enabled_classes": sorted(c.value for c in self.enabled_classes),
            "thresholds": {
                c.value: self.confidence_thresholds[c]
                for c in AnomalyClass
                if c in self.confidence_thresholds
            },
            "base_criticality": {
                c.value: self.base_criticality_table[c]
                for c in AnomalyClass
                if c in self.base_criticality_table
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DetectorProfile":
        try:
            enabled = frozenset(
                AnomalyClass(name) for name in data.get("enabled_classes", [])
            )
            thresholds = {
                AnomalyClass(name): float(v)
                for name, v in data.get("thresholds", {}).items()
            }
            table = {
                AnomalyClass(name): int(v)
                for name, v in data.get("base_criticality", {}).items()
            }
        except ValueError as exc:
            raise ProfileError(f"bad profile document: {exc}") from exc
        return cls(
            version=int(data.get("version", 1)),
            enabled_classes=enabled,
            confidence_thresholds=thresholds,
            base_criticality_table=table,
        )


def base_criticality(anomaly: AnomalyClass, profile: DetectorProfile) -> int:
    """Look up the base criticality a profile assigns to an anomaly class."""
    try:
        return profile.base_criticality_table[anomaly]
    except KeyError:
        raise ProfileError(
            f"profile v{profile.version} has no base criticality for "
            f"{anomaly.value}"
        ) from None


def load_profile(path) -> DetectorProfile:
    """Read a profile JSON document from disk."""
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"{path}: invalid JSON ({exc})") from exc
    return DetectorProfile.from_dict(data)


def default_profile() -> DetectorProfile:
    """The profile shipped with the package: all classes on, sane levels."""
    text = resources.files("lampgrid.data").joinpath("default_profile.json").read_text(
        encoding="utf-8"
    )
    return DetectorProfile.from_dict(json.loads(text))
