"""Versioned store and deployment path for detector profiles.

Profiles stand in for deployable trained models: register validates and
freezes a configuration under the next version number; deploy pushes one
version to chosen units through a caller-supplied send channel and reports
per-target outcomes. Unknown targets fail individually without aborting
the rest of the rollout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from lampgrid.profiles import DetectorProfile, ProfileError


class RegistryError(ProfileError):
    """Raised for unknown versions; validation failures stay ProfileError."""


@dataclass
class DeploymentReport:
    version: int
    results: dict[str, str] = field(default_factory=dict)

    @property
    def ok_targets(self) -> list[str]:
        return [t for t, status in self.results.items() if status == "ok"]

    @property
    def failed_targets(self) -> list[str]:
        return [t for t, status in self.results.items() if status != "ok"]

    def as_dict(self) -> dict:
        return {"version": self.version, "results": dict(self.results)}


SendProfile = Callable[[str, DetectorProfile], str]


class ProfileRegistry:
    """Append-only version store; content is never deduplicated."""

    def __init__(self):
        self._profiles: dict[int, DetectorProfile] = {}

    def register(self, profile: Union[DetectorProfile, dict]) -> int:
        if isinstance(profile, dict):
            profile = DetectorProfile.from_dict(profile)
        version = self.latest_version() + 1
        self._profiles[version] = profile.with_version(version)
        return version

    def get(self, version: int) -> DetectorProfile:
        try:
            return self._profiles[version]
        except KeyError:
            raise RegistryError(f"unknown profile version {version}") from None

    def latest_version(self) -> int:
        return max(self._profiles, default=0)

    def versions(self) -> list[int]:
        return sorted(self._profiles)

    def deploy(self, version: int, targets: Iterable[str],
               send: SendProfile) -> DeploymentReport:
        """Push one stored version to each target via the send channel.

        send returns a per-target status string ('ok', 'rejected: …',
        'unknown_target', …); statuses are recorded verbatim.
        """
        profile = self.get(version)
        report = DeploymentReport(version=version)
        for target in targets:
            report.results[target] = send(target, profile)
        return report
