"""Scenario files: one JSON document describing a full simulated run.

A scenario fixes everything a run needs (seed, bounds, fleet layout,
scripted scene events per lamppost, and the external feed script) so two
runs of the same file are identical. Validation is best-effort exhaustive:
all problems are reported in one pass, each naming where in the document
it sits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

from lampgrid.config import (
    DEFAULT_FEED_WEIGHTS,
    DEFAULT_PROPAGATION_RADIUS_M,
    TcuConfig,
)
from lampgrid.feeds import FeedEntry, FeedScriptError, parse_feed_entries
from lampgrid.llu import SceneEvent
from lampgrid.model import CriticalityBounds, GeoPoint, ModelError
from lampgrid.profiles import DetectorProfile, default_profile


class ScenarioError(ValueError):
    """Scenario rejected; message lists every problem found."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_ms: int
    bounds: CriticalityBounds
    alpha: float
    propagation_radius_m: float
    preventive_threshold: Optional[int]
    feed_weights: Mapping[str, float]
    profile: DetectorProfile
    fleet: tuple
    scene_events: Mapping[str, tuple]
    feeds: tuple

    def to_config(self) -> TcuConfig:
        return TcuConfig(
            bounds=self.bounds,
            alpha=self.alpha,
            propagation_radius_m=self.propagation_radius_m,
            preventive_threshold=self.preventive_threshold,
            feed_weights=dict(self.feed_weights),
            fleet=self.fleet,
            profile=self.profile,
        )

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "bounds": {"n_max": self.bounds.n_max, "m_max": self.bounds.m_max},
            "alpha": self.alpha,
            "propagation_radius_m": self.propagation_radius_m,
            "preventive_threshold": self.preventive_threshold,
            "feed_weights": dict(self.feed_weights),
            "profile": self.profile.as_dict(),
            "fleet": [
                {"id": lamppost_id, "lat": pos.lat, "lon": pos.lon}
                for lamppost_id, pos in self.fleet
            ],
            "scene_events": {
                lamppost_id: [event.as_dict() for event in events]
                for lamppost_id, events in self.scene_events.items()
            },
            "feeds": [entry.as_dict() for entry in self.feeds],
        }


def validate_scenario_doc(doc) -> list[str]:
    """Every problem in the document, or an empty list if it is runnable."""
    _, problems = _parse(doc)
    return problems


def scenario_from_dict(doc) -> Scenario:
    scenario, problems = _parse(doc)
    if problems:
        raise ScenarioError(problems)
    assert scenario is not None
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"malformed JSON: {exc}"]) from exc
    return scenario_from_dict(doc)


def _parse(doc) -> tuple[Optional[Scenario], list[str]]:
    problems: list[str] = []
    if not isinstance(doc, Mapping):
        return None, ["scenario must be a JSON object"]

    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        problems.append("'name' must be a string")
        name = "scenario"

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append("'seed' must be an integer")
        seed = 0

    duration_ms = doc.get("duration_ms")
    if not isinstance(duration_ms, int) or isinstance(duration_ms, bool) \
            or duration_ms < 0:
        problems.append("'duration_ms' must be a non-negative integer")
        duration_ms = 0

    bounds = CriticalityBounds(n_max=5, m_max=10)
    bounds_doc = doc.get("bounds", {})
    if not isinstance(bounds_doc, Mapping):
        problems.append("'bounds' must be an object")
    else:
        try:
            bounds = CriticalityBounds(
                n_max=bounds_doc.get("n_max", 5),
                m_max=bounds_doc.get("m_max", 10),
            )
        except (ModelError, TypeError) as exc:
            problems.append(f"'bounds': {exc}")

    alpha = doc.get("alpha", 0.5)
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) \
            or not math.isfinite(float(alpha)) or not 0.0 <= float(alpha) <= 1.0:
        problems.append("'alpha' must be a number in [0, 1]")
        alpha = 0.5
    alpha = float(alpha)

    radius = doc.get("propagation_radius_m", DEFAULT_PROPAGATION_RADIUS_M)
    if isinstance(radius, bool) or not isinstance(radius, (int, float)) \
            or not float(radius) > 0:
        problems.append("'propagation_radius_m' must be a number > 0")
        radius = DEFAULT_PROPAGATION_RADIUS_M
    radius = float(radius)

    threshold = doc.get("preventive_threshold")
    if threshold is not None and (
            not isinstance(threshold, int) or isinstance(threshold, bool)
            or threshold < 0):
        problems.append("'preventive_threshold' must be a non-negative integer")
        threshold = None

    weights = doc.get("feed_weights", dict(DEFAULT_FEED_WEIGHTS))
    if not isinstance(weights, Mapping):
        problems.append("'feed_weights' must be an object")
        weights = dict(DEFAULT_FEED_WEIGHTS)
    else:
        for source, weight in weights.items():
            if isinstance(weight, bool) or not isinstance(weight, (int, float)) \
                    or not 0.0 <= float(weight) <= 1.0:
                problems.append(
                    f"'feed_weights.{source}' must be a number in [0, 1]"
                )

    profile = default_profile()
    if "profile" in doc:
        try:
            profile = DetectorProfile.from_dict(doc["profile"])
        except ModelError as exc:
            problems.append(f"'profile': {exc}")

    fleet: list[tuple[str, GeoPoint]] = []
    fleet_doc = doc.get("fleet", [])
    if not isinstance(fleet_doc, list):
        problems.append("'fleet' must be a list")
    else:
        seen = set()
        for index, entry in enumerate(fleet_doc):
            where = f"'fleet[{index}]'"
            if not isinstance(entry, Mapping):
                problems.append(f"{where} is not an object")
                continue
            lamppost_id = entry.get("id")
            if not isinstance(lamppost_id, str) or not lamppost_id:
                problems.append(f"{where}.id must be a non-empty string")
                continue
            if lamppost_id in seen:
                problems.append(f"{where}.id duplicates {lamppost_id!r}")
                continue
            seen.add(lamppost_id)
            try:
                position = GeoPoint(lat=float(entry.get("lat")),
                                    lon=float(entry.get("lon")))
            except (ModelError, TypeError, ValueError) as exc:
                problems.append(f"{where}: {exc}")
                continue
            fleet.append((lamppost_id, position))

    fleet_ids = {lamppost_id for lamppost_id, _ in fleet}
    scene_events: dict[str, tuple] = {}
    events_doc = doc.get("scene_events", {})
    if not isinstance(events_doc, Mapping):
        problems.append("'scene_events' must be an object")
    else:
        for lamppost_id, events in events_doc.items():
            where = f"'scene_events.{lamppost_id}'"
            if lamppost_id not in fleet_ids:
                problems.append(f"{where} references a lamppost not in the fleet")
                continue
            if not isinstance(events, list):
                problems.append(f"{where} must be a list")
                continue
            parsed = []
            last_t = -1
            for index, event_doc in enumerate(events):
                try:
                    event = SceneEvent.from_dict(event_doc)
                except (ModelError, TypeError) as exc:
                    problems.append(f"{where}[{index}]: {exc}")
                    continue
                if event.sim_time_ms > duration_ms:
                    problems.append(
                        f"{where}[{index}]: t_ms {event.sim_time_ms} is past "
                        f"duration_ms {duration_ms}"
                    )
                    continue
                if event.sim_time_ms < last_t:
                    problems.append(f"{where}[{index}]: non-monotone t_ms")
                    continue
                last_t = event.sim_time_ms
                parsed.append(event)
            scene_events[lamppost_id] = tuple(parsed)

    feeds: tuple = ()
    feeds_doc = doc.get("feeds", [])
    if not isinstance(feeds_doc, list):
        problems.append("'feeds' must be a list")
    else:
        try:
            feeds = tuple(parse_feed_entries(feeds_doc))
        except FeedScriptError as exc:
            problems.append(f"'feeds': {exc}")
        for entry in feeds:
            if entry.t_ms > duration_ms:
                problems.append(
                    f"'feeds': t_ms {entry.t_ms} is past duration_ms {duration_ms}"
                )

    if problems:
        return None, problems
    scenario = Scenario(
        name=name,
        seed=seed,
        duration_ms=duration_ms,
        bounds=bounds,
        alpha=alpha,
        propagation_radius_m=radius,
        preventive_threshold=threshold,
        feed_weights=dict(weights),
        profile=profile,
        fleet=tuple(fleet),
        scene_events=scene_events,
        feeds=feeds,
    )
    return scenario, []
