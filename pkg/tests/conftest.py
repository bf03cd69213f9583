import json
from pathlib import Path

import pytest

from lampgrid.model import CriticalityBounds
from lampgrid.profiles import DetectorProfile
from lampgrid.scenario import Scenario, scenario_from_dict

ALL_CLASSES = [
    "illegally_parked_vehicle",
    "risky_overtaking",
    "vehicle_on_pedestrian_area",
    "red_light_violation",
    "vehicle_collision",
    "wrong_way_driving",
    "risky_u_turn",
    "traffic_congestion",
]


@pytest.fixture
def bounds() -> CriticalityBounds:
    return CriticalityBounds(n_max=5, m_max=10)


def make_profile_doc(version: int = 1, threshold: float = 0.5,
                     base: int = 3, overrides: dict = None) -> dict:
    criticality = {name: base for name in ALL_CLASSES}
    if overrides:
        criticality.update(overrides)
    return {
        "version": version,
        "enabled_classes": list(ALL_CLASSES),
        "thresholds": {name: threshold for name in ALL_CLASSES},
        "base_criticality": criticality,
    }


@pytest.fixture
def flat_profile() -> DetectorProfile:
    return DetectorProfile.from_dict(make_profile_doc())


def make_scenario_doc(**overrides) -> dict:
    doc = {
        "name": "test",
        "seed": 7,
        "duration_ms": 20000,
        "bounds": {"n_max": 5, "m_max": 10},
        "alpha": 0.5,
        "propagation_radius_m": 150.0,
        "preventive_threshold": 6,
        "fleet": [
            {"id": "llu-01", "lat": 0.0, "lon": 0.0},
            {"id": "llu-02", "lat": 0.0, "lon": 0.001},
            {"id": "llu-03", "lat": 0.0, "lon": 0.01},
        ],
        "scene_events": {
            "llu-01": [
                {
                    "t_ms": 1000,
                    "anomaly": "vehicle_collision",
                    "true_positive": True,
                    "detection_probability": 1.0,
                    "confidence": 0.9,
                }
            ]
        },
        "feeds": [
            {
                "t_ms": 500,
                "source": "weather",
                "severity": 1.0,
                "ttl_ms": 10000,
                "desc": "storm cell",
            }
        ],
    }
    doc.update(overrides)
    return doc


def make_scenario(**overrides) -> Scenario:
    return scenario_from_dict(make_scenario_doc(**overrides))


@pytest.fixture
def reference_scenario_path() -> Path:
    return Path(__file__).resolve().parent.parent / "scenarios" / "reference.json"


def load_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
