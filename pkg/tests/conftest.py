"""
Hydra-CP - Shared Test Fixtures

Box factories, small scenarios and scenario files used across the suites.
"""

from pathlib import Path
from typing import Callable, Optional, Tuple

import pytest
import yaml

from hydra_cp.models.config import ExperimentConfig
from hydra_cp.models.geometry import CLASS_SIZES, Detection, ObjectClass

BoxFactory = Callable[..., Detection]

SMALL_SCENARIO = {
    "scenario": {
        "name": "small",
        "seed": 3,
        "n_frames": 2,
        "object_counts": {"vehicle": 8, "pedestrian": 3, "truck": 2},
        "agent_specs": [
            {"agent_id": "ego", "kind": "ego", "pose": [0.0, 0.0, 0.0]},
            {"agent_id": "hom_1", "kind": "homogeneous"},
            {"agent_id": "het_1", "kind": "het_latent"},
        ],
    },
}


@pytest.fixture
def make_box() -> BoxFactory:
    """Factory for boxes with class-nominal sizes unless a size is given."""

    def factory(
        x: float,
        y: float,
        yaw: float = 0.0,
        class_id: ObjectClass = ObjectClass.VEHICLE,
        confidence: float = 0.9,
        size: Optional[Tuple[float, float, float]] = None,
        z: Optional[float] = None,
        source: str = "",
    ) -> Detection:
        size = size or CLASS_SIZES[class_id]
        return Detection(
            center=(x, y, size[2] / 2.0 if z is None else z),
            size=size,
            yaw=yaw,
            class_id=class_id,
            confidence=confidence,
            source=source,
        )

    return factory


@pytest.fixture
def small_config() -> ExperimentConfig:
    """Two frames, few objects: ego, one homogeneous and one latent agent."""
    return ExperimentConfig.model_validate(SMALL_SCENARIO)


@pytest.fixture
def small_scenario_file(tmp_path: Path) -> Path:
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL_SCENARIO, sort_keys=False), encoding="utf-8")
    return path
