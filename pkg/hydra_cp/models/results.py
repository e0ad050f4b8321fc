"""
Hydra-CP - Result Models

Intermediate results passed between services (matches, domain verdicts, pose
graph pieces) are plain dataclasses. Report objects that end up on disk are
pydantic models so they serialize deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from hydra_cp.models.geometry import ObjectClass, Pose2


@dataclass(frozen=True)
class MatchSet:
    """One-to-one pairing of a reference set (gt side) with a prediction set."""

    pairs: Tuple[Tuple[int, int], ...] = ()
    unmatched_gt: Tuple[int, ...] = ()
    unmatched_pred: Tuple[int, ...] = ()


@dataclass(frozen=True)
class QualityScoredPrediction:
    """A prediction's confidence and its match quality (0 when unmatched)."""

    pred_index: int
    confidence: float
    quality: float


class Branch(str, Enum):
    """Fusion branch an auxiliary agent is routed to."""

    INTERMEDIATE = "intermediate"
    LATE = "late"


@dataclass(frozen=True)
class DomainVerdict:
    agent_id: str
    s_domain: float
    branch: Branch


@dataclass(frozen=True)
class AnchorNode:
    """Fixed landmark taken from a stage-1 box."""

    pose: Pose2
    confidence: float
    class_id: ObjectClass


@dataclass(frozen=True)
class PoseEdge:
    """Observation of one anchor by one variable agent pose."""

    agent_id: str
    anchor_index: int
    observation: Pose2
    c_aux: float
    weight: float


@dataclass
class PgoResult:
    """Outcome of a pose graph optimization."""

    corrected: Dict[str, Pose2] = field(default_factory=dict)
    iterations_used: int = 0
    final_cost: float = 0.0
    initial_cost: float = 0.0
    edges_per_agent: Dict[str, int] = field(default_factory=dict)
    agent_iterations: Dict[str, int] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)

    @classmethod
    def passthrough(cls, initial: Dict[str, Pose2]) -> "PgoResult":
        """Result of a disabled optimizer: every pose returned as given."""
        return cls(corrected=dict(initial), edges_per_agent={a: 0 for a in initial})


# =============================================================================
# Reports
# =============================================================================


class ThresholdCounts(BaseModel):
    tp: int = 0
    fp: int = 0
    fn: int = 0


class ClassAp(BaseModel):
    """AP of one class at every evaluated IoU threshold."""

    ap: Dict[str, float] = Field(default_factory=dict, description="threshold -> AP")
    counts: Dict[str, ThresholdCounts] = Field(default_factory=dict)


class ApReport(BaseModel):
    """Per-class and class-mean AP; threshold keys are formatted like '0.5'."""

    per_class: Dict[str, ClassAp] = Field(default_factory=dict)
    total: Dict[str, float] = Field(default_factory=dict)

    def ap(self, class_label: str, threshold: float) -> float:
        return self.per_class[class_label].ap[threshold_key(threshold)]

    def total_ap(self, threshold: float) -> float:
        return self.total[threshold_key(threshold)]


class PoseErrorStats(BaseModel):
    mean_translation: float = 0.0
    max_translation: float = 0.0
    mean_yaw: float = 0.0
    max_yaw: float = 0.0
    samples: int = 0


class ScoreStats(BaseModel):
    """Distribution of domain scores for one agent kind."""

    kind: str
    noise: str
    mean: float
    max: float
    min: float
    std: float
    samples: int


class RunReport(BaseModel):
    """Everything a single method run writes to report.json."""

    scenario: str
    method: str
    seed: int
    n_frames: int
    pose_noise_sigma: float
    pgo_enabled: bool
    ap: ApReport
    pose_error_before: Optional[PoseErrorStats] = None
    pose_error_after: Optional[PoseErrorStats] = None
    routing: Dict[str, int] = Field(
        default_factory=dict, description="Times each branch was chosen across frames"
    )
    pgo_iterations_max: int = 0


def threshold_key(threshold: float) -> str:
    """Stable string key for an IoU threshold."""
    return f"{threshold:g}"
