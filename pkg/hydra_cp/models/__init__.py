# Domain, configuration and report models

from hydra_cp.models.config import (
    METHOD_PRESETS,
    AgentKind,
    AgentSpec,
    ClassifierConfig,
    DegradedDecode,
    DetectModel,
    EvalConfig,
    ExperimentConfig,
    FaithfulDecode,
    FusionConfig,
    FusionMethod,
    PgoConfig,
    PgoMode,
    PipelineOptions,
    RoutingPolicy,
    ScenarioConfig,
)
from hydra_cp.models.geometry import (
    CLASS_SIZES,
    Detection,
    DetectionSet,
    FrameTag,
    GroundTruthObject,
    IouMode,
    ObjectClass,
    Pose2,
)
from hydra_cp.models.results import (
    AnchorNode,
    ApReport,
    Branch,
    DomainVerdict,
    MatchSet,
    PgoResult,
    PoseEdge,
    PoseErrorStats,
    QualityScoredPrediction,
    RunReport,
    ScoreStats,
)

__all__ = [
    "METHOD_PRESETS",
    "AgentKind",
    "AgentSpec",
    "ClassifierConfig",
    "DegradedDecode",
    "DetectModel",
    "EvalConfig",
    "ExperimentConfig",
    "FaithfulDecode",
    "FusionConfig",
    "FusionMethod",
    "PgoConfig",
    "PgoMode",
    "PipelineOptions",
    "RoutingPolicy",
    "ScenarioConfig",
    "CLASS_SIZES",
    "Detection",
    "DetectionSet",
    "FrameTag",
    "IouMode",
    "GroundTruthObject",
    "ObjectClass",
    "Pose2",
    "AnchorNode",
    "ApReport",
    "Branch",
    "DomainVerdict",
    "MatchSet",
    "PgoResult",
    "PoseEdge",
    "PoseErrorStats",
    "QualityScoredPrediction",
    "RunReport",
    "ScoreStats",
]
