"""
Hydra-CP - Configuration Models

Pydantic models for everything a scenario file can set: the simulated world
and its agents, the domain classifier, the pose graph optimizer, late fusion
and evaluation. Range constraints are enforced by Field bounds so that a bad
value is reported with the dotted key that caused it.
"""

from __future__ import annotations

from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from hydra_cp.models.geometry import IouMode, ObjectClass


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", frozen=True)


# =============================================================================
# Domain classifier
# =============================================================================


class ClassifierConfig(StrictModel):
    """Soft-AP domain classifier parameters."""

    sigma_temp: float = Field(default=0.5, gt=0.0, description="Confidence temperature")
    tau: float = Field(default=0.2, ge=0.0, le=1.0, description="Partition threshold")
    match_min_iou: float = Field(default=0.01, ge=0.0, lt=1.0)
    iou_mode: IouMode = IouMode.BEV_TIMES_HEIGHT


# =============================================================================
# Pose graph optimization
# =============================================================================


class PgoConfig(StrictModel):
    """Anchor-guided pose graph optimization parameters."""

    gate_dist: float = Field(
        default=3.0, gt=0.0, description="Association gate, meters"
    )
    gate_yaw: float = Field(
        default=0.5236, gt=0.0, description="Association gate, radians"
    )
    gamma: float = Field(
        default=1.0, gt=0.0, description="Exponent on agent confidence"
    )
    beta: float = Field(
        default=1.0, gt=0.0, description="Exponent on anchor confidence"
    )
    max_iters: int = Field(
        default=50, ge=0, description="Inner-iteration budget per agent; 0 disables PGO"
    )
    grad_tol: float = Field(default=1e-8, gt=0.0)
    damping_init: float = Field(default=1e-4, gt=0.0)
    outer_rounds: int = Field(default=3, ge=1)

    @property
    def enabled(self) -> bool:
        return self.max_iters > 0


# =============================================================================
# Late fusion
# =============================================================================


class FusionConfig(StrictModel):
    """Late fusion (confidence-ranked NMS) parameters."""

    nms_iou: float = Field(default=0.3, gt=0.0, lt=1.0)
    score_floor: float = Field(default=0.1, ge=0.0, lt=1.0)
    per_class: bool = True
    iou_mode: IouMode = IouMode.BEV_TIMES_HEIGHT


# =============================================================================
# Evaluation
# =============================================================================


class EvalConfig(StrictModel):
    """Detection evaluation parameters."""

    iou_thresholds: Tuple[float, ...] = (0.3, 0.5, 0.7)
    iou_mode: IouMode = IouMode.BEV_TIMES_HEIGHT

    @model_validator(mode="after")
    def _check_thresholds(self) -> "EvalConfig":
        if not self.iou_thresholds:
            raise ValueError("iou_thresholds must not be empty")
        if any(not 0.0 < t <= 1.0 for t in self.iou_thresholds):
            raise ValueError("iou_thresholds must lie in (0, 1]")
        return self


# =============================================================================
# Simulated agents
# =============================================================================


class AgentKind(str, Enum):
    """Agent taxonomy: ego, homogeneous helper, latent / architecture heterogeneous."""

    EGO = "ego"
    HOMOGENEOUS = "homogeneous"
    HET_LATENT = "het_latent"
    HET_ARCH = "het_arch"

    @property
    def is_heterogeneous(self) -> bool:
        return self in (AgentKind.HET_LATENT, AgentKind.HET_ARCH)


class DetectModel(StrictModel):
    """Single-agent detector surrogate."""

    recall_prob: float = Field(default=0.85, ge=0.0, le=1.0)
    pos_sigma: float = Field(default=0.2, ge=0.0, description="Center noise, meters")
    yaw_sigma: float = Field(default=0.03, ge=0.0, description="Heading noise, radians")
    conf_shape: Tuple[float, float] = Field(
        default=(0.7, 0.12), description="(mean, spread) of true-positive confidences"
    )
    fp_conf_shape: Tuple[float, float] = Field(
        default=(0.3, 0.1), description="(mean, spread) of false-positive confidences"
    )
    fp_rate: float = Field(
        default=1.0, ge=0.0, description="Expected false positives per frame"
    )
    fov_range: float = Field(default=70.0, gt=0.0, description="Sensing radius, meters")

    @model_validator(mode="after")
    def _check_shapes(self) -> "DetectModel":
        for name in ("conf_shape", "fp_conf_shape"):
            mean, spread = getattr(self, name)
            if not 0.0 <= mean <= 1.0 or spread < 0.0:
                raise ValueError(f"{name} needs mean in [0, 1] and spread >= 0")
        return self


class FaithfulDecode(StrictModel):
    """Ego decode of compatible features: small perturbations of the sender's boxes."""

    mode: Literal["faithful"] = "faithful"
    jitter_sigma: float = Field(
        default=0.15, ge=0.0, description="Center jitter, meters"
    )
    yaw_jitter: float = Field(
        default=0.02, ge=0.0, description="Heading jitter, radians"
    )
    conf_jitter: float = Field(default=0.05, ge=0.0)


class DegradedDecode(StrictModel):
    """Ego decode of incompatible features: systematically corrupted boxes."""

    mode: Literal["degraded"] = "degraded"
    drop_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    offset_sigma: float = Field(
        default=3.0, ge=0.0, description="Center offset, meters"
    )
    conf_noise: float = Field(default=0.3, ge=0.0)
    hallucination_rate: float = Field(
        default=2.0, ge=0.0, description="Phantom boxes per frame"
    )


DecodeModel = Annotated[
    Union[FaithfulDecode, DegradedDecode], Field(discriminator="mode")
]

# Architecture mismatch decodes worse than a latent domain shift
ARCH_DEGRADED = DegradedDecode(
    drop_prob=0.8, offset_sigma=5.0, conf_noise=0.4, hallucination_rate=4.0
)


def default_decode_for(kind: AgentKind) -> Union[FaithfulDecode, DegradedDecode]:
    if kind is AgentKind.HET_LATENT:
        return DegradedDecode()
    if kind is AgentKind.HET_ARCH:
        return ARCH_DEGRADED
    return FaithfulDecode()


def default_detect_for(kind: AgentKind) -> DetectModel:
    if kind is AgentKind.EGO:
        return DetectModel(conf_shape=(0.85, 0.08), fp_rate=0.5)
    return DetectModel()


class AgentSpec(StrictModel):
    """One simulated agent."""

    agent_id: str = Field(..., min_length=1)
    kind: AgentKind
    detection_model: DetectModel = Field(default=None)  # type: ignore[assignment]
    decode_model: DecodeModel = Field(default=None)  # type: ignore[assignment]
    pose: Optional[Tuple[float, float, float]] = Field(
        default=None,
        description="Fixed true pose (x, y, yaw); sampled per frame when unset",
    )

    @model_validator(mode="before")
    @classmethod
    def _fill_kind_defaults(cls, data: object) -> object:
        if isinstance(data, dict) and "kind" in data:
            try:
                kind = AgentKind(data["kind"])
            except ValueError:
                return data
            data = dict(data)
            if data.get("detection_model") is None:
                data["detection_model"] = default_detect_for(kind).model_dump()
            if data.get("decode_model") is None:
                data["decode_model"] = default_decode_for(kind).model_dump()
        return data


# =============================================================================
# Scenario
# =============================================================================


def default_lineup() -> List[AgentSpec]:
    """Ego, one homogeneous helper and two latent-heterogeneous agents."""
    return [
        AgentSpec(agent_id="ego", kind=AgentKind.EGO, pose=(0.0, 0.0, 0.0)),
        AgentSpec(agent_id="hom_1", kind=AgentKind.HOMOGENEOUS),
        AgentSpec(agent_id="het_1", kind=AgentKind.HET_LATENT),
        AgentSpec(agent_id="het_2", kind=AgentKind.HET_LATENT),
    ]


class MapExtent(StrictModel):
    """Half extents of the simulated area around the ego, meters."""

    x: float = Field(default=140.8, gt=0.0)
    y: float = Field(default=40.0, gt=0.0)


class ScenarioConfig(StrictModel):
    """Deterministic scenario description."""

    name: str = "scenario"
    seed: int = Field(default=0, ge=0, lt=2**64)
    n_frames: int = Field(default=20, ge=0)
    map_extent: MapExtent = MapExtent()
    object_counts: Dict[ObjectClass, int] = Field(
        default_factory=lambda: {
            ObjectClass.VEHICLE: 24,
            ObjectClass.PEDESTRIAN: 10,
            ObjectClass.TRUCK: 6,
        }
    )
    agent_specs: List[AgentSpec] = Field(default_factory=lambda: default_lineup())
    agent_spread: Tuple[float, float] = Field(
        default=(80.0, 30.0),
        description="Auxiliary agents spawn within +/- this box of the ego",
    )
    pose_noise_sigma: float = Field(
        default=0.0, ge=0.0, description="Position noise, meters"
    )
    heading_noise_sigma: float = Field(
        default=0.4, ge=0.0, description="Heading noise, degrees"
    )

    @model_validator(mode="before")
    @classmethod
    def _parse_class_names(cls, data: object) -> object:
        if isinstance(data, dict) and isinstance(data.get("object_counts"), dict):
            counts = {}
            for key, value in data["object_counts"].items():
                if isinstance(key, str) and not key.isdigit():
                    key = ObjectClass[key.upper()]
                counts[ObjectClass(int(key))] = value
            data = {**data, "object_counts": counts}
        return data

    @field_serializer("object_counts")
    def _dump_class_names(self, counts: Dict[ObjectClass, int]) -> Dict[str, int]:
        return {ObjectClass(k).label: v for k, v in counts.items()}

    @model_validator(mode="after")
    def _check_agents(self) -> "ScenarioConfig":
        egos = [a for a in self.agent_specs if a.kind is AgentKind.EGO]
        if len(egos) != 1:
            raise ValueError(f"exactly one ego agent required, found {len(egos)}")
        ids = [a.agent_id for a in self.agent_specs]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        extent = self.map_extent
        for spec in self.agent_specs:
            if spec.pose is not None and (
                abs(spec.pose[0]) > extent.x or abs(spec.pose[1]) > extent.y
            ):
                raise ValueError(
                    f"pose of '{spec.agent_id}' lies outside the map extent "
                    f"(+/-{extent.x}, +/-{extent.y})"
                )
        if any(count < 0 for count in self.object_counts.values()):
            raise ValueError("object counts must be non-negative")
        return self

    @property
    def ego(self) -> AgentSpec:
        return next(a for a in self.agent_specs if a.kind is AgentKind.EGO)

    @property
    def auxiliaries(self) -> List[AgentSpec]:
        return [a for a in self.agent_specs if a.kind is not AgentKind.EGO]


class ExperimentConfig(StrictModel):
    """Complete scenario file."""

    scenario: ScenarioConfig = ScenarioConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    pgo: PgoConfig = PgoConfig()
    fusion: FusionConfig = FusionConfig()
    eval: EvalConfig = EvalConfig()


# =============================================================================
# Methods
# =============================================================================


class RoutingPolicy(str, Enum):
    """How auxiliary agents are assigned to fusion branches."""

    CLASSIFIER = "classifier"
    ALL_INTERMEDIATE = "all_intermediate"
    ALL_LATE = "all_late"
    EGO_ONLY = "ego_only"


class PgoMode(str, Enum):
    """Which pose graph is built for correction."""

    OFF = "off"
    STAGE1_ANCHORED = "stage1_anchored"
    EGO_ANCHORED_ALL = "ego_anchored_all"


class FusionMethod(str, Enum):
    """Methods compared by the runner."""

    NO_FUSION = "no_fusion"
    LATE_ONLY = "late_only"
    INTERMEDIATE_ONLY = "intermediate_only"
    HYDRA = "hydra"
    HYDRA_NO_CLASSIFIER = "hydra_no_classifier"
    HYDRA_NO_PGO = "hydra_no_pgo"
    HYDRA_ALL_VARIABLE_PGO = "hydra_all_variable_pgo"

    @classmethod
    def parse(cls, name: str) -> "FusionMethod":
        """Accept snake_case, kebab-case or CamelCase names."""
        key = name.replace("-", "").replace("_", "").lower()
        for method in cls:
            if method.value.replace("_", "") == key:
                return method
        raise ValueError(f"unknown method '{name}'")


class PipelineOptions(StrictModel):
    """Routing and pose-correction switches of one method."""

    routing: RoutingPolicy = RoutingPolicy.CLASSIFIER
    pgo_mode: PgoMode = PgoMode.STAGE1_ANCHORED


METHOD_PRESETS: Dict[FusionMethod, PipelineOptions] = {
    FusionMethod.NO_FUSION: PipelineOptions(
        routing=RoutingPolicy.EGO_ONLY, pgo_mode=PgoMode.OFF
    ),
    FusionMethod.LATE_ONLY: PipelineOptions(
        routing=RoutingPolicy.ALL_LATE, pgo_mode=PgoMode.OFF
    ),
    FusionMethod.INTERMEDIATE_ONLY: PipelineOptions(
        routing=RoutingPolicy.ALL_INTERMEDIATE, pgo_mode=PgoMode.OFF
    ),
    FusionMethod.HYDRA: PipelineOptions(),
    FusionMethod.HYDRA_NO_CLASSIFIER: PipelineOptions(
        routing=RoutingPolicy.ALL_INTERMEDIATE, pgo_mode=PgoMode.EGO_ANCHORED_ALL
    ),
    FusionMethod.HYDRA_NO_PGO: PipelineOptions(pgo_mode=PgoMode.OFF),
    FusionMethod.HYDRA_ALL_VARIABLE_PGO: PipelineOptions(
        pgo_mode=PgoMode.EGO_ANCHORED_ALL
    ),
}
