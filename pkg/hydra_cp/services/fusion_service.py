"""
Hydra-CP - Hybrid Fusion Service

Per-frame orchestration: classify auxiliary agents, obtain stage-1 boxes
from intermediate fusion of the compatible agents, correct the poses of the
late agents against stage-1 anchors, pool everything in the ego-global frame
and run late fusion (confidence-ranked NMS).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
from loguru import logger

from hydra_cp.core.exceptions import FrameTagError, RoutingError
from hydra_cp.core.geometry import iou_matrix, transform_detection
from hydra_cp.models.config import (
    ClassifierConfig,
    FusionConfig,
    PgoConfig,
    PgoMode,
    PipelineOptions,
    RoutingPolicy,
)
from hydra_cp.models.geometry import DetectionSet, FrameTag, Pose2
from hydra_cp.models.results import DomainVerdict, PgoResult
from hydra_cp.services.domain_service import DomainClassifier, partition
from hydra_cp.services.pgo_service import LateAgent, PoseGraphOptimizer

STAGE1_SOURCE = "stage1"


def stage1_source(agent_id: Optional[str] = None) -> str:
    """Provenance tag of a stage-1 box, agent-specific when one agent caused it."""
    return STAGE1_SOURCE if agent_id is None else f"{STAGE1_SOURCE}/{agent_id}"


@dataclass(frozen=True)
class AgentFrame:
    """
    One agent's payload for one timestep.

    detections (B_A) and decoded (the ego's decode of the agent's features,
    B_pred) are agent-local; pose is the transmitted, possibly noisy, pose.
    """

    agent_id: str
    pose: Pose2
    detections: DetectionSet
    decoded: DetectionSet


class Stage1Oracle(Protocol):
    """Intermediate fusion over the ego plus the given agents, ego-global."""

    def __call__(
        self, intermediate_ids: Sequence[str], poses: Mapping[str, Pose2]
    ) -> DetectionSet: ...


@dataclass
class PipelineOutput:
    """Final boxes of one frame plus routing and pose-correction diagnostics."""

    final: DetectionSet
    stage1: DetectionSet
    verdicts: List[DomainVerdict] = field(default_factory=list)
    intermediate_ids: List[str] = field(default_factory=list)
    late_ids: List[str] = field(default_factory=list)
    pgo: PgoResult = field(default_factory=PgoResult)
    poses_used: Dict[str, Pose2] = field(default_factory=dict)


def pool_to_global(
    stage1: DetectionSet, late_agents: Sequence[Tuple[str, Pose2, DetectionSet]]
) -> DetectionSet:
    """Stage-1 boxes followed by every late agent's boxes, all ego-global."""
    if stage1.frame is not FrameTag.EGO_GLOBAL:
        raise FrameTagError("Stage-1 boxes must be ego-global before pooling")

    pooled = list(stage1)
    for agent_id, pose, detections in late_agents:
        if detections.frame is not FrameTag.AGENT_LOCAL:
            raise FrameTagError(f"Boxes of late agent '{agent_id}' must be agent-local")
        pooled.extend(
            transform_detection(pose, d).with_source(agent_id) for d in detections
        )
    return DetectionSet.of(FrameTag.EGO_GLOBAL, pooled)


def nms(pool: DetectionSet, cfg: FusionConfig) -> DetectionSet:
    """
    Greedy confidence-ranked NMS; kept boxes are returned unmodified.

    Boxes below score_floor are dropped first. With per_class set, a box can
    only be suppressed by a higher-ranked box of its own class.
    """
    if pool.frame is not FrameTag.EGO_GLOBAL:
        raise FrameTagError(f"NMS input must be ego-global, got {pool.frame.value}")

    candidates = [d for d in pool if d.confidence >= cfg.score_floor]
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].confidence)
    ranked = [candidates[i] for i in order]
    if not ranked:
        return DetectionSet.empty(FrameTag.EGO_GLOBAL)

    overlaps = iou_matrix(ranked, ranked, cfg.iou_mode) >= cfg.nms_iou
    if cfg.per_class:
        classes = np.array([int(d.class_id) for d in ranked])
        overlaps &= classes[:, None] == classes[None, :]

    suppressed = np.zeros(len(ranked), dtype=bool)
    kept = []
    for i, det in enumerate(ranked):
        if suppressed[i]:
            continue
        kept.append(det)
        suppressed[i + 1 :] |= overlaps[i, i + 1 :]
    return DetectionSet.of(FrameTag.EGO_GLOBAL, kept)


class HybridFusionService:
    """
    Hybrid intermediate/late fusion for one ego.

    The routing policy decides which auxiliaries feed stage 1 and which are
    late-fused; the PGO mode decides which anchors and which variable poses
    the pose graph gets.
    """

    def __init__(
        self,
        classifier_cfg: ClassifierConfig,
        pgo_cfg: PgoConfig,
        fusion_cfg: FusionConfig,
        options: Optional[PipelineOptions] = None,
    ):
        self.classifier = DomainClassifier(classifier_cfg)
        self.optimizer = PoseGraphOptimizer(pgo_cfg)
        self.pgo_cfg = pgo_cfg
        self.fusion_cfg = fusion_cfg
        self.options = options or PipelineOptions()

    def route(
        self, aux_frames: Sequence[AgentFrame]
    ) -> Tuple[List[DomainVerdict], List[str], List[str]]:
        """Verdicts (classifier routing only) and the (intermediate, late) split."""
        ids = [f.agent_id for f in aux_frames]
        policy = self.options.routing
        if policy is RoutingPolicy.CLASSIFIER:
            verdicts = [
                self.classifier.classify_agent(f.agent_id, f.detections, f.decoded)
                for f in aux_frames
            ]
            intermediate, late = partition(verdicts)
            return verdicts, intermediate, late
        if policy is RoutingPolicy.ALL_INTERMEDIATE:
            return [], ids, []
        if policy is RoutingPolicy.ALL_LATE:
            return [], [], ids
        return [], [], []

    def _variable_agents(
        self,
        aux_frames: Sequence[AgentFrame],
        intermediate: Sequence[str],
        late: Sequence[str],
    ) -> List[LateAgent]:
        if self.options.pgo_mode is PgoMode.STAGE1_ANCHORED:
            if set(intermediate) & set(late):
                raise RoutingError(
                    "An intermediate-branch agent entered the pose graph"
                )
            chosen = set(late)
        else:
            chosen = set(late) | set(intermediate)
        return [
            LateAgent(f.agent_id, f.pose, f.detections)
            for f in aux_frames
            if f.agent_id in chosen
        ]

    def hydra_pipeline(
        self,
        ego_frame: AgentFrame,
        aux_frames: Sequence[AgentFrame],
        stage1_oracle: Stage1Oracle,
    ) -> PipelineOutput:
        """
        classify -> stage 1 -> pose correction -> pool -> NMS.

        With ego-anchored PGO the anchors are the ego's own boxes, every
        auxiliary pose is variable and stage 1 is formed after correction.

        Raises:
            RoutingError: If a late agent's data reaches stage 1
            FrameTagError: If any set arrives in the wrong frame
        """
        verdicts, intermediate, late = self.route(aux_frames)
        poses = {f.agent_id: f.pose for f in [ego_frame, *aux_frames]}
        mode = self.options.pgo_mode
        pgo_on = mode is not PgoMode.OFF and self.pgo_cfg.enabled

        if pgo_on and mode is PgoMode.EGO_ANCHORED_ALL:
            anchors = stage1_oracle([], poses)
            pgo_result = self.optimizer.run(
                anchors, self._variable_agents(aux_frames, intermediate, late)
            )
            poses = {**poses, **pgo_result.corrected}
            stage1 = stage1_oracle(intermediate, poses)
        else:
            stage1 = stage1_oracle(intermediate, poses)
            if pgo_on:
                pgo_result = self.optimizer.run(
                    stage1, self._variable_agents(aux_frames, intermediate, late)
                )
                poses = {**poses, **pgo_result.corrected}
            else:
                pgo_result = PgoResult.passthrough({a: poses[a] for a in late})
        self._check_stage1_provenance(stage1, late)

        by_id = {f.agent_id: f for f in aux_frames}
        pooled = pool_to_global(
            stage1, [(a, poses[a], by_id[a].detections) for a in late]
        )
        final = nms(pooled, self.fusion_cfg)
        logger.debug(
            f"🧩 {len(intermediate)} intermediate / {len(late)} late agents, "
            f"{len(stage1)} stage-1 boxes -> {len(final)} final"
        )
        return PipelineOutput(
            final=final,
            stage1=stage1,
            verdicts=verdicts,
            intermediate_ids=list(intermediate),
            late_ids=list(late),
            pgo=pgo_result,
            poses_used=poses,
        )

    @staticmethod
    def _check_stage1_provenance(stage1: DetectionSet, late: Sequence[str]) -> None:
        if stage1.frame is not FrameTag.EGO_GLOBAL:
            raise FrameTagError("Stage-1 oracle must return ego-global boxes")
        forbidden = set(late) | {stage1_source(a) for a in late}
        leaked = stage1.sources() & forbidden
        if leaked:
            raise RoutingError(
                f"Late-branch data reached stage 1: {sorted(leaked)}",
                details={"sources": sorted(leaked)},
            )
