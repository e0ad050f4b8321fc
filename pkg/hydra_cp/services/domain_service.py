"""
Hydra-CP - Domain Classification Service

Scores how well the ego decodes an auxiliary agent's features. The agent's
own detections serve as pseudo-ground truth for the ego's decode of the
agent's features; the area under a soft precision/recall curve built from
per-match quality decides whether the agent joins intermediate fusion or is
left to late fusion.
"""

from __future__ import annotations

import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from loguru import logger

from hydra_cp.core.exceptions import FrameTagError
from hydra_cp.core.geometry import iou_matrix
from hydra_cp.models.config import ClassifierConfig
from hydra_cp.models.geometry import DetectionSet, FrameTag
from hydra_cp.models.results import Branch, DomainVerdict, QualityScoredPrediction
from hydra_cp.services.assignment_service import match_by_iou


def quality_score(c_gt: float, c_pred: float, iou: float, sigma_temp: float) -> float:
    """Geometric mean of the confidence agreement exp(-|dc|/sigma) and IoU."""
    if sigma_temp <= 0.0:
        raise ValueError("sigma_temp must be positive")
    s_conf = math.exp(-abs(c_gt - c_pred) / sigma_temp)
    return math.sqrt(s_conf * min(max(iou, 0.0), 1.0))


def soft_ap(scored: Sequence[QualityScoredPrediction], n_gt: int) -> float:
    """
    Area under the soft precision/recall curve.

    Predictions are ranked by confidence (ties by index); at rank m the soft
    precision is the mean quality so far and soft recall the quality sum over
    n_gt. The area is integrated with the rectangle rule.
    """
    if n_gt <= 0 or not scored:
        return 0.0

    ranked = sorted(scored, key=lambda s: (-s.confidence, s.pred_index))
    cumulative = np.cumsum([s.quality for s in ranked])
    ranks = np.arange(1, len(ranked) + 1)
    precision = cumulative / ranks
    recall = cumulative / n_gt
    delta_recall = np.diff(recall, prepend=0.0)
    assert np.all(delta_recall >= 0.0), "soft recall must be non-decreasing"

    area = float(np.sum(delta_recall * precision))
    return min(max(area, 0.0), 1.0)


class DomainClassifier:
    """
    Per-agent Soft-AP scoring and threshold partition.

    Both detection sets are expressed in the sending agent's local frame, so
    the verdict never depends on the (possibly noisy) transmitted pose.
    """

    def __init__(self, cfg: ClassifierConfig):
        self.cfg = cfg

    def score_predictions(
        self, b_a: DetectionSet, b_pred: DetectionSet
    ) -> List[QualityScoredPrediction]:
        matches = match_by_iou(b_a, b_pred, self.cfg.match_min_iou, self.cfg.iou_mode)
        quality = {}
        if matches.pairs:
            ious = iou_matrix(b_a.detections, b_pred.detections, self.cfg.iou_mode)
            for i, k in matches.pairs:
                quality[k] = quality_score(
                    b_a[i].confidence,
                    b_pred[k].confidence,
                    ious[i, k],
                    self.cfg.sigma_temp,
                )
        return [
            QualityScoredPrediction(k, d.confidence, quality.get(k, 0.0))
            for k, d in enumerate(b_pred)
        ]

    def classify_agent(
        self, agent_id: str, b_a: DetectionSet, b_pred: DetectionSet
    ) -> DomainVerdict:
        for name, ds in (("B_A", b_a), ("B_pred", b_pred)):
            if ds.frame is not FrameTag.AGENT_LOCAL:
                raise FrameTagError(
                    f"Classifier input {name} of '{agent_id}' must be agent-local",
                    details={"agent_id": agent_id, "frame": ds.frame.value},
                )

        s_domain = soft_ap(self.score_predictions(b_a, b_pred), len(b_a))
        branch = Branch.INTERMEDIATE if s_domain >= self.cfg.tau else Branch.LATE
        logger.debug(f"🔍 {agent_id}: S_domain={s_domain:.4f} -> {branch.value}")
        return DomainVerdict(agent_id=agent_id, s_domain=s_domain, branch=branch)


def partition(verdicts: Iterable[DomainVerdict]) -> Tuple[List[str], List[str]]:
    """Split verdicts into (intermediate ids, late ids), keeping input order."""
    intermediate: List[str] = []
    late: List[str] = []
    for verdict in verdicts:
        (intermediate if verdict.branch is Branch.INTERMEDIATE else late).append(
            verdict.agent_id
        )
    return intermediate, late
