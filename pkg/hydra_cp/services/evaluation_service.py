"""
Hydra-CP - Evaluation Service

Hard-threshold detection AP. Predictions are marked TP/FP per frame by
greedy confidence-ordered matching, the marks are accumulated over frames
and the all-point precision/recall curve is built once per class and IoU
threshold (dataset-level AP). Total AP is the mean over classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from hydra_cp.core.geometry import iou_matrix
from hydra_cp.models.config import EvalConfig
from hydra_cp.models.geometry import (
    Detection,
    DetectionSet,
    GroundTruthObject,
    IouMode,
    ObjectClass,
    Pose2,
    wrap_angle,
)
from hydra_cp.models.results import (
    ApReport,
    ClassAp,
    PoseErrorStats,
    ThresholdCounts,
    threshold_key,
)


def _mark_predictions(
    pred: Sequence[Detection],
    truth: Sequence[GroundTruthObject],
    iou_thresh: float,
    mode: IouMode,
) -> Tuple[List[int], np.ndarray]:
    """
    Rank predictions by confidence and flag true positives.

    Each prediction takes the highest-IoU ground truth not yet claimed, if
    that IoU reaches the threshold. Returns (rank order, tp flags in that order).
    """
    order = sorted(range(len(pred)), key=lambda i: -pred[i].confidence)
    tp = np.zeros(len(order), dtype=bool)
    if not order or not truth:
        return order, tp

    ious = iou_matrix([pred[i] for i in order], [t.as_detection() for t in truth], mode)
    claimed = np.zeros(len(truth), dtype=bool)
    for rank in range(len(order)):
        candidates = np.where(claimed, -1.0, ious[rank])
        best = int(np.argmax(candidates))
        if candidates[best] >= iou_thresh and candidates[best] > 0.0:
            claimed[best] = True
            tp[rank] = True
    return order, tp


def _curve_area(tp: np.ndarray, n_gt: int) -> float:
    """All-point AP of already-ranked TP flags."""
    if n_gt == 0:
        return 1.0 if len(tp) == 0 else 0.0
    if len(tp) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(tp) + 1)
    recall = cum_tp / n_gt
    area = float(np.sum(np.diff(recall, prepend=0.0) * precision))
    return min(max(area, 0.0), 1.0)


def average_precision(
    pred: Sequence[Detection],
    truth: Sequence[GroundTruthObject],
    iou_thresh: float,
    mode: IouMode = IouMode.BEV_TIMES_HEIGHT,
) -> float:
    """
    AP of one class on one frame.

    No ground truth and no predictions scores 1.0; ground truth without
    predictions scores 0.0.
    """
    _, tp = _mark_predictions(pred, truth, iou_thresh, mode)
    return _curve_area(tp, len(truth))


@dataclass
class _Marks:
    """Accumulated (confidence, frame, rank, tp) records and the GT count."""

    records: List[Tuple[float, int, int, bool]] = field(default_factory=list)
    n_gt: int = 0


class ApAccumulator:
    """Dataset-level AP over any number of frames; merge order does not matter."""

    def __init__(self, cfg: EvalConfig):
        self.cfg = cfg
        self._marks: Dict[Tuple[ObjectClass, float], _Marks] = {
            (c, t): _Marks() for c in ObjectClass for t in cfg.iou_thresholds
        }

    def add_frame(
        self, frame: int, pred: DetectionSet, truth: Sequence[GroundTruthObject]
    ) -> None:
        for class_id in ObjectClass:
            class_pred = pred.of_class(class_id)
            class_truth = [t for t in truth if t.class_id == class_id]
            for thresh in self.cfg.iou_thresholds:
                order, tp = _mark_predictions(
                    class_pred, class_truth, thresh, self.cfg.iou_mode
                )
                marks = self._marks[(class_id, thresh)]
                marks.n_gt += len(class_truth)
                marks.records.extend(
                    (class_pred[i].confidence, frame, rank, bool(tp[rank]))
                    for rank, i in enumerate(order)
                )

    def merge(self, other: "ApAccumulator") -> "ApAccumulator":
        for key, marks in other._marks.items():
            mine = self._marks[key]
            mine.records.extend(marks.records)
            mine.n_gt += marks.n_gt
        return self

    def report(self) -> ApReport:
        report = ApReport()
        for class_id in ObjectClass:
            class_ap = ClassAp()
            for thresh in self.cfg.iou_thresholds:
                marks = self._marks[(class_id, thresh)]
                ranked = sorted(marks.records, key=lambda r: (-r[0], r[1], r[2]))
                tp = np.array([r[3] for r in ranked], dtype=bool)
                key = threshold_key(thresh)
                class_ap.ap[key] = _curve_area(tp, marks.n_gt)
                n_tp = int(tp.sum())
                class_ap.counts[key] = ThresholdCounts(
                    tp=n_tp, fp=len(tp) - n_tp, fn=marks.n_gt - n_tp
                )
            report.per_class[class_id.label] = class_ap

        for thresh in self.cfg.iou_thresholds:
            key = threshold_key(thresh)
            values = [report.per_class[c.label].ap[key] for c in ObjectClass]
            report.total[key] = float(np.mean(values))
        return report


def evaluate_frame(
    b_final: DetectionSet, truth: Sequence[GroundTruthObject], cfg: EvalConfig
) -> ApReport:
    """Per-class AP of a single frame at every configured threshold."""
    accumulator = ApAccumulator(cfg)
    accumulator.add_frame(0, b_final, truth)
    return accumulator.report()


def pose_error_stats(
    corrected: Mapping[str, Pose2], true_poses: Mapping[str, Pose2]
) -> PoseErrorStats:
    """Translation (meters) and wrapped yaw (radians) errors over matching agent ids."""
    if set(corrected) != set(true_poses):
        raise ValueError(
            f"agent ids differ: {sorted(set(corrected) ^ set(true_poses))}"
        )
    if not corrected:
        return PoseErrorStats()

    translation = [
        math.hypot(corrected[a].x - true_poses[a].x, corrected[a].y - true_poses[a].y)
        for a in sorted(corrected)
    ]
    yaw = [
        abs(wrap_angle(corrected[a].yaw - true_poses[a].yaw)) for a in sorted(corrected)
    ]
    return PoseErrorStats(
        mean_translation=float(np.mean(translation)),
        max_translation=float(np.max(translation)),
        mean_yaw=float(np.mean(yaw)),
        max_yaw=float(np.max(yaw)),
        samples=len(translation),
    )


def combine_pose_errors(stats: Sequence[PoseErrorStats]) -> PoseErrorStats:
    """Sample-weighted merge of per-frame pose error statistics."""
    total = sum(s.samples for s in stats)
    if total == 0:
        return PoseErrorStats()
    return PoseErrorStats(
        mean_translation=sum(s.mean_translation * s.samples for s in stats) / total,
        max_translation=max(s.max_translation for s in stats),
        mean_yaw=sum(s.mean_yaw * s.samples for s in stats) / total,
        max_yaw=max(s.max_yaw for s in stats),
        samples=total,
    )
