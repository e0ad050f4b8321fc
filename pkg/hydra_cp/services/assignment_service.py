"""
Hydra-CP - Assignment Service

Optimal one-to-one matching (Hungarian algorithm) between detection sets.
Used by the domain classifier (maximize IoU) and by pose graph edge
construction (minimize gated center distance).
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from hydra_cp.core.exceptions import FrameTagError
from hydra_cp.core.geometry import iou_matrix
from hydra_cp.models.geometry import DetectionSet, IouMode
from hydra_cp.models.results import MatchSet

Assignment = List[Tuple[int, int]]

_TIE_TOLERANCE = 1e-9


def _solve(
    work: np.ndarray, rows: List[int], cols: List[int]
) -> Tuple[float, Assignment]:
    """Minimum-cost assignment on a row/column subset, in original indices."""
    if not rows or not cols:
        return 0.0, []
    sub = work[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub)
    return float(sub[r, c].sum()), [(rows[i], cols[j]) for i, j in zip(r, c)]


def _has_alternative(work: np.ndarray, pairs: Assignment, tol: float) -> bool:
    """True when another assignment reaches the same optimal cost."""
    best = float(sum(work[r, c] for r, c in pairs))
    big = (np.abs(work).max() + 1.0) * (len(pairs) + 1)
    for r, c in pairs:
        blocked = work.copy()
        blocked[r, c] = big
        rows, cols = linear_sum_assignment(blocked)
        if blocked[rows, cols].sum() <= best + tol:
            return True
    return False


def _lexicographic_optimum(
    work: np.ndarray, pairs: Assignment, tol: float
) -> Assignment:
    """
    Among optimal assignments, the one with the smallest sorted (row, col) list.

    Rows are fixed in order; each takes the lowest column (or stays
    unassigned, which sorts after any column) that still completes to an
    optimal assignment of the same size.
    """
    n, m = work.shape
    size = len(pairs)
    best = float(sum(work[r, c] for r, c in pairs))
    current = dict(pairs)
    fixed: Assignment = []
    fixed_cost = 0.0
    used: set[int] = set()

    for r in range(n):
        rest = list(range(r + 1, n))
        free = [c for c in range(m) if c not in used]
        options: List[Optional[int]] = [*free, None]
        for option in options:
            if option == current.get(r, None):
                break
            cols = [c for c in free if c != option]
            head = 0 if option is None else 1
            if len(fixed) + head + min(len(rest), len(cols)) != size:
                continue
            step = 0.0 if option is None else float(work[r, option])
            value, tail = _solve(work, rest, cols)
            if fixed_cost + step + value <= best + tol:
                current = dict(fixed)
                if option is not None:
                    current[r] = option
                current.update(tail)
                break
        choice = current.get(r)
        if choice is not None:
            fixed.append((r, choice))
            fixed_cost += float(work[r, choice])
            used.add(choice)
    return fixed


def hungarian(cost: np.ndarray, maximize: bool = False) -> Assignment:
    """
    Optimal assignment on a dense, possibly rectangular cost matrix.

    Returns min(rows, cols) (row, col) pairs sorted by row. Among equally
    good assignments the lexicographically smallest pair list wins. An empty
    matrix yields an empty assignment.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    work = -cost if maximize else cost
    rows, cols = linear_sum_assignment(work)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols)]
    tol = _TIE_TOLERANCE * max(1.0, float(np.abs(work[rows, cols]).sum()))
    if work.size > 1 and _has_alternative(work, pairs, tol):
        pairs = _lexicographic_optimum(work, pairs, tol)
    return pairs


def gated_assignment(cost: np.ndarray, feasible: np.ndarray) -> Assignment:
    """
    Minimum-cost assignment where only feasible entries may be paired.

    Infeasible entries get a cost larger than any feasible assignment could
    total, so the solver only uses them when nothing else fits; such pairs
    are then discarded.
    """
    cost = np.asarray(cost, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    if cost.size == 0 or not feasible.any():
        return []
    big = (np.abs(cost[feasible]).max() + 1.0) * (min(cost.shape) + 1)
    padded = np.where(feasible, cost, big)
    return [(r, c) for r, c in hungarian(padded) if feasible[r, c]]


def match_by_iou(
    gt: DetectionSet,
    pred: DetectionSet,
    min_iou: float,
    mode: IouMode = IouMode.BEV_TIMES_HEIGHT,
) -> MatchSet:
    """
    Hungarian matching of predictions to pseudo-ground truth on IoU.

    Boxes of different classes are never paired, and pairs below min_iou
    (or with no overlap at all) are returned as unmatched on both sides.
    """
    if gt.frame != pred.frame:
        raise FrameTagError(
            f"match_by_iou needs one frame, got {gt.frame.value} and {pred.frame.value}"
        )
    if not 0.0 <= min_iou < 1.0:
        raise ValueError(f"min_iou must lie in [0, 1), got {min_iou}")

    ious = iou_matrix(gt.detections, pred.detections, mode)
    if ious.size:
        gt_cls = np.array([int(d.class_id) for d in gt])
        pred_cls = np.array([int(d.class_id) for d in pred])
        ious[gt_cls[:, None] != pred_cls[None, :]] = 0.0

    pairs = [
        (i, k)
        for i, k in hungarian(ious, maximize=True)
        if ious[i, k] > 0.0 and ious[i, k] >= min_iou
    ]
    matched_gt = {i for i, _ in pairs}
    matched_pred = {k for _, k in pairs}
    return MatchSet(
        pairs=tuple(pairs),
        unmatched_gt=tuple(i for i in range(len(gt)) if i not in matched_gt),
        unmatched_pred=tuple(k for k in range(len(pred)) if k not in matched_pred),
    )
