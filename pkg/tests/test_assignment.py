"""
Hydra-CP - Assignment Tests

Hungarian solver against exhaustive permutation search, gated assignment and
IoU matching of detection sets.
"""

import itertools

import numpy as np
import pytest

from hydra_cp.core.exceptions import FrameTagError
from hydra_cp.models.geometry import DetectionSet, FrameTag, ObjectClass
from hydra_cp.services.assignment_service import (
    gated_assignment,
    hungarian,
    match_by_iou,
)


def brute_force(cost: np.ndarray, maximize: bool = False) -> float:
    """Optimal total over every injective mapping of the shorter side."""
    matrix = cost if cost.shape[0] <= cost.shape[1] else cost.T
    rows, cols = matrix.shape
    totals = [
        sum(matrix[r, c] for r, c in zip(range(rows), perm))
        for perm in itertools.permutations(range(cols), rows)
    ]
    return max(totals) if maximize else min(totals)


def total(cost: np.ndarray, pairs) -> float:
    return sum(cost[r, c] for r, c in pairs)


def lexicographic_optimum(cost: np.ndarray, maximize: bool = False):
    """Smallest sorted pair list among all optimal full-size assignments."""
    rows, cols = cost.shape
    if rows <= cols:
        candidates = [
            list(enumerate(perm)) for perm in itertools.permutations(range(cols), rows)
        ]
    else:
        candidates = [
            sorted((r, c) for c, r in enumerate(perm))
            for perm in itertools.permutations(range(rows), cols)
        ]
    sign = -1.0 if maximize else 1.0
    return min(candidates, key=lambda pairs: (sign * total(cost, pairs), pairs))


@pytest.fixture
def local_set(make_box):
    def factory(*boxes):
        return DetectionSet.of(FrameTag.AGENT_LOCAL, boxes)

    return factory


class TestHungarian:
    """Test the optimal assignment solver."""

    def test_single_entry(self):
        assert hungarian(np.array([[0.7]])) == [(0, 0)]

    def test_two_by_two_minimum(self):
        cost = np.array([[1.0, 2.0], [2.0, 4.0]])
        pairs = hungarian(cost)
        assert pairs == [(0, 1), (1, 0)]
        assert total(cost, pairs) == 4.0

    def test_empty_matrix(self):
        assert hungarian(np.zeros((0, 3))) == []

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hungarian(np.array([[1.0, np.inf]]))

    @pytest.mark.parametrize("maximize", [False, True])
    def test_matches_exhaustive_search(self, maximize):
        rng = np.random.default_rng(10)
        for _ in range(500):
            shape = tuple(rng.integers(1, 7, size=2))
            cost = rng.integers(0, 100, size=shape).astype(float)
            pairs = hungarian(cost, maximize=maximize)
            assert len(pairs) == min(shape)
            assert len({r for r, _ in pairs}) == len({c for _, c in pairs}) == len(
                pairs
            )
            assert total(cost, pairs) == brute_force(cost, maximize)

    def test_real_valued_costs(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            cost = rng.uniform(-5.0, 5.0, size=tuple(rng.integers(1, 7, size=2)))
            assert total(cost, hungarian(cost)) == pytest.approx(
                brute_force(cost), abs=1e-12
            )

    def test_tie_resolves_to_lowest_pairs(self):
        assert hungarian(np.array([[0.0, 1.0], [0.0, 1.0]]), maximize=True) == [
            (0, 0),
            (1, 1),
        ]
        assert hungarian(np.ones((2, 3))) == [(0, 0), (1, 1)]
        assert hungarian(np.ones((3, 2))) == [(0, 0), (1, 1)]

    @pytest.mark.parametrize("maximize", [False, True])
    def test_ties_match_lexicographic_search(self, maximize):
        rng = np.random.default_rng(13)
        for _ in range(300):
            shape = tuple(rng.integers(1, 5, size=2))
            cost = rng.integers(0, 2, size=shape).astype(float)
            expected = lexicographic_optimum(cost, maximize)
            assert hungarian(cost, maximize=maximize) == expected


class TestGatedAssignment:
    """Test assignment restricted to feasible pairs."""

    def test_infeasible_pairs_never_returned(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            cost = rng.uniform(0.0, 3.0, size=tuple(rng.integers(1, 6, size=2)))
            feasible = rng.random(cost.shape) < 0.5
            pairs = gated_assignment(cost, feasible)
            assert all(feasible[r, c] for r, c in pairs)

    def test_prefers_nearer_anchor(self):
        # one detection 0.3 m from anchor 0 and 0.7 m from anchor 1
        cost = np.array([[0.3, 0.7]])
        assert gated_assignment(cost, np.ones_like(cost, dtype=bool)) == [(0, 0)]

    def test_nothing_feasible(self):
        assert gated_assignment(np.ones((2, 2)), np.zeros((2, 2), dtype=bool)) == []

    def test_maximizes_feasible_count_before_cost(self):
        # the cheap pair (0, 0) would leave row 1 with nothing feasible
        cost = np.array([[0.1, 0.2], [0.3, 9.0]])
        feasible = np.array([[True, True], [True, False]])
        assert gated_assignment(cost, feasible) == [(0, 1), (1, 0)]


class TestMatchByIou:
    """Test IoU matching between pseudo-ground truth and predictions."""

    def test_identical_sets(self, make_box, local_set):
        boxes = [
            make_box(0, 0), make_box(10, 0), make_box(0, 10, class_id=ObjectClass.TRUCK)
        ]
        matches = match_by_iou(local_set(*boxes), local_set(*boxes), 0.1)
        assert matches.pairs == ((0, 0), (1, 1), (2, 2))
        assert matches.unmatched_gt == () and matches.unmatched_pred == ()

    def test_empty_predictions(self, make_box, local_set):
        matches = match_by_iou(
            local_set(make_box(0, 0), make_box(5, 5)), local_set(), 0.1
        )
        assert matches.pairs == ()
        assert matches.unmatched_gt == (0, 1)

    def test_isolated_prediction_unmatched(self, make_box, local_set):
        gt = local_set(make_box(0, 0), make_box(20, 0))
        pred = local_set(make_box(0.3, 0), make_box(50, 50), make_box(20.2, 0.1))
        matches = match_by_iou(gt, pred, 0.1)
        assert matches.pairs == ((0, 0), (1, 2))
        assert matches.unmatched_pred == (1,)

    def test_class_mismatch_not_paired(self, make_box, local_set):
        gt = local_set(make_box(0, 0, class_id=ObjectClass.VEHICLE, size=(4, 2, 2)))
        pred = local_set(make_box(0, 0, class_id=ObjectClass.TRUCK, size=(4, 2, 2)))
        assert match_by_iou(gt, pred, 0.0).pairs == ()

    def test_below_min_iou_unmatched(self, make_box, local_set):
        gt = local_set(make_box(0, 0, size=(1, 1, 1)))
        pred = local_set(make_box(0.5, 0, size=(1, 1, 1)))
        assert match_by_iou(gt, pred, 0.3).pairs == ((0, 0),)
        assert match_by_iou(gt, pred, 0.5).pairs == ()

    def test_frame_mismatch(self, make_box):
        gt = DetectionSet.of(FrameTag.AGENT_LOCAL, [make_box(0, 0)])
        pred = DetectionSet.of(FrameTag.EGO_GLOBAL, [make_box(0, 0)])
        with pytest.raises(FrameTagError):
            match_by_iou(gt, pred, 0.1)

    def test_invalid_min_iou(self, local_set):
        with pytest.raises(ValueError):
            match_by_iou(local_set(), local_set(), 1.0)

    def test_prediction_order_does_not_change_pairs(self, make_box, local_set):
        rng = np.random.default_rng(14)
        for _ in range(20):
            centers = rng.uniform(-30, 30, size=(6, 2))
            gt = local_set(*(make_box(x, y) for x, y in centers))
            jittered = centers + rng.normal(0.0, 0.4, size=centers.shape)
            boxes = [make_box(x, y) for x, y in jittered]
            order = rng.permutation(len(boxes))
            shuffled = local_set(*(boxes[k] for k in order))

            baseline = set(match_by_iou(gt, local_set(*boxes), 0.1).pairs)
            remapped = {
                (i, int(order[k])) for i, k in match_by_iou(gt, shuffled, 0.1).pairs
            }
            assert remapped == baseline
