"""
Hydra-CP - Domain Classifier Tests

Quality scores, Soft-AP against a loop-based prefix-sum reference, agent
classification and the intermediate/late partition.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from hydra_cp.core.exceptions import FrameTagError
from hydra_cp.models.config import ClassifierConfig
from hydra_cp.models.geometry import DetectionSet, FrameTag
from hydra_cp.models.results import Branch, DomainVerdict, QualityScoredPrediction
from hydra_cp.services.domain_service import (
    DomainClassifier,
    partition,
    quality_score,
    soft_ap,
)


def reference_soft_ap(entries, n_gt: int) -> float:
    """Plain-loop area under the soft precision/recall curve."""
    if n_gt == 0 or not entries:
        return 0.0
    ranked = sorted(entries, key=lambda e: (-e[0], e[1]))
    area, running, prev_recall = 0.0, 0.0, 0.0
    for m, (_, _, q) in enumerate(ranked, start=1):
        running += q
        precision = running / m
        recall = running / n_gt
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return min(max(area, 0.0), 1.0)


def scored(*entries):
    return [QualityScoredPrediction(i, c, q) for i, (c, q) in enumerate(entries)]


@pytest.fixture
def classifier() -> DomainClassifier:
    return DomainClassifier(ClassifierConfig())


class TestQualityScore:
    """Test the per-match quality score."""

    def test_perfect_match(self):
        assert quality_score(0.8, 0.8, 1.0, 0.5) == 1.0

    def test_zero_iou(self):
        assert quality_score(0.8, 0.8, 0.0, 0.5) == 0.0

    def test_worked_example(self):
        expected = math.sqrt(math.exp(-0.4) * 0.5)
        assert quality_score(0.7, 0.5, 0.5, 0.5) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.5789, abs=1e-4)

    def test_rejects_bad_temperature(self):
        with pytest.raises(ValueError):
            quality_score(0.5, 0.5, 0.5, 0.0)


class TestSoftAp:
    """Test the soft precision/recall area."""

    def test_all_perfect(self):
        assert soft_ap(scored((0.9, 1.0), (0.8, 1.0), (0.7, 1.0)), 3) == pytest.approx(
            1.0
        )

    def test_empty(self):
        assert soft_ap([], 4) == 0.0

    def test_no_ground_truth(self):
        assert soft_ap(scored((0.9, 0.5)), 0) == 0.0

    def test_two_prediction_example(self):
        value = soft_ap(scored((0.9, 0.8944), (0.5, 0.5789)), 2)
        assert value == pytest.approx(0.6132, abs=1e-3)

    def test_order_by_confidence_not_input(self):
        forward = soft_ap(scored((0.9, 0.2), (0.5, 0.9)), 2)
        reversed_input = [
            QualityScoredPrediction(1, 0.5, 0.9),
            QualityScoredPrediction(0, 0.9, 0.2),
        ]
        backward = soft_ap(reversed_input, 2)
        assert forward == backward

    def test_matches_prefix_sum_reference(self):
        rng = np.random.default_rng(20)
        for _ in range(1000):
            n = int(rng.integers(0, 12))
            conf = rng.random(n)
            quality = np.where(rng.random(n) < 0.3, 0.0, rng.random(n))
            n_gt = int(rng.integers(max(1, n // 2), n + 3))
            entries = [(float(conf[i]), i, float(quality[i])) for i in range(n)]
            expected = reference_soft_ap(entries, n_gt)
            actual = soft_ap(
                [QualityScoredPrediction(i, c, q) for c, i, q in entries], n_gt
            )
            assert actual == pytest.approx(expected, abs=1e-12)
            assert 0.0 <= actual <= 1.0


class TestDomainClassifier:
    """Test per-agent classification."""

    def test_identical_decode_is_intermediate(self, classifier, make_box):
        boxes = DetectionSet.of(
            FrameTag.AGENT_LOCAL, [
                make_box(0, 0, confidence=0.8), make_box(15, 3, yaw=1.0)
            ]
        )
        verdict = classifier.classify_agent("hom", boxes, boxes)
        assert verdict.s_domain == pytest.approx(1.0, abs=1e-9)
        assert verdict.branch is Branch.INTERMEDIATE

    def test_empty_decode_is_late(self, classifier, make_box):
        b_a = DetectionSet.of(FrameTag.AGENT_LOCAL, [make_box(0, 0)])
        verdict = classifier.classify_agent(
            "het", b_a, DetectionSet.empty(FrameTag.AGENT_LOCAL)
        )
        assert verdict.s_domain == 0.0
        assert verdict.branch is Branch.LATE

    def test_unmatched_predictions_score_zero_quality(self, classifier, make_box):
        b_a = DetectionSet.of(FrameTag.AGENT_LOCAL, [make_box(0, 0)])
        b_pred = DetectionSet.of(
            FrameTag.AGENT_LOCAL, [make_box(0, 0), make_box(40, 0)]
        )
        scores = classifier.score_predictions(b_a, b_pred)
        assert [s.pred_index for s in scores] == [0, 1]
        assert scores[1].quality == 0.0
        assert scores[0].quality == pytest.approx(1.0, abs=1e-9)

    def test_rejects_global_frame(self, classifier, make_box):
        local = DetectionSet.of(FrameTag.AGENT_LOCAL, [make_box(0, 0)])
        global_ = DetectionSet.of(FrameTag.EGO_GLOBAL, [make_box(0, 0)])
        with pytest.raises(FrameTagError):
            classifier.classify_agent("a", global_, local)
        with pytest.raises(FrameTagError):
            classifier.classify_agent("a", local, global_)

    def test_drifting_prediction_never_raises_score(self, classifier, make_box):
        rng = np.random.default_rng(22)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            b_a = DetectionSet.of(
                FrameTag.AGENT_LOCAL,
                [
                    make_box(
                        20.0 * i,
                        rng.uniform(-2, 2),
                        yaw=rng.uniform(-0.3, 0.3),
                        confidence=float(rng.uniform(0.3, 1.0)),
                    )
                    for i in range(n)
                ],
            )
            moved = int(rng.integers(n))
            scores = []
            for shift in np.linspace(0.0, 6.0, 13):
                b_pred = DetectionSet.of(
                    FrameTag.AGENT_LOCAL,
                    [
                        replace(d, center=(d.center[0] + shift, *d.center[1:]))
                        if i == moved
                        else d
                        for i, d in enumerate(b_a)
                    ],
                )
                scores.append(classifier.classify_agent("a", b_a, b_pred).s_domain)
            assert scores[0] == pytest.approx(1.0, abs=1e-9)
            assert all(b <= a + 1e-12 for a, b in zip(scores, scores[1:]))
            assert scores[-1] < scores[0]


class TestPartition:
    """Test the intermediate/late split."""

    def verdicts(self, *scores, tau=0.2):
        return [
            DomainVerdict(
                f"a{i}", s, Branch.INTERMEDIATE if s >= tau else Branch.LATE
            )
            for i, s in enumerate(scores)
        ]

    def test_all_intermediate(self):
        assert partition(self.verdicts(0.5, 0.9)) == (["a0", "a1"], [])

    def test_all_late(self):
        assert partition(self.verdicts(0.01, 0.1)) == ([], ["a0", "a1"])

    def test_mixed(self):
        assert partition(self.verdicts(0.51, 0.007)) == (["a0"], ["a1"])

    def test_disjoint_and_complete(self):
        rng = np.random.default_rng(21)
        verdicts = self.verdicts(*rng.random(30))
        intermediate, late = partition(verdicts)
        assert not set(intermediate) & set(late)
        assert sorted(intermediate + late) == sorted(v.agent_id for v in verdicts)
