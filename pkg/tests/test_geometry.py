"""
Hydra-CP - Geometry Tests

SE(2) group laws against a homogeneous-matrix oracle, box transforms and
rotated-box IoU against analytic and Monte Carlo references.
"""

import math

import numpy as np
import pytest

from hydra_cp.core.geometry import (
    compose,
    inverse,
    iou_3d,
    iou_matrix,
    pose_minus,
    transform_detection,
)
from hydra_cp.models.geometry import IouMode, ObjectClass, Pose2, wrap_angle


def as_matrix(p: Pose2) -> np.ndarray:
    c, s = math.cos(p.yaw), math.sin(p.yaw)
    return np.array([[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]])


def from_matrix(m: np.ndarray) -> Pose2:
    return Pose2(m[0, 2], m[1, 2], math.atan2(m[1, 0], m[0, 0]))


def assert_pose_close(a: Pose2, b: Pose2, tol: float = 1e-9) -> None:
    assert a.x == pytest.approx(b.x, abs=tol)
    assert a.y == pytest.approx(b.y, abs=tol)
    assert abs(wrap_angle(a.yaw - b.yaw)) <= tol


def random_poses(rng: np.random.Generator, n: int) -> list:
    return [
        Pose2(*rng.uniform(-50, 50, 2), rng.uniform(-math.pi, math.pi)) for _ in range(
            n
        )
    ]


def monte_carlo_iou(a, b, samples: int, rng: np.random.Generator) -> float:
    """Point-sampling IoU over the common bounding volume of two boxes."""
    boxes = [a, b]
    reach = [0.5 * math.hypot(d.size[0], d.size[1]) for d in boxes]
    lo = np.array(
        [
            min(d.center[0] - r for d, r in zip(boxes, reach)),
            min(d.center[1] - r for d, r in zip(boxes, reach)),
            min(d.center[2] - d.size[2] / 2 for d in boxes),
        ]
    )
    hi = np.array(
        [
            max(d.center[0] + r for d, r in zip(boxes, reach)),
            max(d.center[1] + r for d, r in zip(boxes, reach)),
            max(d.center[2] + d.size[2] / 2 for d in boxes),
        ]
    )
    points = rng.uniform(lo, hi, size=(samples, 3))

    def inside(d) -> np.ndarray:
        dx, dy = points[:, 0] - d.center[0], points[:, 1] - d.center[1]
        c, s = math.cos(d.yaw), math.sin(d.yaw)
        lx, ly = c * dx + s * dy, -s * dx + c * dy
        return (
            (np.abs(lx) <= d.size[0] / 2)
            & (np.abs(ly) <= d.size[1] / 2)
            & (np.abs(points[:, 2] - d.center[2]) <= d.size[2] / 2)
        )

    in_a, in_b = inside(a), inside(b)
    union = np.count_nonzero(in_a | in_b)
    return np.count_nonzero(in_a & in_b) / union if union else 0.0


class TestPoseAlgebra:
    """Test compose, inverse and pose_minus."""

    def test_identity_compose(self):
        p = Pose2(1.5, -2.0, 0.7)
        assert_pose_close(compose(Pose2.identity(), p), p, 1e-12)
        assert_pose_close(compose(p, Pose2.identity()), p, 1e-12)

    def test_quarter_turn_compose(self):
        result = compose(Pose2(1.0, 0.0, math.pi / 2), Pose2(1.0, 0.0, 0.0))
        assert_pose_close(result, Pose2(1.0, 1.0, math.pi / 2), 1e-12)

    def test_inverse_examples(self):
        assert_pose_close(inverse(Pose2.identity()), Pose2.identity(), 1e-12)
        assert_pose_close(inverse(Pose2(3.0, 4.0, 0.0)), Pose2(-3.0, -4.0, 0.0), 1e-12)
        assert_pose_close(
            inverse(Pose2(1.0, 0.0, math.pi / 2)), Pose2(0.0, 1.0, -math.pi / 2), 1e-12
        )

    def test_group_laws_match_matrix_oracle(self):
        rng = np.random.default_rng(0)
        for a, b, c in zip(*(random_poses(rng, 200) for _ in range(3))):
            assert_pose_close(compose(a, b), from_matrix(as_matrix(a) @ as_matrix(b)))
            assert_pose_close(compose(compose(a, b), c), compose(a, compose(b, c)))
            assert_pose_close(compose(a, inverse(a)), Pose2.identity(), 1e-12)
            assert_pose_close(inverse(a), from_matrix(np.linalg.inv(as_matrix(a))))

    def test_pose_minus_wraps_yaw(self):
        dx, dy, dyaw = pose_minus(Pose2(0.0, 0.0, 3.1), Pose2(0.0, 0.0, -3.1))
        assert (dx, dy) == (0.0, 0.0)
        assert dyaw == pytest.approx(6.2 - 2 * math.pi, abs=1e-12)
        assert dyaw == pytest.approx(-0.0832, abs=1e-4)

    def test_pose_minus_examples(self):
        assert pose_minus(Pose2(1, 2, 0.5), Pose2(1, 2, 0.5)) == (0.0, 0.0, 0.0)
        assert pose_minus(Pose2(1, 2, 0.5), Pose2.identity()) == pytest.approx(
            (1, 2, 0.5)
        )

    def test_yaw_stored_wrapped(self):
        assert Pose2(0, 0, 3 * math.pi).yaw == pytest.approx(math.pi)
        assert -math.pi < Pose2(0, 0, -math.pi).yaw <= math.pi


class TestTransformDetection:
    """Test rigid transforms of boxes."""

    def test_identity_keeps_box(self, make_box):
        box = make_box(3.0, -1.0, yaw=0.4, confidence=0.6, source="a")
        assert transform_detection(Pose2.identity(), box) == box

    def test_half_turn(self, make_box):
        moved = transform_detection(Pose2(0.0, 0.0, math.pi), make_box(1.0, 0.0))
        assert moved.center[0] == pytest.approx(-1.0)
        assert moved.center[1] == pytest.approx(0.0, abs=1e-12)
        assert abs(wrap_angle(moved.yaw - math.pi)) < 1e-12

    def test_round_trip(self, make_box):
        rng = np.random.default_rng(1)
        box = make_box(12.0, -7.5, yaw=2.9, class_id=ObjectClass.TRUCK, source="x")
        for pose in random_poses(rng, 50):
            back = transform_detection(inverse(pose), transform_detection(pose, box))
            assert back.center == pytest.approx(box.center, abs=1e-9)
            assert abs(wrap_angle(back.yaw - box.yaw)) < 1e-9
            assert (back.size, back.class_id, back.confidence, back.source) == (
                box.size,
                box.class_id,
                box.confidence,
                box.source,
            )


class TestIou:
    """Test rotated 3D IoU."""

    def test_identical_boxes(self, make_box):
        box = make_box(5.0, 5.0, yaw=0.3)
        assert iou_3d(box, box) == pytest.approx(1.0, abs=1e-12)

    def test_offset_unit_cubes(self, make_box):
        a = make_box(0.0, 0.0, size=(1.0, 1.0, 1.0))
        b = make_box(0.5, 0.0, size=(1.0, 1.0, 1.0))
        assert iou_3d(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert iou_3d(a, b, IouMode.BEV) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_vertical_offset_only_affects_3d(self, make_box):
        a = make_box(0.0, 0.0, size=(2.0, 2.0, 2.0), z=1.0)
        b = make_box(0.0, 0.0, size=(2.0, 2.0, 2.0), z=2.0)
        assert iou_3d(a, b, IouMode.BEV) == pytest.approx(1.0)
        assert iou_3d(a, b) == pytest.approx(1.0 / 3.0)

    def test_far_apart(self, make_box):
        assert iou_3d(make_box(0.0, 0.0), make_box(100.0, 0.0)) == 0.0

    def test_symmetric_and_rigid_invariant(self, make_box):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = make_box(*rng.uniform(-2, 2, 2), yaw=rng.uniform(-math.pi, math.pi))
            b = make_box(*rng.uniform(-2, 2, 2), yaw=rng.uniform(-math.pi, math.pi))
            pose = Pose2(*rng.uniform(-30, 30, 2), rng.uniform(-math.pi, math.pi))
            value = iou_3d(a, b)
            assert 0.0 <= value <= 1.0
            assert iou_3d(b, a) == pytest.approx(value, abs=1e-9)
            moved = iou_3d(transform_detection(pose, a), transform_detection(pose, b))
            assert moved == pytest.approx(value, abs=1e-9)

    def test_matrix_shape_and_empty(self, make_box):
        boxes = [make_box(0, 0), make_box(1, 0), make_box(50, 0)]
        assert iou_matrix(boxes, boxes[:2]).shape == (3, 2)
        assert iou_matrix([], boxes).shape == (0, 3)

    def test_matches_monte_carlo(self, make_box):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = make_box(
                0.0, 0.0, yaw=rng.uniform(-math.pi, math.pi), size=(4.0, 2.0, 1.5)
            )
            b = make_box(
                *rng.uniform(-1.5, 1.5, 2),
                yaw=rng.uniform(-math.pi, math.pi),
                size=(3.0, 2.5, 1.5),
                z=rng.uniform(0.5, 1.0),
            )
            estimate = monte_carlo_iou(a, b, 200_000, rng)
            assert iou_3d(a, b) == pytest.approx(estimate, abs=0.02)

    @pytest.mark.slow
    def test_matches_monte_carlo_many_pairs(self, make_box):
        rng = np.random.default_rng(4)
        for _ in range(100):
            a = make_box(
                0.0,
                0.0,
                yaw=rng.uniform(-math.pi, math.pi),
                size=tuple(rng.uniform(0.8, 5.0, 3)),
                z=1.0,
            )
            b = make_box(
                *rng.uniform(-2.0, 2.0, 2),
                yaw=rng.uniform(-math.pi, math.pi),
                size=tuple(rng.uniform(0.8, 5.0, 3)),
                z=rng.uniform(0.5, 1.5),
            )
            estimate = monte_carlo_iou(a, b, 1_000_000, rng)
            assert iou_3d(a, b) == pytest.approx(estimate, abs=0.01)
