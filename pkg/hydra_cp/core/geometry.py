"""
Hydra-CP - Geometry

SE(2) group operations, rigid transforms of detection boxes and rotated-box
IoU. BEV intersections are computed on shapely polygons; the vertical
overlap of two boxes is an interval intersection on their z extents.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
import shapely

from hydra_cp.models.geometry import Detection, IouMode, Pose2, wrap_angle


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Return a ⊕ b."""
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.yaw + b.yaw,
    )


def inverse(p: Pose2) -> Pose2:
    """Group inverse: compose(p, inverse(p)) is the identity."""
    c, s = math.cos(p.yaw), math.sin(p.yaw)
    return Pose2(-c * p.x - s * p.y, s * p.x - c * p.y, -p.yaw)


def pose_minus(a: Pose2, b: Pose2) -> Tuple[float, float, float]:
    """Component-wise a ⊖ b with the yaw difference wrapped."""
    return (a.x - b.x, a.y - b.y, wrap_angle(a.yaw - b.yaw))


def transform_detection(pose: Pose2, d: Detection) -> Detection:
    """Apply pose to a box: planar center and yaw move, everything else is kept."""
    moved = compose(pose, Pose2(d.center[0], d.center[1], d.yaw))
    return Detection(
        center=(moved.x, moved.y, d.center[2]),
        size=d.size,
        yaw=moved.yaw,
        class_id=d.class_id,
        confidence=d.confidence,
        source=d.source,
    )


def transform_pose_array(pose: Pose2, xy_yaw: np.ndarray) -> np.ndarray:
    """Apply pose to an (N, 3) array of planar poses; yaw column is wrapped."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    out = np.empty_like(xy_yaw, dtype=float)
    out[:, 0] = pose.x + c * xy_yaw[:, 0] - s * xy_yaw[:, 1]
    out[:, 1] = pose.y + s * xy_yaw[:, 0] + c * xy_yaw[:, 1]
    out[:, 2] = wrap_angles(xy_yaw[:, 2] + pose.yaw)
    return out


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized wrap to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angles, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def bev_corners(boxes: np.ndarray) -> np.ndarray:
    """
    Corner coordinates of BEV rectangles.

    Args:
        boxes: (N, 5) array of (x, y, length, width, yaw)

    Returns:
        (N, 5, 2) closed rings, counter-clockwise
    """
    half_l = boxes[:, 2] / 2.0
    half_w = boxes[:, 3] / 2.0
    local = np.stack(
        [
            np.stack([half_l, half_w], axis=-1),
            np.stack([-half_l, half_w], axis=-1),
            np.stack([-half_l, -half_w], axis=-1),
            np.stack([half_l, -half_w], axis=-1),
        ],
        axis=1,
    )
    c, s = np.cos(boxes[:, 4]), np.sin(boxes[:, 4])
    rot = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=1)
    world = np.einsum("nij,nkj->nki", rot, local) + boxes[:, None, 0:2]
    return np.concatenate([world, world[:, :1]], axis=1)


def _box_array(dets: Sequence[Detection]) -> np.ndarray:
    """(N, 8) array of x, y, z, l, w, h, yaw, class."""
    if not dets:
        return np.zeros((0, 8))
    return np.array(
        [
            (*d.center, *d.size, d.yaw, int(d.class_id))
            for d in dets
        ],
        dtype=float,
    )


def iou_matrix(
    a: Sequence[Detection],
    b: Sequence[Detection],
    mode: IouMode = IouMode.BEV_TIMES_HEIGHT,
) -> np.ndarray:
    """
    Pairwise IoU between two box lists.

    Pairs whose bounding circles do not touch are never handed to shapely.
    """
    arr_a, arr_b = _box_array(a), _box_array(b)
    result = np.zeros((len(arr_a), len(arr_b)))
    if result.size == 0:
        return result

    radius_a = 0.5 * np.hypot(arr_a[:, 3], arr_a[:, 4])
    radius_b = 0.5 * np.hypot(arr_b[:, 3], arr_b[:, 4])
    dist = np.hypot(
        arr_a[:, None, 0] - arr_b[None, :, 0], arr_a[:, None, 1] - arr_b[None, :, 1]
    )
    rows, cols = np.nonzero(dist < radius_a[:, None] + radius_b[None, :])
    if rows.size == 0:
        return result

    poly_a = shapely.polygons(bev_corners(arr_a[:, [0, 1, 3, 4, 6]]))
    poly_b = shapely.polygons(bev_corners(arr_b[:, [0, 1, 3, 4, 6]]))
    inter_area = shapely.area(shapely.intersection(poly_a[rows], poly_b[cols]))

    area_a = arr_a[rows, 3] * arr_a[rows, 4]
    area_b = arr_b[cols, 3] * arr_b[cols, 4]
    if IouMode(mode) is IouMode.BEV:
        union = area_a + area_b - inter_area
        values = inter_area / union
    else:
        top = np.minimum(
            arr_a[rows, 2] + arr_a[rows, 5] / 2, arr_b[cols, 2] + arr_b[cols, 5] / 2
        )
        bottom = np.maximum(
            arr_a[rows, 2] - arr_a[rows, 5] / 2, arr_b[cols, 2] - arr_b[cols, 5] / 2
        )
        inter_vol = inter_area * np.clip(top - bottom, 0.0, None)
        union = area_a * arr_a[rows, 5] + area_b * arr_b[cols, 5] - inter_vol
        values = inter_vol / union

    result[rows, cols] = np.clip(values, 0.0, 1.0)
    return result


def iou_3d(
    a: Detection, b: Detection, mode: IouMode = IouMode.BEV_TIMES_HEIGHT
) -> float:
    """IoU of two oriented boxes in [0, 1]; symmetric and rigid-invariant."""
    return float(iou_matrix([a], [b], mode)[0, 0])
