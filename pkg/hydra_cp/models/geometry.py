"""
Hydra-CP - Geometry Models

Value types shared by every module: SE(2) poses, oriented 3D detection boxes
and frame-tagged detection sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable, Iterator, List, Sequence, Tuple


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    wrapped = math.fmod(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


class ObjectClass(IntEnum):
    """Object category enumeration."""

    VEHICLE = 0
    PEDESTRIAN = 1
    TRUCK = 2

    @property
    def label(self) -> str:
        return self.name.lower()


# Nominal (length, width, height) per class, meters
CLASS_SIZES: dict[ObjectClass, Tuple[float, float, float]] = {
    ObjectClass.VEHICLE: (4.5, 1.9, 1.6),
    ObjectClass.PEDESTRIAN: (0.8, 0.8, 1.75),
    ObjectClass.TRUCK: (10.0, 2.8, 3.5),
}


class IouMode(str, Enum):
    """Which IoU variant box comparisons use."""

    BEV = "bev"
    BEV_TIMES_HEIGHT = "bev_times_height"


class FrameTag(str, Enum):
    """Coordinate frame a detection set is expressed in."""

    AGENT_LOCAL = "agent-local"
    EGO_GLOBAL = "ego-global"


@dataclass(frozen=True, slots=True)
class Pose2:
    """SE(2) pose; yaw is stored wrapped to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.yaw)


@dataclass(frozen=True, slots=True)
class Detection:
    """
    Oriented 3D box with class and confidence.

    center is (x, y, z) and size is (length, width, height); yaw is the
    heading of the length axis. source records which agent (or "stage1")
    produced the box.
    """

    center: Tuple[float, float, float]
    size: Tuple[float, float, float]
    yaw: float
    class_id: ObjectClass
    confidence: float
    source: str = ""

    def __post_init__(self) -> None:
        if any(s <= 0.0 for s in self.size):
            raise ValueError(f"Box size must be strictly positive, got {self.size}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"Confidence must lie in [0, 1], got {self.confidence}")
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        object.__setattr__(self, "class_id", ObjectClass(self.class_id))

    @property
    def bev_pose(self) -> Pose2:
        """Planar pose (x, y, yaw) of the box."""
        return Pose2(self.center[0], self.center[1], self.yaw)

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]

    def with_source(self, source: str) -> "Detection":
        return replace(self, source=source)


@dataclass(frozen=True)
class DetectionSet:
    """Ordered detections sharing one coordinate frame."""

    frame: FrameTag
    detections: Tuple[Detection, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))

    @classmethod
    def empty(cls, frame: FrameTag) -> "DetectionSet":
        return cls(frame, ())

    @classmethod
    def of(cls, frame: FrameTag, detections: Iterable[Detection]) -> "DetectionSet":
        return cls(frame, tuple(detections))

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self) -> Iterator[Detection]:
        return iter(self.detections)

    def __getitem__(self, index: int) -> Detection:
        return self.detections[index]

    def of_class(self, class_id: ObjectClass) -> List[Detection]:
        return [d for d in self.detections if d.class_id == class_id]

    def sources(self) -> set[str]:
        return {d.source for d in self.detections}

    def concat(self, other: "DetectionSet") -> "DetectionSet":
        if other.frame != self.frame:
            raise ValueError(
                f"Cannot concatenate {other.frame.value} boxes onto {self.frame.value}"
            )
        return DetectionSet(self.frame, self.detections + other.detections)


@dataclass(frozen=True, slots=True)
class GroundTruthObject:
    """Ground-truth object in the world (ego-global) frame."""

    object_id: int
    class_id: ObjectClass
    center: Tuple[float, float, float]
    size: Tuple[float, float, float]
    yaw: float

    def as_detection(self, confidence: float = 1.0, source: str = "truth") -> Detection:
        return Detection(
            center=self.center,
            size=self.size,
            yaw=self.yaw,
            class_id=self.class_id,
            confidence=confidence,
            source=source,
        )


def detections_from(objects: Sequence[GroundTruthObject]) -> DetectionSet:
    """Ground truth as a confidence-1 ego-global detection set."""
    return DetectionSet.of(FrameTag.EGO_GLOBAL, (o.as_detection() for o in objects))
