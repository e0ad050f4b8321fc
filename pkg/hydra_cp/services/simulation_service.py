"""
Hydra-CP - Simulation Service

Deterministic stand-in for sensors, detectors, feature decoding and
intermediate fusion. Every random draw comes from a stream keyed by
(seed, frame, purpose, agent), so a scenario regenerates byte-identically and
changing one knob (pose noise, the set of intermediate agents) leaves the
other streams untouched.

Draws are taken for every object whether or not it is used, which keeps
runs with different parameters on common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from hydra_cp.core.exceptions import ScenarioError
from hydra_cp.core.geometry import (
    compose,
    inverse,
    transform_detection,
    transform_pose_array,
)
from hydra_cp.core.seeding import make_rng
from hydra_cp.models.config import (
    AgentSpec,
    DegradedDecode,
    DetectModel,
    FaithfulDecode,
    MapExtent,
    ScenarioConfig,
)
from hydra_cp.models.geometry import (
    CLASS_SIZES,
    Detection,
    DetectionSet,
    FrameTag,
    GroundTruthObject,
    ObjectClass,
    Pose2,
)
from hydra_cp.services.fusion_service import AgentFrame, stage1_source

_MAX_SPAWN_ATTEMPTS = 2000


@dataclass(frozen=True)
class Scene:
    """Ground truth of one frame in the ego-global frame."""

    frame: int
    objects: Tuple[GroundTruthObject, ...]
    agent_poses: Dict[str, Pose2]


# =============================================================================
# Scene generation
# =============================================================================


def _spawn_radius(class_id: ObjectClass) -> float:
    length, width, _ = CLASS_SIZES[class_id]
    return 0.5 * math.hypot(length, width)


def generate_scene(cfg: ScenarioConfig, frame: int) -> Scene:
    """
    Objects and true agent poses for one frame.

    Objects are placed by rejection sampling on bounding circles, so no two
    spawned boxes overlap. Agents without a fixed pose are placed uniformly
    within agent_spread of the ego.
    """
    if not 0 <= frame < max(cfg.n_frames, 1):
        raise ValueError(f"frame {frame} outside [0, {cfg.n_frames})")

    rng = make_rng(cfg.seed, frame, "scene")
    extent = cfg.map_extent
    placed: List[Tuple[float, float, float]] = []  # x, y, radius
    objects: List[GroundTruthObject] = []

    for class_id in ObjectClass:
        size = CLASS_SIZES[class_id]
        radius = _spawn_radius(class_id)
        for _ in range(cfg.object_counts.get(class_id, 0)):
            for _attempt in range(_MAX_SPAWN_ATTEMPTS):
                x = rng.uniform(-extent.x + radius, extent.x - radius)
                y = rng.uniform(-extent.y + radius, extent.y - radius)
                if all(
                    math.hypot(x - px, y - py) > radius + pr for px, py, pr in placed
                ):
                    break
            else:
                raise ScenarioError(
                    f"Cannot place {class_id.label} #{len(objects)} without overlap; "
                    "reduce object_counts or enlarge map_extent"
                )
            yaw = rng.uniform(-math.pi, math.pi)
            placed.append((x, y, radius))
            objects.append(
                GroundTruthObject(
                    object_id=len(objects),
                    class_id=class_id,
                    center=(float(x), float(y), size[2] / 2.0),
                    size=size,
                    yaw=float(yaw),
                )
            )

    ego = cfg.ego
    ego_pose = Pose2(*ego.pose) if ego.pose is not None else Pose2.identity()
    poses = {ego.agent_id: ego_pose}
    # spawn box: ego +/- spread, clipped to the map
    centre = np.array([ego_pose.x, ego_pose.y])
    half_map = np.array([extent.x, extent.y])
    lo = np.maximum(centre - cfg.agent_spread, -half_map)
    hi = np.minimum(centre + cfg.agent_spread, half_map)
    for spec in cfg.auxiliaries:
        draw = rng.uniform(-1.0, 1.0, size=3)
        if spec.pose is not None:
            poses[spec.agent_id] = Pose2(*spec.pose)
        else:
            x, y = lo + 0.5 * (draw[:2] + 1.0) * (hi - lo)
            poses[spec.agent_id] = Pose2(x, y, ego_pose.yaw + draw[2] * math.pi)

    return Scene(frame=frame, objects=tuple(objects), agent_poses=poses)


# =============================================================================
# Detector surrogate
# =============================================================================


def _clamped_gaussian(shape: Tuple[float, float], z: np.ndarray) -> np.ndarray:
    mean, spread = shape
    return np.clip(mean + spread * z, 0.0, 1.0)


def _object_array(objects: Sequence[GroundTruthObject]) -> np.ndarray:
    return np.array([(o.center[0], o.center[1], o.yaw) for o in objects]).reshape(-1, 3)


def _random_boxes(
    rng: np.random.Generator,
    count: int,
    fov_range: float,
    conf_shape: Tuple[float, float],
) -> List[Tuple[np.ndarray, ObjectClass, float]]:
    """Agent-local planar poses, classes and confidences of phantom boxes."""
    radius = fov_range * np.sqrt(rng.random(count))
    bearing = rng.uniform(-math.pi, math.pi, count)
    yaw = rng.uniform(-math.pi, math.pi, count)
    classes = rng.integers(0, len(ObjectClass), count)
    conf = _clamped_gaussian(conf_shape, rng.standard_normal(count))
    poses = np.stack([radius * np.cos(bearing), radius * np.sin(bearing), yaw], axis=-1)
    return [
        (poses[n], ObjectClass(int(classes[n])), float(conf[n])) for n in range(count)
    ]


def _box(
    pose: np.ndarray, class_id: ObjectClass, confidence: float, source: str
) -> Detection:
    size = CLASS_SIZES[class_id]
    return Detection(
        center=(float(pose[0]), float(pose[1]), size[2] / 2.0),
        size=size,
        yaw=float(pose[2]),
        class_id=class_id,
        confidence=float(confidence),
        source=source,
    )


def _clip_to_extent(pose: Pose2, local: np.ndarray, extent: MapExtent) -> np.ndarray:
    """Clip agent-local planar poses so their global position stays inside the map."""
    world = transform_pose_array(pose, local.reshape(-1, 3))
    world[:, 0] = np.clip(world[:, 0], -extent.x, extent.x)
    world[:, 1] = np.clip(world[:, 1], -extent.y, extent.y)
    return transform_pose_array(inverse(pose), world)


def sense(
    agent: AgentSpec,
    truth: Sequence[GroundTruthObject],
    agent_true_pose: Pose2,
    rng: np.random.Generator,
    extent: Optional[MapExtent] = None,
) -> DetectionSet:
    """
    Single-agent detections (B_A) in the agent's local frame.

    Objects within fov_range are detected with recall_prob and perturbed by
    pos_sigma / yaw_sigma; a Poisson(fp_rate) number of false positives is
    scattered over the field of view.
    """
    model: DetectModel = agent.detection_model
    n = len(truth)
    detect_u = rng.random(n)
    pos_z = rng.standard_normal((n, 2))
    yaw_z = rng.standard_normal(n)
    conf_z = rng.standard_normal(n)

    local = transform_pose_array(inverse(agent_true_pose), _object_array(truth))
    in_fov = np.hypot(local[:, 0], local[:, 1]) <= model.fov_range
    detected = in_fov & (detect_u < model.recall_prob)
    conf = _clamped_gaussian(model.conf_shape, conf_z)

    boxes: List[Detection] = []
    for idx in np.flatnonzero(detected):
        obj = truth[idx]
        boxes.append(
            Detection(
                center=(
                    float(local[idx, 0] + model.pos_sigma * pos_z[idx, 0]),
                    float(local[idx, 1] + model.pos_sigma * pos_z[idx, 1]),
                    obj.center[2],
                ),
                size=obj.size,
                yaw=float(local[idx, 2] + model.yaw_sigma * yaw_z[idx]),
                class_id=obj.class_id,
                confidence=float(conf[idx]),
                source=agent.agent_id,
            )
        )

    phantoms = _random_boxes(
        rng, int(rng.poisson(model.fp_rate)), model.fov_range, model.fp_conf_shape
    )
    if phantoms and extent is not None:
        clipped = _clip_to_extent(
            agent_true_pose, np.array([p for p, _, _ in phantoms]), extent
        )
        phantoms = [(clipped[n], c, s) for n, (_, c, s) in enumerate(phantoms)]
    boxes.extend(_box(pose, cls, c, agent.agent_id) for pose, cls, c in phantoms)
    return DetectionSet.of(FrameTag.AGENT_LOCAL, boxes)


# =============================================================================
# Decode surrogate
# =============================================================================


def decode_surrogate(
    agent: AgentSpec, b_a: DetectionSet, rng: np.random.Generator
) -> DetectionSet:
    """
    The ego's decode (B_pred) of an agent's features, agent-local.

    Faithful decoding jitters the sender's boxes slightly; degraded decoding
    drops boxes, shifts survivors by meters, scrambles confidences and adds
    hallucinated boxes.
    """
    model = agent.decode_model
    n = len(b_a)
    keep_u = rng.random(n)
    pos_z = rng.standard_normal((n, 2))
    yaw_z = rng.standard_normal(n)
    conf_z = rng.standard_normal(n)

    if isinstance(model, FaithfulDecode):
        decoded = [
            Detection(
                center=(
                    d.center[0] + model.jitter_sigma * pos_z[i, 0],
                    d.center[1] + model.jitter_sigma * pos_z[i, 1],
                    d.center[2],
                ),
                size=d.size,
                yaw=d.yaw + model.yaw_jitter * yaw_z[i],
                class_id=d.class_id,
                confidence=float(
                    np.clip(d.confidence + model.conf_jitter * conf_z[i], 0, 1)
                ),
                source=d.source,
            )
            for i, d in enumerate(b_a)
        ]
        return DetectionSet.of(FrameTag.AGENT_LOCAL, decoded)

    assert isinstance(model, DegradedDecode)
    decoded = [
        Detection(
            center=(
                d.center[0] + model.offset_sigma * pos_z[i, 0],
                d.center[1] + model.offset_sigma * pos_z[i, 1],
                d.center[2],
            ),
            size=d.size,
            yaw=d.yaw,
            class_id=d.class_id,
            confidence=float(
                np.clip(d.confidence + model.conf_noise * conf_z[i], 0, 1)
            ),
            source=d.source,
        )
        for i, d in enumerate(b_a)
        if keep_u[i] >= model.drop_prob
    ]
    phantoms = _random_boxes(
        rng,
        int(rng.poisson(model.hallucination_rate)),
        agent.detection_model.fov_range,
        (0.5, model.conf_noise),
    )
    decoded.extend(_box(pose, cls, c, agent.agent_id) for pose, cls, c in phantoms)
    return DetectionSet.of(FrameTag.AGENT_LOCAL, decoded)


# =============================================================================
# Stage-1 surrogate
# =============================================================================


def _fused_detections(
    ego: AgentSpec,
    compatible: Sequence[AgentSpec],
    truth: Sequence[GroundTruthObject],
    true_poses: Mapping[str, Pose2],
    rng: np.random.Generator,
    extent: MapExtent,
) -> List[Detection]:
    """Coverage union of the ego and compatible agents, with reduced jitter."""
    n = len(truth)
    detect_u = rng.random(n)
    pos_z = rng.standard_normal((n, 2))
    yaw_z = rng.standard_normal(n)
    conf_z = rng.standard_normal(n)

    world = _object_array(truth)
    miss = np.ones(n)
    for member in [ego, *compatible]:
        pose = true_poses[member.agent_id]
        dist = np.hypot(world[:, 0] - pose.x, world[:, 1] - pose.y)
        covered = dist <= member.detection_model.fov_range
        miss = np.where(
            covered, miss * (1.0 - member.detection_model.recall_prob), miss
        )
    detected = detect_u < 1.0 - miss

    model = ego.detection_model
    shrink = 1.0 / math.sqrt(1 + len(compatible))
    conf = _clamped_gaussian(model.conf_shape, conf_z)
    boxes = [
        Detection(
            center=(
                float(world[i, 0] + model.pos_sigma * shrink * pos_z[i, 0]),
                float(world[i, 1] + model.pos_sigma * shrink * pos_z[i, 1]),
                truth[i].center[2],
            ),
            size=truth[i].size,
            yaw=float(world[i, 2] + model.yaw_sigma * shrink * yaw_z[i]),
            class_id=truth[i].class_id,
            confidence=float(conf[i]),
            source=stage1_source(),
        )
        for i in np.flatnonzero(detected)
    ]

    ego_pose = true_poses[ego.agent_id]
    phantoms = _random_boxes(
        rng, int(rng.poisson(model.fp_rate)), model.fov_range, model.fp_conf_shape
    )
    if phantoms:
        local = _clip_to_extent(ego_pose, np.array([p for p, _, _ in phantoms]), extent)
        world_fp = transform_pose_array(ego_pose, local)
        boxes.extend(
            _box(world_fp[k], cls, c, stage1_source()) for k, (_, cls, c) in enumerate(
                phantoms
            )
        )
    return boxes


def _contaminate(
    boxes: List[Detection],
    agent: AgentSpec,
    true_pose: Pose2,
    pose_used: Pose2,
    rng: np.random.Generator,
) -> List[Detection]:
    """
    Corrupt fused boxes inside the field of view of an agent whose features
    the ego cannot decode: losses, misalignment by the pose error, confidence
    noise and phantom boxes.
    """
    model = agent.decode_model
    assert isinstance(model, DegradedDecode)
    fov = agent.detection_model.fov_range
    n = len(boxes)
    keep_u = rng.random(n)
    conf_z = rng.standard_normal(n)
    warp = compose(pose_used, inverse(true_pose))
    source = stage1_source(agent.agent_id)

    out: List[Detection] = []
    for i, det in enumerate(boxes):
        if math.hypot(det.center[0] - true_pose.x, det.center[1] - true_pose.y) > fov:
            out.append(det)
            continue
        if keep_u[i] < model.drop_prob:
            continue
        moved = transform_detection(warp, det)
        conf = float(np.clip(det.confidence + model.conf_noise * conf_z[i], 0.0, 1.0))
        out.append(
            Detection(moved.center, moved.size, moved.yaw, moved.class_id, conf, source)
        )

    phantoms = _random_boxes(
        rng,
        int(rng.poisson(model.hallucination_rate)),
        fov,
        (0.5, model.conf_noise),
    )
    if phantoms:
        world = transform_pose_array(pose_used, np.array([p for p, _, _ in phantoms]))
        out.extend(
            _box(world[k], cls, c, source) for k, (_, cls, c) in enumerate(phantoms)
        )
    return out


def stage1_oracle(
    ego: AgentSpec,
    intermediate: Sequence[AgentSpec],
    truth: Sequence[GroundTruthObject],
    true_poses: Mapping[str, Pose2],
    poses_used: Mapping[str, Pose2],
    ego_detections: DetectionSet,
    seed: int,
    frame: int,
    extent: MapExtent,
) -> DetectionSet:
    """
    Simulated intermediate fusion over the ego and the given agents (ego-global).

    Agents whose features decode faithfully extend coverage and reduce
    localization noise by 1/sqrt(1 + n); fusion is aligned with true poses.
    Agents whose features do not decode contaminate the fused output inside
    their field of view, misaligned by the pose used for feature alignment.
    With no intermediate agents the result is the ego's own detections.
    """
    compatible = [a for a in intermediate if isinstance(a.decode_model, FaithfulDecode)]
    degraded = [a for a in intermediate if isinstance(a.decode_model, DegradedDecode)]

    ego_pose = true_poses[ego.agent_id]
    if compatible:
        boxes = _fused_detections(
            ego, compatible, truth, true_poses, make_rng(seed, frame, "stage1"), extent
        )
    else:
        boxes = [
            transform_detection(ego_pose, d).with_source(stage1_source())
            for d in ego_detections
        ]

    for agent in degraded:
        boxes = _contaminate(
            boxes,
            agent,
            true_poses[agent.agent_id],
            poses_used.get(agent.agent_id, true_poses[agent.agent_id]),
            make_rng(seed, frame, "contaminate", agent.agent_id),
        )
    return DetectionSet.of(FrameTag.EGO_GLOBAL, boxes)


# =============================================================================
# Pose noise
# =============================================================================


def inject_pose_noise(
    true_pose: Pose2, sigma_pos: float, sigma_head: float, rng: np.random.Generator
) -> Pose2:
    """
    Gaussian noise on the transmitted pose; sigma_head is in degrees.

    Standard-normal draws are scaled by the sigmas, so the same stream gives
    proportional perturbations at every noise level.
    """
    if sigma_pos < 0.0 or sigma_head < 0.0:
        raise ValueError("pose noise sigmas must be non-negative")
    z = rng.standard_normal(3)
    return Pose2(
        true_pose.x + sigma_pos * z[0],
        true_pose.y + sigma_pos * z[1],
        true_pose.yaw + math.radians(sigma_head) * z[2],
    )


# =============================================================================
# Frame assembly
# =============================================================================


@dataclass
class FrameBundle:
    """Everything the fusion pipeline and the evaluator need for one frame."""

    scene: Scene
    ego: AgentFrame
    auxiliaries: List[AgentFrame]
    true_poses: Dict[str, Pose2]
    specs: Dict[str, AgentSpec] = field(default_factory=dict)
    seed: int = 0
    extent: MapExtent = field(default_factory=MapExtent)

    @property
    def frame(self) -> int:
        return self.scene.frame

    def stage1(
        self, intermediate_ids: Sequence[str], poses: Mapping[str, Pose2]
    ) -> DetectionSet:
        """Stage-1 oracle bound to this frame."""
        return stage1_oracle(
            ego=self.specs[self.ego.agent_id],
            intermediate=[self.specs[a] for a in intermediate_ids],
            truth=self.scene.objects,
            true_poses=self.true_poses,
            poses_used=poses,
            ego_detections=self.ego.detections,
            seed=self.seed,
            frame=self.frame,
            extent=self.extent,
        )


class ScenarioSimulator:
    """Builds frame bundles for a scenario; frames are independent of each other."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def frame(self, index: int) -> FrameBundle:
        cfg = self.cfg
        scene = generate_scene(cfg, index)
        specs = {spec.agent_id: spec for spec in cfg.agent_specs}

        agent_frames: Dict[str, AgentFrame] = {}
        for spec in cfg.agent_specs:
            true_pose = scene.agent_poses[spec.agent_id]
            b_a = sense(
                spec,
                scene.objects,
                true_pose,
                make_rng(cfg.seed, index, "sense", spec.agent_id),
                cfg.map_extent,
            )
            if spec.agent_id == cfg.ego.agent_id:
                agent_frames[spec.agent_id] = AgentFrame(
                    spec.agent_id, true_pose, b_a, b_a
                )
                continue
            b_pred = decode_surrogate(
                spec, b_a, make_rng(cfg.seed, index, "decode", spec.agent_id)
            )
            transmitted = inject_pose_noise(
                true_pose,
                cfg.pose_noise_sigma,
                cfg.heading_noise_sigma,
                make_rng(cfg.seed, index, "pose_noise", spec.agent_id),
            )
            agent_frames[spec.agent_id] = AgentFrame(
                spec.agent_id, transmitted, b_a, b_pred
            )

        logger.debug(
            f"🎲 Frame {index}: {len(scene.objects)} objects, {len(specs)} agents"
        )
        return FrameBundle(
            scene=scene,
            ego=agent_frames[cfg.ego.agent_id],
            auxiliaries=[agent_frames[a.agent_id] for a in cfg.auxiliaries],
            true_poses=dict(scene.agent_poses),
            specs=specs,
            seed=cfg.seed,
            extent=cfg.map_extent,
        )
