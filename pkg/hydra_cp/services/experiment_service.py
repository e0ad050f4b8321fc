"""
Hydra-CP - Experiment Service

Runs fusion methods over the frames of a scenario and aggregates the results
into reports: single runs, parameter sweeps, the classifier/PGO ablation
grid and domain score statistics. Frames are independent, so they can be
spread over worker processes; results are always merged in frame order.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from loguru import logger

from hydra_cp.core.exceptions import ConfigValidationError
from hydra_cp.core.logging import log_performance
from hydra_cp.core.scenario_loader import LoadedScenario, set_dotted
from hydra_cp.core.seeding import derive_seed
from hydra_cp.models.config import (
    METHOD_PRESETS,
    AgentKind,
    ExperimentConfig,
    FusionMethod,
    PgoMode,
)
from hydra_cp.models.results import (
    ApReport,
    Branch,
    PoseErrorStats,
    RunReport,
    ScoreStats,
)
from hydra_cp.services.domain_service import DomainClassifier
from hydra_cp.services.evaluation_service import (
    ApAccumulator,
    combine_pose_errors,
    pose_error_stats,
)
from hydra_cp.services.fusion_service import HybridFusionService
from hydra_cp.services.simulation_service import ScenarioSimulator

T = TypeVar("T")

ABLATION_SIGMA = 0.4
ABLATION_GRID: Tuple[Tuple[bool, bool, FusionMethod], ...] = (
    (False, False, FusionMethod.INTERMEDIATE_ONLY),
    (False, True, FusionMethod.HYDRA_NO_CLASSIFIER),
    (True, False, FusionMethod.HYDRA_NO_PGO),
    (True, True, FusionMethod.HYDRA),
)
SWEEP_DEFAULT_METHODS = (
    FusionMethod.NO_FUSION,
    FusionMethod.LATE_ONLY,
    FusionMethod.INTERMEDIATE_ONLY,
    FusionMethod.HYDRA,
)
SCORE_SETTINGS = (("w/o noise", 0.0, 0.0), ("w/ noise", 0.4, 0.4))


# =============================================================================
# Per-frame work
# =============================================================================


@dataclass
class FrameOutcome:
    """Everything one frame contributes to a method's report."""

    frame: int
    accumulator: ApAccumulator
    pose_before: PoseErrorStats
    pose_after: PoseErrorStats
    routing: Dict[str, int]
    pgo_iterations: int
    seconds: float


def run_frame(
    config: ExperimentConfig, method: FusionMethod, frame: int
) -> FrameOutcome:
    """Simulate one frame, fuse it with `method` and score the result."""
    start = time.perf_counter()
    bundle = ScenarioSimulator(config.scenario).frame(frame)
    service = HybridFusionService(
        config.classifier, config.pgo, config.fusion, METHOD_PRESETS[method]
    )
    output = service.hydra_pipeline(bundle.ego, bundle.auxiliaries, bundle.stage1)

    accumulator = ApAccumulator(config.eval)
    accumulator.add_frame(frame, output.final, bundle.scene.objects)

    transmitted = {f.agent_id: f.pose for f in bundle.auxiliaries}
    corrected_ids = sorted(output.pgo.corrected)
    truth = {a: bundle.true_poses[a] for a in corrected_ids}
    return FrameOutcome(
        frame=frame,
        accumulator=accumulator,
        pose_before=pose_error_stats({a: transmitted[a] for a in corrected_ids}, truth),
        pose_after=pose_error_stats(
            {a: output.poses_used[a] for a in corrected_ids}, truth
        ),
        routing={
            Branch.INTERMEDIATE.value: len(output.intermediate_ids),
            Branch.LATE.value: len(output.late_ids),
        },
        pgo_iterations=output.pgo.iterations_used,
        seconds=time.perf_counter() - start,
    )


def _run_frame_task(args: Tuple[ExperimentConfig, FusionMethod, int]) -> FrameOutcome:
    return run_frame(*args)


def _map_ordered(fn: Callable[[Any], T], tasks: Sequence[Any], jobs: int) -> List[T]:
    """Map over tasks, in worker processes when jobs > 1; output keeps task order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# =============================================================================
# Results
# =============================================================================


@dataclass
class MethodRun:
    """Report of one method on one configuration plus its wall-clock timings."""

    report: RunReport
    frame_seconds: List[float] = field(default_factory=list)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.frame_seconds))


@dataclass
class SweepPoint:
    key: str
    value: Any
    seed: int
    loaded: LoadedScenario
    runs: Dict[FusionMethod, MethodRun]


@dataclass
class AblationRow:
    classifier: bool
    pgo: bool
    method: FusionMethod
    ap: ApReport


@dataclass
class ScoreTable:
    """Domain score statistics per (noise setting, agent kind)."""

    rows: List[ScoreStats] = field(default_factory=list)
    margins: Dict[str, Optional[float]] = field(default_factory=dict)
    raw: Dict[Tuple[str, str], List[float]] = field(default_factory=dict)


class ExperimentService:
    """Runs methods over scenarios; `jobs` worker processes share the frames."""

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, jobs)

    def run_method(self, config: ExperimentConfig, method: FusionMethod) -> MethodRun:
        start = time.perf_counter()
        tasks = [(config, method, frame) for frame in range(config.scenario.n_frames)]
        outcomes = _map_ordered(_run_frame_task, tasks, self.jobs)

        accumulator = ApAccumulator(config.eval)
        routing = {Branch.INTERMEDIATE.value: 0, Branch.LATE.value: 0}
        for outcome in outcomes:
            accumulator.merge(outcome.accumulator)
            for branch, count in outcome.routing.items():
                routing[branch] += count

        preset = METHOD_PRESETS[method]
        report = RunReport(
            scenario=config.scenario.name,
            method=method.value,
            seed=config.scenario.seed,
            n_frames=config.scenario.n_frames,
            pose_noise_sigma=config.scenario.pose_noise_sigma,
            pgo_enabled=preset.pgo_mode is not PgoMode.OFF and config.pgo.enabled,
            ap=accumulator.report(),
            pose_error_before=combine_pose_errors([o.pose_before for o in outcomes]),
            pose_error_after=combine_pose_errors([o.pose_after for o in outcomes]),
            routing=routing,
            pgo_iterations_max=max((o.pgo_iterations for o in outcomes), default=0),
        )
        log_performance(
            f"run {method.value}",
            time.perf_counter() - start,
            frames=len(outcomes),
            jobs=self.jobs,
        )
        return MethodRun(report=report, frame_seconds=[o.seconds for o in outcomes])

    def sweep(
        self,
        loaded: LoadedScenario,
        key: str,
        values: Sequence[Any],
        methods: Sequence[FusionMethod],
        rebuild: Callable[[Sequence[str], int], LoadedScenario],
    ) -> List[SweepPoint]:
        """
        One run per (value, method). Each point gets the sub-seed
        derive_seed(master, key, value) so points are independent yet reproducible.
        Every point is validated before the first one runs.

        Args:
            rebuild: Reloads the scenario with extra overrides and a seed

        Raises:
            ConfigValidationError: empty value list, or a point fails validation
        """
        if not values:
            raise ConfigValidationError(f"sweep {key}: value list is empty")
        if not methods:
            raise ConfigValidationError(f"sweep {key}: no methods selected")

        master = loaded.config.scenario.seed
        prepared = []
        for value in values:
            seed = derive_seed(master, key, value)
            prepared.append(
                (value, seed, rebuild([f"{key}={_yaml_scalar(value)}"], seed))
            )

        points: List[SweepPoint] = []
        for value, seed, point in prepared:
            runs = {m: self.run_method(point.config, m) for m in methods}
            points.append(
                SweepPoint(
                    key=key, value=value, seed=seed, loaded=point, runs=runs
                )
            )
            logger.info(f"📈 Sweep point {key}={value} done ({len(methods)} methods)")
        return points

    def ablate(self, config: ExperimentConfig) -> List[AblationRow]:
        """Classifier off/on x PGO off/on, under ABLATION_SIGMA pose noise."""
        noisy = _with_values(config, {"scenario.pose_noise_sigma": ABLATION_SIGMA})
        rows = []
        for classifier, pgo, method in ABLATION_GRID:
            run = self.run_method(noisy, method)
            rows.append(
                AblationRow(
                    classifier=classifier, pgo=pgo, method=method, ap=run.report.ap
                )
            )
        return rows

    def scores(self, config: ExperimentConfig) -> ScoreTable:
        """Domain score statistics per agent kind, without and with pose noise."""
        table = ScoreTable()
        kinds = {spec.agent_id: spec.kind for spec in config.scenario.auxiliaries}
        if not kinds or config.scenario.n_frames == 0:
            return table
        for label, sigma, heading in SCORE_SETTINGS:
            variant = _with_values(
                config,
                {
                    "scenario.pose_noise_sigma": sigma,
                    "scenario.heading_noise_sigma": heading,
                },
            )
            tasks = [(variant, frame) for frame in range(variant.scenario.n_frames)]
            per_frame = _map_ordered(_score_frame_task, tasks, self.jobs)

            by_kind: Dict[AgentKind, List[float]] = {}
            for frame_scores in per_frame:
                for agent_id, score in frame_scores:
                    by_kind.setdefault(kinds[agent_id], []).append(score)

            for kind in AgentKind:
                scores = by_kind.get(kind)
                if not scores:
                    continue
                values = np.array(scores)
                table.raw[(label, kind.value)] = list(scores)
                table.rows.append(
                    ScoreStats(
                        kind=kind.value,
                        noise=label,
                        mean=float(values.mean()),
                        max=float(values.max()),
                        min=float(values.min()),
                        std=float(values.std()),
                        samples=len(values),
                    )
                )
            hom = by_kind.get(AgentKind.HOMOGENEOUS, [])
            het = [s for k, v in by_kind.items() if k.is_heterogeneous for s in v]
            table.margins[label] = float(min(hom) - max(het)) if hom and het else None
        return table


def _score_frame(config: ExperimentConfig, frame: int) -> List[Tuple[str, float]]:
    bundle = ScenarioSimulator(config.scenario).frame(frame)
    classifier = DomainClassifier(config.classifier)
    verdicts = (
        classifier.classify_agent(f.agent_id, f.detections, f.decoded)
        for f in bundle.auxiliaries
    )
    return [(v.agent_id, v.s_domain) for v in verdicts]


def _score_frame_task(args: Tuple[ExperimentConfig, int]) -> List[Tuple[str, float]]:
    return _score_frame(*args)


def _with_values(config: ExperimentConfig, values: Dict[str, Any]) -> ExperimentConfig:
    tree = config.model_dump(mode="json")
    for key, value in values.items():
        set_dotted(tree, key, value)
    return ExperimentConfig.model_validate(tree)


def _yaml_scalar(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
