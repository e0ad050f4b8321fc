"""
Hydra-CP - Pose Graph Optimization Service

Anchor-guided correction of late-branch agent poses. Stage-1 boxes become
fixed anchors; every gated match between an agent's own detection and an
anchor becomes an edge whose residual compares the agent's local observation
with the anchor seen through the agent's estimated pose. Because anchors are
fixed and no edge joins two agents, the problem splits into independent
3-DOF subproblems solved by Levenberg-Marquardt.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from hydra_cp.core.exceptions import FrameTagError, OptimizationError
from hydra_cp.core.geometry import compose, inverse, transform_pose_array, wrap_angles
from hydra_cp.models.config import PgoConfig
from hydra_cp.models.geometry import DetectionSet, FrameTag, Pose2
from hydra_cp.models.results import AnchorNode, PgoResult, PoseEdge
from hydra_cp.services.assignment_service import gated_assignment

# Damping beyond this means no step can decrease the cost any more
_STALL_DAMPING = 1e12


def predict_observation(x_i: Pose2, o_k: Pose2) -> Pose2:
    """Anchor o_k as seen from agent pose x_i."""
    return compose(inverse(x_i), o_k)


@dataclass(frozen=True)
class LateAgent:
    """A variable node: id, current pose estimate and agent-local detections."""

    agent_id: str
    pose_estimate: Pose2
    detections: DetectionSet


@dataclass
class _Subproblem:
    anchors: np.ndarray  # (E, 3) anchor poses per edge
    observations: np.ndarray  # (E, 3)
    weights: np.ndarray  # (E,)


def _residuals(x: np.ndarray, sub: _Subproblem) -> Tuple[np.ndarray, np.ndarray]:
    """Residuals r = z - h(x, o) and their Jacobians w.r.t. x, shapes (E,3), (E,3,3)."""
    c, s = np.cos(x[2]), np.sin(x[2])
    dx = sub.anchors[:, 0] - x[0]
    dy = sub.anchors[:, 1] - x[1]
    hx = c * dx + s * dy
    hy = -s * dx + c * dy
    r = np.stack(
        [
            sub.observations[:, 0] - hx,
            sub.observations[:, 1] - hy,
            wrap_angles(sub.observations[:, 2] - (sub.anchors[:, 2] - x[2])),
        ],
        axis=-1,
    )
    jac = np.zeros((len(r), 3, 3))
    jac[:, 0, 0], jac[:, 0, 1], jac[:, 0, 2] = c, s, -hy
    jac[:, 1, 0], jac[:, 1, 1], jac[:, 1, 2] = -s, c, hx
    jac[:, 2, 2] = 1.0
    return r, jac


def _cost(x: np.ndarray, sub: _Subproblem) -> float:
    r, _ = _residuals(x, sub)
    return float(np.sum(sub.weights * np.sum(r * r, axis=1)))


def _normal_equations(x: np.ndarray, sub: _Subproblem) -> Tuple[np.ndarray, np.ndarray]:
    r, jac = _residuals(x, sub)
    hessian = np.einsum("e,eki,ekj->ij", sub.weights, jac, jac)
    gradient = np.einsum("e,eki,ek->i", sub.weights, jac, r)
    return hessian, gradient


class PoseGraphOptimizer:
    """
    Builds and solves anchor-guided pose graphs.

    max_iters is a per-agent inner-iteration budget shared by all outer
    re-association rounds; every attempted LM step spends one iteration.
    """

    def __init__(self, cfg: PgoConfig):
        self.cfg = cfg

    # ------------------------------------------------------------------
    # Graph construction
    # ------------------------------------------------------------------

    def build_graph(
        self, stage1: DetectionSet, late_agents: Sequence[LateAgent]
    ) -> Tuple[List[AnchorNode], List[PoseEdge]]:
        """Anchors from stage-1 boxes, edges from gated Hungarian matches."""
        if stage1.frame is not FrameTag.EGO_GLOBAL:
            raise FrameTagError("Pose graph anchors must come from an ego-global set")

        anchors = [AnchorNode(d.bev_pose, d.confidence, d.class_id) for d in stage1]
        anchor_xyt = np.array([a.pose.as_tuple() for a in anchors]).reshape(-1, 3)
        anchor_cls = np.array([int(a.class_id) for a in anchors], dtype=int)

        edges: List[PoseEdge] = []
        for agent in late_agents:
            if agent.detections.frame is not FrameTag.AGENT_LOCAL:
                raise FrameTagError(
                    f"Pose graph needs agent-local detections from '{agent.agent_id}'"
                )
            if not anchors or not len(agent.detections):
                continue

            local = np.array([d.bev_pose.as_tuple() for d in agent.detections])
            projected = transform_pose_array(agent.pose_estimate, local)
            det_cls = np.array([int(d.class_id) for d in agent.detections], dtype=int)

            dist = np.hypot(
                projected[:, None, 0] - anchor_xyt[None, :, 0],
                projected[:, None, 1] - anchor_xyt[None, :, 1],
            )
            dyaw = np.abs(wrap_angles(projected[:, None, 2] - anchor_xyt[None, :, 2]))
            feasible = (
                (dist <= self.cfg.gate_dist)
                & (dyaw <= self.cfg.gate_yaw)
                & (det_cls[:, None] == anchor_cls[None, :])
            )

            gamma, beta = self.cfg.gamma, self.cfg.beta
            for i, k in gated_assignment(dist, feasible):
                det = agent.detections[i]
                weight = det.confidence**gamma * anchors[k].confidence**beta
                edges.append(
                    PoseEdge(
                        agent_id=agent.agent_id,
                        anchor_index=k,
                        observation=det.bev_pose,
                        c_aux=det.confidence,
                        weight=float(weight),
                    )
                )
        return anchors, edges

    # ------------------------------------------------------------------
    # Solving
    # ------------------------------------------------------------------

    def _subproblems(
        self,
        anchors: Sequence[AnchorNode],
        edges: Sequence[PoseEdge],
        initial: Dict[str, Pose2],
    ) -> Dict[str, _Subproblem]:
        grouped: Dict[str, List[PoseEdge]] = {agent_id: [] for agent_id in initial}
        for edge in edges:
            if edge.agent_id not in grouped:
                raise OptimizationError(
                    f"Edge references unknown agent '{edge.agent_id}'",
                    details={"agent_id": edge.agent_id},
                )
            if not 0 <= edge.anchor_index < len(anchors):
                raise OptimizationError(
                    f"Edge references unknown anchor {edge.anchor_index}",
                    details={"anchor_index": edge.anchor_index},
                )
            if not np.isfinite(edge.weight) or edge.weight < 0.0:
                raise OptimizationError(
                    f"Edge weight must be finite and >= 0: {edge.weight}"
                )
            grouped[edge.agent_id].append(edge)

        return {
            agent_id: _Subproblem(
                anchors=np.array(
                    [anchors[e.anchor_index].pose.as_tuple() for e in agent_edges]
                ).reshape(-1, 3),
                observations=np.array(
                    [e.observation.as_tuple() for e in agent_edges]
                ).reshape(-1, 3),
                weights=np.array([e.weight for e in agent_edges], dtype=float),
            )
            for agent_id, agent_edges in grouped.items()
        }

    def _levenberg_marquardt(
        self, x0: np.ndarray, subs: Sequence[_Subproblem], budget: int
    ) -> Tuple[np.ndarray, int, float]:
        """
        Damped Gauss-Newton on a stacked vector of 3-DOF poses, one block per
        subproblem. A step is kept only if it lowers the cost.
        """

        def total_cost(x: np.ndarray) -> float:
            return sum(_cost(x[3 * n : 3 * n + 3], sub) for n, sub in enumerate(subs))

        x = x0.copy()
        size = len(x)
        cost = total_cost(x)
        damping = self.cfg.damping_init
        iterations = 0
        while iterations < budget:
            hessian = np.zeros((size, size))
            gradient = np.zeros(size)
            for n, sub in enumerate(subs):
                block = slice(3 * n, 3 * n + 3)
                hessian[block, block], gradient[block] = _normal_equations(
                    x[block], sub
                )
            if np.linalg.norm(gradient) < self.cfg.grad_tol or damping > _STALL_DAMPING:
                break
            iterations += 1
            step = np.linalg.solve(hessian + damping * np.eye(size), -gradient)
            candidate = x + step
            candidate[2::3] = wrap_angles(candidate[2::3])
            candidate_cost = total_cost(candidate)
            if candidate_cost < cost:
                x, cost = candidate, candidate_cost
                damping /= 10.0
            else:
                damping *= 10.0
        return x, iterations, cost

    def optimize(
        self,
        anchors: Sequence[AnchorNode],
        edges: Sequence[PoseEdge],
        initial: Dict[str, Pose2],
        budgets: Optional[Dict[str, int]] = None,
        joint: bool = False,
    ) -> PgoResult:
        """
        Minimize the confidence-weighted squared residuals over agent poses.

        Agents whose normal equations are singular (no positive-weight edge)
        keep their initial pose and are listed in `skipped`.

        Args:
            anchors: Fixed anchor nodes
            edges: Gated edges
            initial: Starting pose per variable agent
            budgets: Remaining inner iterations per agent (default max_iters)
            joint: Solve all agents in one stacked system instead of one by one

        Raises:
            OptimizationError: If an edge references an unknown agent or anchor
        """
        subproblems = self._subproblems(anchors, edges, initial)
        budgets = budgets or {agent_id: self.cfg.max_iters for agent_id in initial}

        result = PgoResult(corrected=dict(initial))
        solvable: List[str] = []
        for agent_id, sub in subproblems.items():
            x0 = np.array(initial[agent_id].as_tuple())
            positive = int(np.count_nonzero(sub.weights > 0.0))
            result.edges_per_agent[agent_id] = positive
            result.initial_cost += _cost(x0, sub)
            result.agent_iterations[agent_id] = 0
            if not len(sub.weights):
                continue
            hessian, _ = _normal_equations(x0, sub)
            if positive == 0 or np.linalg.matrix_rank(hessian) < 3:
                result.skipped.append(agent_id)
                continue
            solvable.append(agent_id)

        final_cost = result.initial_cost
        groups = [solvable] if joint and solvable else [[a] for a in solvable]
        for group in groups:
            x0 = np.concatenate([np.array(initial[a].as_tuple()) for a in group])
            subs = [subproblems[a] for a in group]
            x, iterations, cost = self._levenberg_marquardt(
                x0, subs, min(budgets[a] for a in group)
            )
            final_cost += cost - sum(
                _cost(x0[3 * n : 3 * n + 3], sub) for n, sub in enumerate(subs)
            )
            for n, agent_id in enumerate(group):
                result.corrected[agent_id] = Pose2(*x[3 * n : 3 * n + 3])
                result.agent_iterations[agent_id] = iterations
            result.iterations_used = max(result.iterations_used, iterations)

        result.final_cost = max(final_cost, 0.0)
        return result

    # ------------------------------------------------------------------
    # Outer loop
    # ------------------------------------------------------------------

    def run(self, stage1: DetectionSet, late_agents: Sequence[LateAgent]) -> PgoResult:
        """
        Alternate association and optimization for outer_rounds rounds.

        Each round re-gates edges with the latest estimates. Costs in the
        result refer to the graph of the last round that ran.
        """
        initial = {a.agent_id: a.pose_estimate for a in late_agents}
        if not self.cfg.enabled or not late_agents:
            return PgoResult.passthrough(initial)

        start = time.perf_counter()
        edges: List[PoseEdge] = []
        estimates = dict(initial)
        used = {agent_id: 0 for agent_id in initial}
        result = PgoResult.passthrough(initial)
        for round_index in range(self.cfg.outer_rounds):
            remaining = {a: self.cfg.max_iters - used[a] for a in initial}
            if all(budget <= 0 for budget in remaining.values()):
                break
            agents = [
                LateAgent(a.agent_id, estimates[a.agent_id], a.detections)
                for a in late_agents
            ]
            anchors, edges = self.build_graph(stage1, agents)
            result = self.optimize(anchors, edges, estimates, budgets=remaining)
            for agent_id, spent in result.agent_iterations.items():
                used[agent_id] += spent
            estimates = dict(result.corrected)
            logger.debug(
                f"🔁 PGO round {round_index + 1}: {len(edges)} edges, "
                f"cost {result.initial_cost:.4g} -> {result.final_cost:.4g}"
            )
            if not any(result.agent_iterations.values()):
                break

        result.corrected = estimates
        result.iterations_used = max(used.values(), default=0)
        result.agent_iterations = used
        logger.debug(
            f"⏱️ AG-PGO: {len(late_agents)} agents, {len(edges)} edges, "
            f"{result.iterations_used} iterations in {time.perf_counter() - start:.3f}s"
        )
        return result


def run_agpgo(
    stage1: DetectionSet, late_agents: Sequence[LateAgent], cfg: PgoConfig
) -> PgoResult:
    """Anchor-guided PGO of the late agents against stage-1 anchors."""
    return PoseGraphOptimizer(cfg).run(stage1, late_agents)
