"""
RRT Exploration over Changes of Basis

Grows a tree on the oblique manifold, maps every feasible node to a
factorization and offers it to the online NVI sink.

Design decisions:
- extend() steps cumulatively from the nearest node with step sizes
  s0, s0 * growth, ... and keeps only the last feasible point.
- A failed attempt is an extend that added no node; any advance resets the
  consecutive-failure counter.
- Gaussian mode has no base nodes: the Lin seeds are temporary, the tree
  replaces its lowest-quality node once full. The quality threshold is raised
  once, when the cap is first reached, to the best node (or the best ONVI
  component).
- Uniform mode restarts from the base nodes whenever the temporary-node cap is
  spent, raising the minimum angle; accepted nodes become base nodes.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from app.models.run_config import RRTConfig
from app.services.coverage.wad import Normalization, wad
from app.services.exploration.feasibility import FeasibilityRule, MinimumAngleRule, QualityThresholdRule, feasible
from app.services.exploration.tree import NodeKind, RRTNode, RRTree
from app.services.manifold import (
    ObliquePoint,
    SingularBasisError,
    factorization_to_q,
    q_to_factorization,
    sample_uniform,
    step,
)
from app.services.nmf_model import Factorization, ModelSpec, log_joint, optimize_scale
from app.services.nmf_solve import SvdPair, lin_restarts, truncated_svd
from app.services.variational.nvi import fit_nvi
from app.services.variational.onvi import Accepted, OnlineNVI

logger = structlog.get_logger(__name__)


class ExplorationError(RuntimeError):
    """Raised when the tree cannot be seeded."""


@dataclass(frozen=True)
class Advanced:
    node: RRTNode
    steps: int


@dataclass(frozen=True)
class Trapped:
    reason: str = "first_step_infeasible"


ExtendOutcome = Union[Advanced, Trapped]
Evaluator = Callable[[ObliquePoint], Optional[RRTNode]]


def step_schedule(config: RRTConfig) -> List[float]:
    return [config.s0 * config.growth ** k for k in range(config.max_extend_steps)]


def extend(tree: RRTree, target: ObliquePoint, config: RRTConfig, evaluate: Evaluator) -> ExtendOutcome:
    """
    Extend the node nearest to target toward it.

    ``evaluate`` maps a manifold point to a candidate node, or None when the
    point is infeasible. The last feasible node is inserted into the tree.
    """
    nearest = tree.nearest(target)
    current = nearest.q
    last: Optional[RRTNode] = None
    taken = 0
    for s in step_schedule(config):
        try:
            moved = step(current, target, s)
        except SingularBasisError:
            break
        if moved is current:
            if last is None:
                return Trapped("zero_direction")
            break
        node = evaluate(moved)
        if node is None:
            break
        last, current, taken = node, moved, taken + 1

    if last is None:
        return Trapped()
    tree.insert(last)
    return Advanced(last, taken)


@dataclass
class ExploreReport:
    likelihood: str
    termination_reason: str
    extends: int = 0
    advanced: int = 0
    trapped: int = 0
    nodes_visited: int = 0
    proposals: int = 0
    accepted: int = 0
    restarts: int = 0
    final_nodes: int = 0
    final_base_nodes: int = 0
    quality_threshold: Optional[float] = None
    min_angle_deg: Optional[float] = None
    proposal_log: List[Dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict:
        data = {k: v for k, v in self.__dict__.items() if k != "proposal_log"}
        return data


class _NodeFactory:
    """Maps manifold points to scored candidate nodes under the active rule."""

    def __init__(self, X: np.ndarray, spec: ModelSpec, svd: SvdPair, rule: FeasibilityRule,
                 tree: RRTree, scale_objective: str):
        self.X = X
        self.spec = spec
        self.svd = svd
        self.rule = rule
        self.tree = tree
        self.scale_objective = scale_objective

    def factorization(self, q: ObliquePoint) -> Optional[Factorization]:
        try:
            F = q_to_factorization(q, self.svd)
        except SingularBasisError:
            return None
        if self.spec.is_gaussian:
            try:
                _, F = optimize_scale(F, self.spec, self.scale_objective)
            except ValueError:
                return None
        return F

    def __call__(self, q: ObliquePoint) -> Optional[RRTNode]:
        F = self.factorization(q)
        if F is None:
            return None
        quality = log_joint(self.X, F, self.spec)
        if not feasible(F, quality, self.rule, self.tree.nodes):
            return None
        return RRTNode(q, F, quality, NodeKind.TEMPORARY)


def _seed_nodes(X: np.ndarray, spec: ModelSpec, svd: SvdPair, seeds: Sequence[Factorization],
                scale_objective: str, kind: NodeKind) -> List[RRTNode]:
    nodes = []
    for i, F in enumerate(seeds):
        try:
            q = factorization_to_q(F, svd)
        except SingularBasisError:
            logger.warning("seed_node_singular", index=i)
            continue
        if spec.is_gaussian:
            try:
                _, F = optimize_scale(F, spec, scale_objective)
            except ValueError:
                logger.warning("seed_node_zero_column", index=i)
                continue
        else:
            try:
                mapped = q_to_factorization(q, svd)
            except SingularBasisError:
                mapped = None
            if mapped is not None and np.isfinite(log_joint(X, mapped, spec)):
                F = mapped
        quality = log_joint(X, F, spec)
        if not np.isfinite(quality):
            logger.warning("seed_node_infeasible", index=i)
            continue
        nodes.append(RRTNode(q, F, quality, kind))
    return nodes


def _wad_to_nearest(node: RRTNode, nodes: Sequence[RRTNode], normalization: Normalization) -> Optional[float]:
    others = [n for n in nodes if n is not node and n.factorization is not None]
    if not others:
        return None
    return float(min(wad(node.factorization, n.factorization, normalization) for n in others))


def explore(
    X: np.ndarray,
    spec: ModelSpec,
    config: RRTConfig,
    sink: OnlineNVI,
    seed: int = 0,
    seeds: Optional[Sequence[Factorization]] = None,
    lin_tol: float = 1e-4,
    lin_max_iter: int = 500,
    scale_objective: str = "as_displayed",
    normalization: Normalization = "l1",
) -> ExploreReport:
    """
    Grow the tree until the sink has processed max_onvi_components proposals
    or max_failed_attempts consecutive extends are trapped.

    Args:
        seeds: starting factorizations; n_init_restarts Lin fits when omitted

    Raises:
        ExplorationError: no usable seed node
    """
    config = config.resolved(spec.likelihood.value)
    spec.check(X)
    rng = np.random.default_rng(seed)
    svd = truncated_svd(X, spec.R)

    if seeds is None:
        seeds = lin_restarts(X, spec.R, config.n_init_restarts, seed, tol=lin_tol, max_iter=lin_max_iter)

    gaussian = spec.is_gaussian
    kind = NodeKind.TEMPORARY if gaussian else NodeKind.BASE
    initial = _seed_nodes(X, spec, svd, seeds, scale_objective, kind)
    if not initial:
        raise ExplorationError("no feasible seed node for the tree")

    tree = RRTree(config.max_temp_nodes, replace_when_full=gaussian)
    if gaussian:
        rule: FeasibilityRule = QualityThresholdRule(min(n.quality for n in initial))
    else:
        rule = MinimumAngleRule(config.min_angle_deg, config.min_angle_increment, normalization)
    for node in initial:
        tree.insert(node)
    evaluate = _NodeFactory(X, spec, svd, rule, tree, scale_objective)

    def done() -> bool:
        return sink.processed >= config.max_onvi_components or sink.exhausted

    if gaussian:
        best = tree.best_node()
        refined = fit_nvi(sink.target, [best.factorization.to_vector()], max_iter=sink.criteria.nvi_max_iter,
                          tol=sink.criteria.tol)
        sink.propose(refined.means[0], source="rrt_seed_nvi")
    for node in initial:
        if done():
            break
        outcome = sink.propose(node.factorization.to_vector(), source="rrt_seed",
                               wad_to_nearest=_wad_to_nearest(node, tree.nodes, normalization))
        if not gaussian and not isinstance(outcome, Accepted):
            logger.debug("seed_node_not_accepted", quality=node.quality)

    report = ExploreReport(likelihood=spec.likelihood.value, termination_reason="max_onvi_components")
    failures = 0
    threshold_raised = False
    while not done():
        if failures >= config.max_failed_attempts:
            report.termination_reason = "max_failed_attempts"
            break
        target = sample_uniform(spec.R, rng)
        outcome = extend(tree, target, config, evaluate)
        report.extends += 1
        if isinstance(outcome, Trapped):
            failures += 1
            report.trapped += 1
            continue
        failures = 0
        report.advanced += 1
        report.nodes_visited += 1
        node = outcome.node
        result = sink.propose(node.factorization.to_vector(), source="rrt",
                              wad_to_nearest=_wad_to_nearest(node, tree.nodes, normalization))

        if gaussian:
            if tree.saturated and not threshold_raised:
                threshold_raised = True
                referent = -np.inf
                if config.threshold_referent == "onvi" and sink.mixture is not None:
                    referent = max(sink.target.value(mu) for mu in sink.mixture.means)
                rule.tighten(tree.nodes, referent)
        else:
            if isinstance(result, Accepted):
                tree.promote(node)
            if tree.temporary_full:
                cleared = tree.clear_temporary()
                rule.tighten(tree.nodes)
                report.restarts += 1
                logger.info("rrt_restart", cleared=cleared, base_nodes=len(tree.base_nodes),
                            min_angle_deg=rule.min_angle_deg)

    report.proposals = sink.processed
    report.accepted = sink.accepted
    report.final_nodes = len(tree)
    report.final_base_nodes = len(tree.base_nodes)
    report.proposal_log = list(sink.history)
    if isinstance(rule, QualityThresholdRule):
        report.quality_threshold = rule.quality_threshold
    else:
        report.min_angle_deg = rule.min_angle_deg
    logger.info("rrt_explore_finished", **report.to_dict())
    return report
