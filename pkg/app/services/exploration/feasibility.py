"""
Adaptive feasibility rules for tree growth.

Gaussian mode thresholds the log joint; the threshold starts at the poorest
seed node and is raised once the temporary-node cap is reached. Uniform
mode requires every residual inside the support and a minimum weighted
angular distance to all current nodes; the angle grows at each restart.
"""

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np
import structlog

from app.services.coverage.wad import Normalization, wad
from app.services.exploration.tree import RRTNode
from app.services.nmf_model import Factorization, LikelihoodKind

logger = structlog.get_logger(__name__)


class FeasibilityRule(ABC):
    mode: LikelihoodKind

    @abstractmethod
    def admits(self, candidate: Factorization, quality: float, nodes: Sequence[RRTNode]) -> bool:
        """True when candidate (with log joint ``quality``) may join the tree."""

    @abstractmethod
    def tighten(self, nodes: Sequence[RRTNode]) -> None:
        """Adapt after the temporary-node cap is reached."""


class QualityThresholdRule(FeasibilityRule):
    mode = LikelihoodKind.GAUSSIAN

    def __init__(self, quality_threshold: float):
        self.quality_threshold = quality_threshold

    def admits(self, candidate: Factorization, quality: float, nodes: Sequence[RRTNode]) -> bool:
        return bool(np.isfinite(quality) and quality >= self.quality_threshold)

    def tighten(self, nodes: Sequence[RRTNode], referent: float = -np.inf) -> None:
        best = max([n.quality for n in nodes] + [referent])
        if best > self.quality_threshold:
            self.quality_threshold = best
            logger.debug("quality_threshold_raised", threshold=best)


class MinimumAngleRule(FeasibilityRule):
    mode = LikelihoodKind.UNIFORM

    def __init__(self, min_angle_deg: float, increment: float, normalization: Normalization = "l1"):
        self.min_angle_deg = min_angle_deg
        self.increment = increment
        self.normalization = normalization

    def nearest_angle(self, candidate: Factorization, nodes: Sequence[RRTNode]) -> float:
        angles = [wad(candidate, n.factorization, self.normalization) for n in nodes]
        return min(angles) if angles else 90.0

    def admits(self, candidate: Factorization, quality: float, nodes: Sequence[RRTNode]) -> bool:
        if not np.isfinite(quality):
            return False
        return self.nearest_angle(candidate, nodes) >= self.min_angle_deg

    def tighten(self, nodes: Sequence[RRTNode]) -> None:
        self.min_angle_deg += self.increment
        logger.info("min_angle_raised", min_angle_deg=self.min_angle_deg)


def feasible(candidate: Factorization, quality: float, rule: FeasibilityRule, nodes: Sequence[RRTNode]) -> bool:
    """Admission test for a scored candidate against the current tree; the rule carries the mode."""
    admitted = rule.admits(candidate, quality, nodes)
    if not admitted:
        logger.debug("candidate_rejected", mode=rule.mode.value, quality=quality)
    return admitted
