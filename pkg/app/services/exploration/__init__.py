"""
Posterior exploration with a rapidly-exploring random tree over changes of
basis on the oblique manifold.
"""

from app.services.exploration.explorer import (
    Advanced,
    ExplorationError,
    ExploreReport,
    Trapped,
    explore,
    extend,
    step_schedule,
)
from app.services.exploration.feasibility import (
    FeasibilityRule,
    MinimumAngleRule,
    QualityThresholdRule,
    feasible,
)
from app.services.exploration.tree import NodeKind, RRTNode, RRTree, TreeFullError

__all__ = [
    "Advanced",
    "ExplorationError",
    "ExploreReport",
    "Trapped",
    "explore",
    "extend",
    "step_schedule",
    "FeasibilityRule",
    "MinimumAngleRule",
    "QualityThresholdRule",
    "feasible",
    "NodeKind",
    "RRTNode",
    "RRTree",
    "TreeFullError",
]
