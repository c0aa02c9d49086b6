"""
Posterior coverage metrics.

Weighted angular distance between factorizations, greedy covering numbers and
persistence curves over an angle grid.
"""

from app.services.coverage.wad import angle_matrix, wad, pairwise_wad
from app.services.coverage.covering import (
    DEFAULT_EPSILON_GRID,
    PersistenceCurve,
    covering_number,
    greedy_cover,
    persistence_curve,
)

__all__ = [
    "angle_matrix",
    "wad",
    "pairwise_wad",
    "DEFAULT_EPSILON_GRID",
    "PersistenceCurve",
    "covering_number",
    "greedy_cover",
    "persistence_curve",
]
