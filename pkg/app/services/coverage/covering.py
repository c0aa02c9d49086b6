"""
Covering numbers and persistence curves under WAD.

Centers are restricted to existing samples and chosen greedily: the sample
whose ball (WAD <= epsilon) holds the most uncovered samples wins, ties going
to the lowest index.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.services.coverage.wad import Normalization, pairwise_wad
from app.services.nmf_model import Factorization

DEFAULT_EPSILON_GRID = np.logspace(np.log10(1e-3), np.log10(90.0), 50)


@dataclass(frozen=True)
class PersistenceCurve:
    """Covering number per epsilon (degrees), epsilons ascending."""

    epsilons: np.ndarray
    counts: np.ndarray

    def count_at(self, epsilon: float) -> int:
        """Covering number at the largest grid point not exceeding epsilon."""
        idx = int(np.searchsorted(self.epsilons, epsilon, side="right")) - 1
        return int(self.counts[max(idx, 0)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"epsilon_degrees": self.epsilons, "covering_number": self.counts})

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "PersistenceCurve":
        frame = pd.read_csv(path)
        return cls(frame["epsilon_degrees"].to_numpy(float), frame["covering_number"].to_numpy(int))


def greedy_cover(distances: np.ndarray, epsilon: float) -> int:
    """Greedy center count over a precomputed symmetric distance matrix."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    n = distances.shape[0]
    if n == 0:
        return 0
    balls = distances <= epsilon
    uncovered = np.ones(n, dtype=bool)
    centers = 0
    while uncovered.any():
        gains = (balls & uncovered).sum(axis=1)
        best = int(np.argmax(gains))  # argmax returns the first maximum
        uncovered &= ~balls[best]
        centers += 1
    return centers


def covering_number(samples: Sequence[Factorization], epsilon: float,
                    normalization: Normalization = "l1") -> int:
    if len(samples) == 0:
        raise ValueError("covering number needs at least one sample")
    return greedy_cover(pairwise_wad(samples, normalization), epsilon)


def persistence_curve(
    samples: Sequence[Factorization],
    epsilon_grid: Optional[Sequence[float]] = None,
    normalization: Normalization = "l1",
    distances: Optional[np.ndarray] = None,
) -> PersistenceCurve:
    """
    Covering numbers over an ascending epsilon grid (default: 50 log-spaced
    angles in [1e-3, 90] degrees).

    A cover found at a smaller epsilon also covers at every larger one, so the
    reported count is the running minimum over the grid.
    """
    grid = np.sort(np.asarray(DEFAULT_EPSILON_GRID if epsilon_grid is None else epsilon_grid, dtype=float))
    if len(samples) == 0:
        raise ValueError("persistence curve needs at least one sample")
    if distances is None:
        distances = pairwise_wad(samples, normalization)
    counts = np.array([greedy_cover(distances, eps) for eps in grid], dtype=int)
    return PersistenceCurve(grid, np.minimum.accumulate(counts))
