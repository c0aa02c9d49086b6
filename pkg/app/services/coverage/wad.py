"""
Weighted Angular Distance (WAD)

Compares two factorizations up to NMF's permutation and scaling ambiguity:
columns of A' are matched to columns of A by optimal assignment on the angle
matrix, and the matched angles are averaged with weights taken from the
normalized row sums of the rescaled weight matrices.

Design decisions:
- Assignment by the Hungarian algorithm (scipy linear_sum_assignment).
- Columns are scaled to unit l1 norm by default ("column stochastic"); l2 is
  available through ``normalization``.
- A zero column is 90 degrees from any nonzero column and 0 degrees from
  another zero column; its weight row contributes 0.
"""

from typing import Literal, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.services.nmf_model import DimensionMismatchError, Factorization

Normalization = Literal["l1", "l2"]


def angle_matrix(A: np.ndarray, A_other: np.ndarray) -> np.ndarray:
    """Pairwise column angles in degrees, entry (i, j) between A[:, i] and A_other[:, j]."""
    n1 = np.linalg.norm(A, axis=0)
    n2 = np.linalg.norm(A_other, axis=0)
    safe1 = np.where(n1 > 0, n1, 1.0)
    safe2 = np.where(n2 > 0, n2, 1.0)
    U = (A / safe1)[:, :, None]
    V = (A_other / safe2)[:, None, :]
    # 2 atan2(|u - v|, |u + v|) stays accurate for nearly parallel columns
    angles = np.degrees(2.0 * np.arctan2(np.linalg.norm(U - V, axis=0), np.linalg.norm(U + V, axis=0)))

    zero1 = n1 == 0
    zero2 = n2 == 0
    angles[zero1, :] = 90.0
    angles[:, zero2] = 90.0
    angles[np.ix_(zero1, zero2)] = 0.0
    return angles


def _row_weights(F: Factorization, normalization: Normalization) -> np.ndarray:
    scale = np.sum(F.A, axis=0) if normalization == "l1" else np.linalg.norm(F.A, axis=0)
    totals = np.sum(F.W, axis=1) * scale
    grand = float(np.sum(totals))
    return totals / grand if grand > 0 else np.zeros_like(totals)


def wad(F: Factorization, F_other: Factorization, normalization: Normalization = "l1") -> float:
    """
    Weighted angular distance in degrees, bounded in [0, 90].

    Raises:
        DimensionMismatchError: the factorizations differ in shape
    """
    if F.A.shape != F_other.A.shape or F.W.shape != F_other.W.shape:
        raise DimensionMismatchError("factorization shapes", F.A.shape + F.W.shape,
                                     F_other.A.shape + F_other.W.shape)
    angles = angle_matrix(F.A, F_other.A)
    rows, perm = linear_sum_assignment(angles)
    alpha = angles[rows, perm]

    w = _row_weights(F, normalization)
    w_other = _row_weights(F_other, normalization)[perm]
    return float(np.clip(alpha @ (w + w_other) / 2.0, 0.0, 90.0))


def pairwise_wad(samples: Sequence[Factorization], normalization: Normalization = "l1") -> np.ndarray:
    """Symmetric matrix of WADs with a zero diagonal."""
    n = len(samples)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = wad(samples[i], samples[j], normalization)
    return out
