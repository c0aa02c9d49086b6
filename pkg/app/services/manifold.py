"""
Oblique Manifold Configuration Space

Points are invertible R x R matrices Q with unit-norm columns (a product of
R unit spheres). Q maps to a factorization through the truncated SVD:
A = max(A_svd Q, 0), W = max(Q^-1 W_svd, 0).

Design decisions:
- Tangent projection and retraction act per column.
- Near-singular points (reciprocal condition number below 1e-12) are
  rejected; the tree treats such steps as infeasible.
- Nearest-neighbour distance is the extrinsic Frobenius norm.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import structlog

from app.services.nmf_model import Factorization
from app.services.nmf_solve import SvdPair

logger = structlog.get_logger(__name__)

RCOND_MIN = 1e-12
NORM_TOL = 1e-10
MAX_SAMPLE_TRIES = 100


class SingularBasisError(ArithmeticError):
    """Raised when a change-of-basis matrix is (numerically) singular or has a zero column."""

    def __init__(self, message: str, rcond: float = 0.0):
        self.rcond = rcond
        super().__init__(f"{message} (rcond={rcond:.3g})")


def reciprocal_condition(M: np.ndarray) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0 or not np.all(np.isfinite(s)):
        return 0.0
    return float(s[-1] / s[0])


@dataclass(frozen=True, eq=False)
class ObliquePoint:
    """Immutable change of basis Q with unit columns and det(Q) != 0."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        norms = np.linalg.norm(Q, axis=0)
        if np.any(np.abs(norms - 1.0) >= NORM_TOL):
            raise ValueError(f"Q columns must have unit norm, got {norms}")
        rcond = reciprocal_condition(Q)
        if rcond <= RCOND_MIN:
            raise SingularBasisError("oblique point is singular", rcond)
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def R(self) -> int:
        return self.Q.shape[0]


def project_to_oblique(M: np.ndarray) -> ObliquePoint:
    """
    Normalize every column of M to unit Euclidean norm.

    Raises:
        SingularBasisError: a zero column, or a singular result
    """
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise SingularBasisError(f"zero column at {np.flatnonzero(norms == 0).tolist()}")
    Q = M / norms
    rcond = reciprocal_condition(Q)
    if rcond <= RCOND_MIN:
        raise SingularBasisError("projected matrix is singular", rcond)
    return ObliquePoint(Q)


def step(Q_from: ObliquePoint, Q_toward: ObliquePoint, s: float) -> ObliquePoint:
    """
    Move from Q_from toward Q_toward by s along the tangent space, then retract.

    Per column: v = d - (q . d) q with d the column of Q_toward - Q_from; the
    new column is (q + s v) / ||q + s v||.

    Raises:
        SingularBasisError: the retracted point is singular
    """
    if s <= 0:
        raise ValueError(f"step size must be positive, got {s}")
    Q = Q_from.Q
    D = Q_toward.Q - Q
    V = D - Q * np.sum(Q * D, axis=0)
    if not np.any(V):
        return Q_from
    return project_to_oblique(Q + s * V)


def sample_uniform(R: int, rng: np.random.Generator) -> ObliquePoint:
    """
    Draw each column uniformly on the unit sphere; redraw near-singular matrices.

    Raises:
        SingularBasisError: 100 consecutive draws were singular
    """
    for attempt in range(MAX_SAMPLE_TRIES):
        G = rng.standard_normal((R, R))
        try:
            return project_to_oblique(G)
        except SingularBasisError:
            logger.debug("oblique_sample_resampled", attempt=attempt)
    raise SingularBasisError(f"no invertible sample after {MAX_SAMPLE_TRIES} draws")


def q_to_factorization(point: ObliquePoint, svd: SvdPair) -> Factorization:
    """A = max(A_svd Q, 0), W = max(Q^-1 W_svd, 0) using a linear solve."""
    rcond = reciprocal_condition(point.Q)
    if rcond <= RCOND_MIN:
        raise SingularBasisError("cannot invert Q", rcond)
    A = svd.A_svd @ point.Q
    W = scipy.linalg.solve(point.Q, svd.W_svd)
    return Factorization(np.maximum(A, 0.0), np.maximum(W, 0.0))


def factorization_to_q(F: Factorization, svd: SvdPair) -> ObliquePoint:
    """Q = argmin ||A - A_svd Q||_F by least squares, projected onto the manifold."""
    Q_raw, *_ = scipy.linalg.lstsq(svd.A_svd, F.A)
    return project_to_oblique(Q_raw)


def distance(P1: ObliquePoint, P2: ObliquePoint) -> float:
    return float(np.linalg.norm(P1.Q - P2.Q))
