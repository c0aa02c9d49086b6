"""
Bayesian NMF Probability Model

Exponential priors on both factors with either a Gaussian or a Uniform
(bounded-noise) likelihood. Provides the log joint, its analytic gradient,
the Hessian-trace term used by the second-order ELBO, and the scale
optimization that rescales (A, W) without changing AW.

Design decisions:
- The Uniform support is the open interval (-eps, eps): a residual equal to
  eps is infeasible.
- Prior curvature is zero, so the Hessian trace is likelihood-only.
- Parameter vectors lay out A column-major followed by W row-major; decoding
  clips negatives to zero without touching the vector itself.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional, Tuple

import numpy as np
import structlog

logger = structlog.get_logger(__name__)


class DimensionMismatchError(ValueError):
    """Raised when matrices disagree with each other or with the ModelSpec."""

    def __init__(self, message: str, expected: Tuple[int, ...], got: Tuple[int, ...]):
        self.expected = expected
        self.got = got
        super().__init__(f"{message}: expected {expected}, got {got}")


class NegativeFactorError(ValueError):
    """Raised when a factorization passed to the model has negative entries."""

    def __init__(self, factor: str, min_value: float):
        self.factor = factor
        self.min_value = min_value
        super().__init__(f"{factor} has negative entries (min={min_value:.3g}); floor it first")


class InfeasibleError(ArithmeticError):
    """Raised when a quantity is undefined because a residual lies outside the Uniform support."""

    def __init__(self, max_residual: float, eps: float):
        self.max_residual = max_residual
        self.eps = eps
        super().__init__(f"max |residual| {max_residual:.6g} is not inside (-{eps:.6g}, {eps:.6g})")


class LikelihoodKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


ScaleObjective = Literal["as_displayed", "beta_squared"]


@dataclass(frozen=True)
class Factorization:
    """A nonnegative pair (A: D x R basis, W: R x N weights)."""

    A: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        W = np.asarray(self.W, dtype=float)
        if A.ndim != 2 or W.ndim != 2 or A.shape[1] != W.shape[0]:
            raise DimensionMismatchError("A columns must match W rows", A.shape, W.shape)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "W", W)

    @property
    def D(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.W.shape[1]

    @property
    def R(self) -> int:
        return self.A.shape[1]

    def reconstruction(self) -> np.ndarray:
        return self.A @ self.W

    def require_nonnegative(self) -> None:
        if self.A.size and self.A.min() < 0:
            raise NegativeFactorError("A", float(self.A.min()))
        if self.W.size and self.W.min() < 0:
            raise NegativeFactorError("W", float(self.W.min()))

    def floored(self) -> "Factorization":
        return Factorization(np.maximum(self.A, 0.0), np.maximum(self.W, 0.0))

    def to_vector(self) -> np.ndarray:
        """Flatten to theta: A column-major, then W row-major."""
        return np.concatenate([self.A.ravel(order="F"), self.W.ravel(order="C")])

    @classmethod
    def from_vector(cls, theta: np.ndarray, D: int, N: int, R: int) -> "Factorization":
        """Decode theta, clipping negative entries to zero."""
        theta = np.asarray(theta, dtype=float)
        expected = R * (D + N)
        if theta.shape != (expected,):
            raise DimensionMismatchError("parameter vector length", (expected,), theta.shape)
        A = theta[: D * R].reshape((D, R), order="F")
        W = theta[D * R:].reshape((R, N), order="C")
        return cls(np.maximum(A, 0.0), np.maximum(W, 0.0))


@dataclass(frozen=True)
class ModelSpec:
    """
    Likelihood plus exponential prior rates.

    Exactly one of sigma2 (Gaussian) or eps (Uniform) is used, selected by
    ``likelihood``. Rates default to ones.
    """

    D: int
    N: int
    R: int
    likelihood: LikelihoodKind
    sigma2: Optional[float] = None
    eps: Optional[float] = None
    lambda_A: Optional[np.ndarray] = field(default=None, repr=False)
    lambda_W: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if min(self.D, self.N, self.R) < 1:
            raise ValueError(f"D, N, R must be positive, got {(self.D, self.N, self.R)}")
        kind = LikelihoodKind(self.likelihood)
        object.__setattr__(self, "likelihood", kind)
        if kind is LikelihoodKind.GAUSSIAN and not (self.sigma2 is not None and self.sigma2 > 0):
            raise ValueError(f"Gaussian likelihood needs sigma2 > 0, got {self.sigma2}")
        if kind is LikelihoodKind.UNIFORM and not (self.eps is not None and self.eps > 0):
            raise ValueError(f"Uniform likelihood needs eps > 0, got {self.eps}")

        lam_A = np.ones((self.D, self.R)) if self.lambda_A is None else np.asarray(self.lambda_A, dtype=float)
        lam_W = np.ones((self.R, self.N)) if self.lambda_W is None else np.asarray(self.lambda_W, dtype=float)
        lam_A = np.broadcast_to(lam_A, (self.D, self.R)).copy()
        lam_W = np.broadcast_to(lam_W, (self.R, self.N)).copy()
        if lam_A.min() <= 0 or lam_W.min() <= 0:
            raise ValueError("prior rates must be strictly positive")
        object.__setattr__(self, "lambda_A", lam_A)
        object.__setattr__(self, "lambda_W", lam_W)

    @classmethod
    def gaussian(cls, D: int, N: int, R: int, sigma2: float, **rates) -> "ModelSpec":
        return cls(D, N, R, LikelihoodKind.GAUSSIAN, sigma2=sigma2, **rates)

    @classmethod
    def uniform(cls, D: int, N: int, R: int, eps: float, **rates) -> "ModelSpec":
        return cls(D, N, R, LikelihoodKind.UNIFORM, eps=eps, **rates)

    @property
    def is_gaussian(self) -> bool:
        return self.likelihood is LikelihoodKind.GAUSSIAN

    @property
    def dim(self) -> int:
        return self.R * (self.D + self.N)

    def check(self, X: np.ndarray, F: Optional[Factorization] = None) -> None:
        if X.shape != (self.D, self.N):
            raise DimensionMismatchError("data matrix", (self.D, self.N), X.shape)
        if F is not None:
            if F.A.shape != (self.D, self.R):
                raise DimensionMismatchError("basis A", (self.D, self.R), F.A.shape)
            if F.W.shape != (self.R, self.N):
                raise DimensionMismatchError("weights W", (self.R, self.N), F.W.shape)


def _log_prior(F: Factorization, spec: ModelSpec) -> float:
    return float(
        np.sum(np.log(spec.lambda_A) - spec.lambda_A * F.A)
        + np.sum(np.log(spec.lambda_W) - spec.lambda_W * F.W)
    )


def max_abs_residual(X: np.ndarray, F: Factorization) -> float:
    return float(np.max(np.abs(X - F.reconstruction())))


def is_feasible(X: np.ndarray, F: Factorization, spec: ModelSpec) -> bool:
    """True when every residual lies strictly inside the Uniform support (always True for Gaussian)."""
    if spec.is_gaussian:
        return True
    return max_abs_residual(X, F) < spec.eps


def log_likelihood(X: np.ndarray, F: Factorization, spec: ModelSpec) -> float:
    D, N = X.shape
    if spec.is_gaussian:
        sq = float(np.sum((X - F.reconstruction()) ** 2))
        return -0.5 * D * N * np.log(2.0 * np.pi * spec.sigma2) - sq / (2.0 * spec.sigma2)
    if max_abs_residual(X, F) < spec.eps:
        return -D * N * np.log(2.0 * spec.eps)
    return -np.inf


def log_joint(X: np.ndarray, F: Factorization, spec: ModelSpec) -> float:
    """
    log p(X, A, W) for the given ModelSpec; -inf when a Uniform residual leaves the support.

    Raises:
        DimensionMismatchError: shapes disagree with spec
        NegativeFactorError: F has negative entries
    """
    spec.check(X, F)
    F.require_nonnegative()
    return _log_prior(F, spec) + log_likelihood(X, F, spec)


def grad_log_joint(X: np.ndarray, F: Factorization, spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Analytic gradient of log_joint with respect to (A, W).

    Under the Uniform likelihood only the prior contributes, and only when F
    is feasible.

    Raises:
        InfeasibleError: Uniform spec with a residual outside the support
    """
    spec.check(X, F)
    if spec.is_gaussian:
        residual = (X - F.reconstruction()) / spec.sigma2
        return residual @ F.W.T - spec.lambda_A, F.A.T @ residual - spec.lambda_W
    worst = max_abs_residual(X, F)
    if not worst < spec.eps:
        raise InfeasibleError(worst, spec.eps)
    return -spec.lambda_A.copy(), -spec.lambda_W.copy()


def hessian_trace_gaussian(F: Factorization, spec: ModelSpec) -> float:
    """Tr(H) = -(1/sigma2) * (N * Tr(A^T A) + D * Tr(W W^T)); never positive."""
    if not spec.is_gaussian:
        raise ValueError("Hessian trace is only defined for the Gaussian likelihood")
    return -(spec.N * float(np.sum(F.A ** 2)) + spec.D * float(np.sum(F.W ** 2))) / spec.sigma2


def hessian_trace_gradient(F: Factorization, spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of hessian_trace_gaussian with respect to (A, W)."""
    if not spec.is_gaussian:
        raise ValueError("Hessian trace is only defined for the Gaussian likelihood")
    return -2.0 * spec.N * F.A / spec.sigma2, -2.0 * spec.D * F.W / spec.sigma2


def scale_objective_value(beta: float, D: int, N: int, K: float, T: float, sigma2: float,
                          objective: ScaleObjective = "as_displayed") -> float:
    """Hessian-trace term as a function of the rescaling factor beta."""
    b = beta if objective == "as_displayed" else beta ** 2
    return -(b * N * K + (D / b) * T) / sigma2


def optimize_scale(F: Factorization, spec: ModelSpec,
                   objective: ScaleObjective = "as_displayed") -> Tuple[float, Factorization]:
    """
    Rescale (A, W) to maximize the Hessian-trace term while keeping AW fixed.

    S normalizes A to unit Euclidean columns (so K = R) and
    T = Tr((S^-1 W)(S^-1 W)^T). The displayed objective is linear in beta,
    giving beta* = sqrt(DT / NK); the ``beta_squared`` reading gives
    (DT / NK) ** 0.25.

    Returns:
        (beta*, (beta* A S, S^-1 W / beta*))

    Raises:
        ValueError: A has a zero column, or the likelihood is not Gaussian
    """
    if not spec.is_gaussian:
        raise ValueError("scale optimization applies to the Gaussian likelihood only")
    norms = np.linalg.norm(F.A, axis=0)
    if np.any(norms == 0):
        logger.debug("scale_rejected_zero_column", columns=np.flatnonzero(norms == 0).tolist())
        raise ValueError(f"A has zero columns at {np.flatnonzero(norms == 0).tolist()}")

    A_unit = F.A / norms
    W_scaled = F.W * norms[:, None]
    K = float(F.R)
    T = float(np.sum(W_scaled ** 2))
    if T == 0:
        return 1.0, Factorization(A_unit, W_scaled)

    ratio = spec.D * T / (spec.N * K)
    beta = float(np.sqrt(ratio) if objective == "as_displayed" else ratio ** 0.25)
    return beta, Factorization(beta * A_unit, W_scaled / beta)


class NMFLogJoint:
    """
    log_joint over flattened parameter vectors.

    Coordinates that decode below zero are clipped, so their partial
    derivatives are zero. Used by the variational layer and the samplers.
    """

    def __init__(self, X: np.ndarray, spec: ModelSpec):
        spec.check(X)
        self.X = X
        self.spec = spec
        self.dim = spec.dim
        self.has_curvature = spec.is_gaussian

    def decode(self, theta: np.ndarray) -> Factorization:
        return Factorization.from_vector(theta, self.spec.D, self.spec.N, self.spec.R)

    def value(self, theta: np.ndarray) -> float:
        return log_joint(self.X, self.decode(theta), self.spec)

    def is_feasible(self, theta: np.ndarray) -> bool:
        return is_feasible(self.X, self.decode(theta), self.spec)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        G_A, G_W = grad_log_joint(self.X, self.decode(theta), self.spec)
        return np.where(theta < 0, 0.0, _flatten(G_A, G_W))

    def hessian_trace(self, theta: np.ndarray) -> float:
        if not self.spec.is_gaussian:
            return 0.0
        return hessian_trace_gaussian(self.decode(theta), self.spec)

    def hessian_trace_gradient(self, theta: np.ndarray) -> np.ndarray:
        if not self.spec.is_gaussian:
            return np.zeros_like(theta)
        G_A, G_W = hessian_trace_gradient(self.decode(theta), self.spec)
        return np.where(theta < 0, 0.0, _flatten(G_A, G_W))


def _flatten(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    return np.concatenate([A.ravel(order="F"), W.ravel(order="C")])
