"""
Deterministic NMF Solvers

Truncated SVD of the data plus Lin's projected-gradient NMF (alternating
nonnegative least squares, each subproblem solved by projected gradient with
an Armijo backtracking search). Restarts drive chain initialization, tree
seeding and empirical noise calibration.

Design decisions:
- Singular values are carried by the basis: A_svd = U_R S_R, W_svd = V_R^T.
- Armijo step-shrink 0.1, sufficient decrease 0.01, inner subproblems capped
  at 1000 iterations; outer tol 1e-4 and 500 iterations.
- Restart i of a run seeded with s uses its own stream seeded s + i.
"""

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import structlog

from app.services.nmf_model import Factorization

logger = structlog.get_logger(__name__)

ARMIJO_BETA = 0.1
ARMIJO_SIGMA = 0.01
MAX_SUBPROBLEM_ITER = 1000
MAX_LINE_SEARCH_STEPS = 20


class InputShapeError(ValueError):
    """Raised when a requested rank does not fit the data."""

    def __init__(self, rank: int, shape: Tuple[int, int]):
        self.rank = rank
        self.shape = shape
        super().__init__(f"rank {rank} must lie in [1, {min(shape)}] for data of shape {shape}")


class ConvergenceError(RuntimeError):
    """Raised when a numerical routine fails to produce a result."""


@dataclass(frozen=True)
class SvdPair:
    """Rank-R split of the truncated SVD: A_svd = U_R S_R, W_svd = V_R^T."""

    A_svd: np.ndarray
    W_svd: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.A_svd.shape[1]


@dataclass
class NMFFitResult:
    """Outcome of one projected-gradient NMF solve."""
    factorization: Factorization
    objective_trace: List[float] = field(default_factory=list)  # ||X - AW||_F^2 per outer iteration
    n_iter: int = 0
    converged: bool = False
    projected_grad_norm: float = 0.0


def truncated_svd(X: np.ndarray, R: int) -> SvdPair:
    """
    Rank-R truncated SVD of X.

    Raises:
        InputShapeError: R outside [1, min(D, N)]
        ConvergenceError: LAPACK failed with both drivers
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= R <= min(X.shape):
        raise InputShapeError(R, X.shape)
    try:
        U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError:
        logger.warning("svd_gesdd_failed_retrying_gesvd", shape=X.shape)
        try:
            U, s, Vt = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge for data of shape {X.shape}") from exc
    return SvdPair(A_svd=U[:, :R] * s[:R], W_svd=Vt[:R, :].copy(), singular_values=s[:R].copy())


def random_init(X: np.ndarray, R: int, rng: np.random.Generator) -> Factorization:
    """Entries i.i.d. uniform on (0, 1], scaled by sqrt(mean(X) / R) with X clipped at zero."""
    D, N = X.shape
    scale = np.sqrt(max(float(np.mean(np.maximum(X, 0.0))), np.finfo(float).tiny) / R)
    A = (1.0 - rng.random((D, R))) * scale
    W = (1.0 - rng.random((R, N))) * scale
    return Factorization(A, W)


def _nls_subproblem(V: np.ndarray, W: np.ndarray, H: np.ndarray, tol: float,
                    max_iter: int = MAX_SUBPROBLEM_ITER) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Solve min_{H >= 0} 0.5 ||V - W H||^2 by projected gradient.

    Returns (H, grad, iterations used).
    """
    WtV = W.T @ V
    WtW = W.T @ W
    alpha = 1.0
    grad = WtW @ H - WtV
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        grad = WtW @ H - WtV
        projgrad = np.linalg.norm(grad[(grad < 0) | (H > 0)])
        if projgrad < tol:
            break

        H_prev = H
        decr_alpha = True
        for inner in range(MAX_LINE_SEARCH_STEPS):
            Hn = np.maximum(H - alpha * grad, 0.0)
            d = Hn - H
            gradd = float(np.sum(grad * d))
            dQd = float(np.sum((WtW @ d) * d))
            suff_decr = (1.0 - ARMIJO_SIGMA) * gradd + 0.5 * dQd < 0
            if inner == 0:
                decr_alpha = not suff_decr
                H_prev = H
            if decr_alpha:
                if suff_decr:
                    H = Hn
                    break
                alpha *= ARMIJO_BETA
            else:
                if not suff_decr or np.array_equal(H_prev, Hn):
                    H = H_prev
                    break
                alpha /= ARMIJO_BETA
                H_prev = Hn
        else:
            if not decr_alpha:
                H = H_prev
    else:
        logger.debug("nls_subproblem_iteration_cap", max_iter=max_iter)
    return H, grad, n_iter


class ProjectedGradientNMF:
    """
    Lin's alternating projected-gradient NMF.

    Example:
        solver = ProjectedGradientNMF(tol=1e-4, max_iter=500)
        result = solver.fit(X, R=3, init=7)
        result.factorization.A.shape  # (D, 3)
    """

    def __init__(self, tol: float = 1e-4, max_iter: int = 500):
        if tol <= 0 or max_iter < 1:
            raise ValueError(f"tol must be > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X: np.ndarray, R: int, init: Union[Factorization, int, None] = None) -> NMFFitResult:
        X = np.asarray(X, dtype=float)
        if not 1 <= R <= min(X.shape):
            raise InputShapeError(R, X.shape)
        n_negative = int(np.sum(X < 0))
        if n_negative:
            logger.warning("nmf_input_has_negative_entries", count=n_negative, min_value=float(X.min()))

        if isinstance(init, Factorization):
            if init.A.shape != (X.shape[0], R) or init.W.shape != (R, X.shape[1]):
                raise InputShapeError(R, X.shape)
            F0 = init.floored()
        else:
            F0 = random_init(X, R, np.random.default_rng(init))

        A, W = F0.A.copy(), F0.W.copy()
        grad_A = A @ (W @ W.T) - X @ W.T
        grad_W = (A.T @ A) @ W - A.T @ X
        init_grad = float(np.sqrt(np.sum(grad_A ** 2) + np.sum(grad_W ** 2)))
        tol_A = tol_W = max(0.001, self.tol) * init_grad

        trace = [float(np.sum((X - A @ W) ** 2))]
        converged = False
        projnorm = init_grad
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            projnorm = float(np.sqrt(
                np.sum(grad_A[(grad_A < 0) | (A > 0)] ** 2) + np.sum(grad_W[(grad_W < 0) | (W > 0)] ** 2)
            ))
            if projnorm <= self.tol * init_grad:
                converged = True
                break

            At, grad_At, iters_A = _nls_subproblem(X.T, W.T, A.T, tol_A)
            A, grad_A = At.T, grad_At.T
            if iters_A == 1:
                tol_A *= 0.1
            W, grad_W, iters_W = _nls_subproblem(X, A, W, tol_W)
            if iters_W == 1:
                tol_W *= 0.1
            trace.append(float(np.sum((X - A @ W) ** 2)))

        logger.debug(
            "lin_pg_nmf_finished",
            n_iter=n_iter,
            converged=converged,
            objective=trace[-1],
            projected_grad_norm=projnorm,
        )
        return NMFFitResult(
            factorization=Factorization(A, W),
            objective_trace=trace,
            n_iter=n_iter,
            converged=converged,
            projected_grad_norm=projnorm,
        )


def lin_pg_nmf(X: np.ndarray, R: int, init: Union[Factorization, int, None] = None,
               tol: float = 1e-4, max_iter: int = 500) -> Factorization:
    """Run Lin's projected-gradient NMF from a factorization or a seed."""
    return ProjectedGradientNMF(tol=tol, max_iter=max_iter).fit(X, R, init).factorization


def lin_restarts(X: np.ndarray, R: int, n_restarts: int, seed: int,
                 tol: float = 1e-4, max_iter: int = 500) -> List[Factorization]:
    """Seeded restarts; restart i uses seed + i."""
    if n_restarts < 1:
        raise ValueError(f"n_restarts must be >= 1, got {n_restarts}")
    solver = ProjectedGradientNMF(tol=tol, max_iter=max_iter)
    return [solver.fit(X, R, seed + i).factorization for i in range(n_restarts)]


def empirical_noise(
    X: np.ndarray,
    R: int,
    n_restarts: int = 10,
    seed: int = 0,
    sigma_source: Literal["first", "best", "mean"] = "first",
    tol: float = 1e-4,
    max_iter: int = 500,
    fits: Optional[List[Factorization]] = None,
) -> Tuple[float, float]:
    """
    Calibrate noise levels from Lin restarts.

    sigma2 is the per-entry squared error ||X - AW||_F^2 / (DN) of the first
    fit by default ("best" and "mean" aggregate over restarts instead); eps is
    the largest absolute residual over all restarts and entries.

    Args:
        fits: reuse precomputed restarts instead of solving again

    Returns:
        (sigma2_emp, eps_emp)
    """
    X = np.asarray(X, dtype=float)
    if fits is None:
        fits = lin_restarts(X, R, n_restarts, seed, tol=tol, max_iter=max_iter)
    D, N = X.shape
    mse = [float(np.sum((X - F.reconstruction()) ** 2)) / (D * N) for F in fits]
    if sigma_source == "first":
        sigma2 = mse[0]
    elif sigma_source == "best":
        sigma2 = min(mse)
    else:
        sigma2 = float(np.mean(mse))
    eps = max(float(np.max(np.abs(X - F.reconstruction()))) for F in fits)
    logger.info("empirical_noise", sigma2=sigma2, eps=eps, n_restarts=len(fits), sigma_source=sigma_source)
    return sigma2, eps
