"""
Batch Nonparametric Variational Inference

Fits M uniformly weighted isotropic components by maximizing the approximate
ELBO over means and log-variances with Newton-CG (scipy.optimize.minimize),
supplying the analytic gradient and finite-difference Hessian-vector products.

Design decisions:
- One Newton-CG iteration per outer step; stop when the absolute ELBO change
  drops below tol (1e-4) or after max_iter steps.
- Without likelihood curvature (Uniform) the second-order term is flat in
  sigma2, so each variance is the largest one keeping mu +/- sigma * 1
  feasible; the means move by backtracking ascent that rejects infeasible or
  non-improving steps.
"""

from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import structlog
from scipy.optimize import minimize

from app.services.nmf_model import Factorization, ModelSpec, NMFLogJoint
from app.services.nmf_solve import random_init
from app.services.variational.mixture import (
    LogDensity,
    MixtureError,
    VariationalMixture,
    component_terms,
    entropy_bound_arrays,
    entropy_bound_gradients,
    expectation_arrays,
    squared_distances,
)

logger = structlog.get_logger(__name__)

FD_REL_STEP = 1e-5
MAX_BACKTRACKS = 30
MIN_SIGMA2 = 1e-300


def fd_hessp(grad: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Central finite-difference Hessian-vector product of an analytic gradient."""

    def hessp(x: np.ndarray, p: np.ndarray) -> np.ndarray:
        p_norm = float(np.linalg.norm(p))
        if p_norm == 0:
            return np.zeros_like(p)
        h = FD_REL_STEP * (1.0 + float(np.linalg.norm(x))) / p_norm
        return (grad(x + h * p) - grad(x - h * p)) / (2.0 * h)

    return hessp


def closed_form_sigma2(target: LogDensity, mu: np.ndarray, fallback: float = 1.0) -> float:
    """Single-component optimum sigma2 = -d / Tr(H); fallback without curvature."""
    trace = target.hessian_trace(mu)
    return target.dim / -trace if trace < 0 else fallback


def feasibility_radius(target: LogDensity, mu: np.ndarray, rel_tol: float = 1e-6,
                       max_doublings: int = 80) -> float:
    """
    Largest sigma with decode(mu + sigma * 1) and decode(mu - sigma * 1) feasible.

    Raises:
        MixtureError: mu itself is infeasible
    """
    if not target.is_feasible(mu):
        raise MixtureError("component mean is infeasible")
    ones = np.ones_like(mu)

    def ok(s: float) -> bool:
        return target.is_feasible(mu + s * ones) and target.is_feasible(mu - s * ones)

    lo, hi = 0.0, 1e-3 * (1.0 + float(np.max(np.abs(mu))))
    for _ in range(max_doublings):
        if not ok(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        return hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else rel_tol * hi


class _GaussianObjective:
    """Negative ELBO over x = [means (M*d), log sigma2 (M)] with uniform weights."""

    def __init__(self, target: LogDensity, M: int):
        self.target = target
        self.M = M
        self.d = target.dim
        self.weights = np.full(M, 1.0 / M)

    def unpack(self, x: np.ndarray):
        return x[: self.M * self.d].reshape(self.M, self.d), np.exp(x[self.M * self.d:])

    def elbo(self, x: np.ndarray) -> float:
        means, s = self.unpack(x)
        values, traces = component_terms(means, self.target)
        return entropy_bound_arrays(squared_distances(means), s, self.weights, self.d) + \
            expectation_arrays(values, traces, s, self.weights)

    def fun(self, x: np.ndarray) -> float:
        return -self.elbo(x)

    def jac(self, x: np.ndarray) -> np.ndarray:
        means, s = self.unpack(x)
        g_mu, g_s, _ = entropy_bound_gradients(means, squared_distances(means), s, self.weights)
        for m in range(self.M):
            g_mu[m] += self.weights[m] * (
                self.target.gradient(means[m]) + 0.5 * s[m] * self.target.hessian_trace_gradient(means[m])
            )
            g_s[m] += 0.5 * self.weights[m] * self.target.hessian_trace(means[m])
        return -np.concatenate([g_mu.ravel(), g_s * s])


def _fit_with_curvature(target: LogDensity, means: np.ndarray, sigma2s: np.ndarray,
                        max_iter: int, tol: float) -> VariationalMixture:
    M = means.shape[0]
    objective = _GaussianObjective(target, M)
    x = np.concatenate([means.ravel(), np.log(sigma2s)])
    hessp = fd_hessp(objective.jac)
    current = objective.elbo(x)
    for iteration in range(max_iter):
        result = minimize(objective.fun, x, jac=objective.jac, hessp=hessp, method="Newton-CG",
                          options={"maxiter": 1, "xtol": 1e-12})
        candidate = -float(result.fun)
        if not np.isfinite(candidate) or candidate < current:
            break
        x = result.x
        change = candidate - current
        current = candidate
        if change < tol:
            break
    logger.debug("nvi_newton_cg_finished", M=M, iterations=iteration + 1 if max_iter else 0, elbo=current)
    final_means, final_s = objective.unpack(x)
    return VariationalMixture.from_arrays(final_means, final_s)


def _uniform_objective(target: LogDensity, means: np.ndarray, weights: np.ndarray):
    sigmas = np.array([feasibility_radius(target, mu) for mu in means])
    s = np.maximum(sigmas ** 2, MIN_SIGMA2)
    values, traces = component_terms(means, target)
    value = entropy_bound_arrays(squared_distances(means), s, weights, target.dim) + \
        expectation_arrays(values, traces, s, weights)
    return value, s


def _fit_without_curvature(target: LogDensity, means: np.ndarray, max_iter: int,
                           tol: float) -> VariationalMixture:
    M = means.shape[0]
    weights = np.full(M, 1.0 / M)
    current, s = _uniform_objective(target, means, weights)
    for _ in range(max_iter):
        d2 = squared_distances(means)
        g_mu, _, _ = entropy_bound_gradients(means, d2, s, weights)
        for m in range(M):
            g_mu[m] += weights[m] * target.gradient(means[m])
        scale = float(np.max(np.sqrt(s))) / max(float(np.max(np.abs(g_mu))), 1e-300)
        improved = False
        for _ in range(MAX_BACKTRACKS):
            trial = means + scale * g_mu
            if all(target.is_feasible(mu) for mu in trial):
                value, trial_s = _uniform_objective(target, trial, weights)
                if value > current:
                    change = value - current
                    means, s, current = trial, trial_s, value
                    improved = True
                    break
            scale *= 0.5
        if not improved or change < tol:
            break
    return VariationalMixture.from_arrays(means, s)


def fit_nvi(target: LogDensity, init_means: Sequence[np.ndarray], max_iter: int = 200,
            tol: float = 1e-4, sigma2_init: Optional[Sequence[float]] = None) -> VariationalMixture:
    """
    Fit a uniformly weighted mixture with one component per initial mean.

    Raises:
        MixtureError: an initial mean is infeasible under a curvature-free target
    """
    means = np.vstack([np.asarray(mu, dtype=float) for mu in init_means])
    if not target.has_curvature:
        return _fit_without_curvature(target, means, max_iter, tol)
    if sigma2_init is None:
        sigma2_init = [closed_form_sigma2(target, mu) for mu in means]
    return _fit_with_curvature(target, means, np.asarray(sigma2_init, dtype=float), max_iter, tol)


def nvi_fit(
    X: np.ndarray,
    spec: ModelSpec,
    M: int,
    init: Union[Factorization, Sequence[Factorization], None] = None,
    max_iter: int = 200,
    tol: float = 1e-4,
    seed: int = 0,
) -> VariationalMixture:
    """
    Batch NVI with M components and uniform weights.

    Args:
        init: M factorizations, or one factorization copied M times. When
            omitted (Gaussian only) M random Lin-style initializations are drawn
            from ``seed``.

    Raises:
        ValueError: M < 1, a wrong number of inits, or a Uniform fit without init
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    target = NMFLogJoint(X, spec)
    if init is None:
        if not spec.is_gaussian:
            raise ValueError("Uniform NVI needs a feasible initial factorization")
        rng = np.random.default_rng(seed)
        inits: List[Factorization] = [random_init(X, spec.R, rng) for _ in range(M)]
    elif isinstance(init, Factorization):
        inits = [init] * M
    else:
        inits = list(init)
        if len(inits) != M:
            raise ValueError(f"expected {M} initial factorizations, got {len(inits)}")
    mixture = fit_nvi(target, [F.to_vector() for F in inits], max_iter=max_iter, tol=tol)
    logger.info("nvi_fit_finished", M=M, likelihood=spec.likelihood.value, dim=spec.dim)
    return mixture
