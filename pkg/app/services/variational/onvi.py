"""
Online NVI

Candidates arrive one at a time (from the tree or a sampler). Each is tried
as a new component: existing weights are scaled by (1 - w_new) and the new
component's variance and weight are optimized under the approximate ELBO. The
candidate is kept when the ELBO gain clears the acceptance bar, after which
components whose removal costs less than min_gain are pruned.

Design decisions:
- Gaussian: optimize (log sigma2, logit w) by Newton-CG; the bar is min_gain.
- Uniform: sigma2 is fixed to the single-component NVI variance and only the
  weight is optimized; the bar is entropy_gain_threshold.
- Pruning visits components in ascending weight order, never removes the
  newly added component, and never lets the ELBO fall below the bar the
  candidate cleared.
- A rejected proposal leaves the mixture object untouched.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
import structlog
from scipy.optimize import minimize
from scipy.special import expit, logit

from app.models.run_config import ONVIConfig
from app.services.nmf_model import ModelSpec, NMFLogJoint
from app.services.variational.mixture import (
    LogDensity,
    MixtureComponent,
    VariationalMixture,
    component_terms,
    entropy_bound_arrays,
    entropy_bound_gradients,
    entropy_lower_bound,
    expectation_arrays,
    squared_distances,
)
from app.services.variational.nvi import closed_form_sigma2, fd_hessp, fit_nvi

logger = structlog.get_logger(__name__)

MAX_PROPOSAL_ITER = 50


@dataclass(frozen=True)
class Accepted:
    mixture: VariationalMixture
    gain: float
    weight: float
    pruned: int = 0


@dataclass(frozen=True)
class Rejected:
    reason: str
    gain: float = -np.inf


ProposalOutcome = Union[Accepted, Rejected]


def entropy_gain_threshold(mix: VariationalMixture, sigma2: float) -> float:
    """
    Entropy gained by a hypothetical component offset by sqrt(sigma2) in every
    coordinate from the largest-weight component.

    The hypothetical shares the anchor's variance and enters with weight
    1 / (M + 1), existing weights scaled by M / (M + 1).
    """
    k = int(np.argmax(mix.weights))
    anchor = mix.components[k]
    M = mix.M
    hypothetical = VariationalMixture.from_arrays(
        np.vstack([mix.means, anchor.mu + np.sqrt(sigma2)]),
        np.append(mix.sigma2s, anchor.sigma2),
        np.append(mix.weights * M / (M + 1.0), 1.0 / (M + 1.0)),
    )
    return entropy_lower_bound(hypothetical) - entropy_lower_bound(mix)


class _ComponentTable:
    """Per-component quantities that stay fixed while weights and one variance move."""

    def __init__(self, means: np.ndarray, values: np.ndarray, traces: np.ndarray):
        self.means = means
        self.values = values
        self.traces = traces
        self.d2 = squared_distances(means)
        self.dim = means.shape[1]

    def elbo(self, sigma2s: np.ndarray, weights: np.ndarray) -> float:
        expectation = expectation_arrays(self.values, self.traces, sigma2s, weights)
        if not np.isfinite(expectation):
            return -np.inf
        return entropy_bound_arrays(self.d2, sigma2s, weights, self.dim) + expectation

    def gradients(self, sigma2s: np.ndarray, weights: np.ndarray):
        _, g_s, g_w = entropy_bound_gradients(self.means, self.d2, sigma2s, weights)
        g_s = g_s + 0.5 * weights * self.traces
        g_w = g_w + self.values + 0.5 * sigma2s * self.traces
        return g_s, g_w

    def subset(self, keep: List[int]) -> "_ComponentTable":
        table = object.__new__(_ComponentTable)
        table.means = self.means[keep]
        table.values = self.values[keep]
        table.traces = self.traces[keep]
        table.d2 = self.d2[np.ix_(keep, keep)]
        table.dim = self.dim
        return table


def _optimize_new_component(table: _ComponentTable, base_sigma2s: np.ndarray, base_weights: np.ndarray,
                            sigma2_new: float, fixed_sigma2: bool, tol: float):
    """Maximize the ELBO over (log sigma2_new, logit w_new); returns (elbo, sigma2_new, w_new)."""
    M = base_weights.shape[0]

    def unpack(x):
        s_new = sigma2_new if fixed_sigma2 else float(np.exp(x[0]))
        v = float(expit(x[-1]))
        return np.append(base_sigma2s, s_new), np.append(base_weights * (1.0 - v), v), s_new, v

    def fun(x):
        s, w, _, _ = unpack(x)
        return -table.elbo(s, w)

    def jac(x):
        s, w, s_new, v = unpack(x)
        g_s, g_w = table.gradients(s, w)
        d_v = float(-base_weights @ g_w[:M] + g_w[M]) * v * (1.0 - v)
        if fixed_sigma2:
            return -np.array([d_v])
        return -np.array([g_s[M] * s_new, d_v])

    x = np.array([logit(1.0 / (M + 1.0))]) if fixed_sigma2 else \
        np.array([np.log(sigma2_new), logit(1.0 / (M + 1.0))])
    current = -fun(x)
    hessp = fd_hessp(jac)
    for _ in range(MAX_PROPOSAL_ITER):
        result = minimize(fun, x, jac=jac, hessp=hessp, method="Newton-CG", options={"maxiter": 1, "xtol": 1e-12})
        candidate = -float(result.fun)
        if not np.isfinite(candidate) or candidate < current:
            break
        x = result.x
        change = candidate - current
        current = candidate
        if change < tol:
            break
    s, w, s_new, v = unpack(x)
    return current, s, w


def _reoptimize_weights(table: _ComponentTable, sigma2s: np.ndarray, weights: np.ndarray, tol: float):
    """Block re-optimization of all weights through a softmax parameterization."""

    def softmax(a):
        e = np.exp(a - a.max())
        return e / e.sum()

    def fun(a):
        return -table.elbo(sigma2s, softmax(a))

    def jac(a):
        w = softmax(a)
        _, g_w = table.gradients(sigma2s, w)
        return -(w * (g_w - w @ g_w))

    a = np.log(np.maximum(weights, 1e-300))
    current = -fun(a)
    hessp = fd_hessp(jac)
    for _ in range(MAX_PROPOSAL_ITER):
        result = minimize(fun, a, jac=jac, hessp=hessp, method="Newton-CG", options={"maxiter": 1, "xtol": 1e-12})
        candidate = -float(result.fun)
        if not np.isfinite(candidate) or candidate < current:
            break
        change = candidate - current
        a, current = result.x, candidate
        if change < tol:
            break
    return current, softmax(a)


def _prune(table: _ComponentTable, sigma2s: np.ndarray, weights: np.ndarray, protected: int,
           min_gain: float, floor: float):
    keep = list(range(len(weights)))
    current = table.elbo(sigma2s, weights)
    removed = 0
    changed = True
    while changed and len(keep) > 1:
        changed = False
        order = sorted((i for i in range(len(keep)) if keep[i] != protected), key=lambda i: weights[i])
        for i in order:
            trial_keep = keep[:i] + keep[i + 1:]
            trial_w = weights[[j for j in range(len(keep)) if j != i]]
            trial_w = trial_w / trial_w.sum()
            trial_s = sigma2s[[j for j in range(len(keep)) if j != i]]
            value = table.subset(trial_keep).elbo(trial_s, trial_w)
            if current - value < min_gain and value >= floor:
                keep, weights, sigma2s, current = trial_keep, trial_w, trial_s, value
                removed += 1
                changed = True
                break
    return keep, sigma2s, weights, current, removed


def propose_component(mix: Optional[VariationalMixture], candidate_mu: np.ndarray, target: LogDensity,
                      criteria: ONVIConfig, sigma2_fixed: Optional[float] = None) -> ProposalOutcome:
    """
    Try candidate_mu as a new component of mix (or as the first component).

    Args:
        sigma2_fixed: component variance for curvature-free targets

    Returns:
        Accepted with the new mixture, or Rejected with a reason
    """
    candidate_mu = np.asarray(candidate_mu, dtype=float)
    value = target.value(candidate_mu)
    if not np.isfinite(value):
        return Rejected("infeasible_candidate")
    if not target.has_curvature and sigma2_fixed is None:
        raise ValueError("a curvature-free target needs a fixed component variance")
    sigma2_new = closed_form_sigma2(target, candidate_mu) if target.has_curvature else sigma2_fixed

    if mix is None:
        first = VariationalMixture((MixtureComponent(candidate_mu, sigma2_new, 1.0),))
        return Accepted(first, gain=np.inf, weight=1.0)
    if candidate_mu.shape != (mix.dim,):
        raise ValueError(f"candidate has shape {candidate_mu.shape}, mixture dimension is {mix.dim}")

    means = np.vstack([mix.means, candidate_mu])
    values, traces = component_terms(means, target)
    table = _ComponentTable(means, values, traces)
    old_elbo = table.subset(list(range(mix.M))).elbo(mix.sigma2s, mix.weights)

    new_elbo, sigma2s, weights = _optimize_new_component(
        table, mix.sigma2s, mix.weights, sigma2_new, fixed_sigma2=not target.has_curvature, tol=criteria.tol
    )
    if criteria.weight_update == "reoptimized":
        new_elbo, weights = _reoptimize_weights(table, sigma2s, weights, criteria.tol)

    required = criteria.min_gain if target.has_curvature else entropy_gain_threshold(mix, sigma2_fixed)
    gain = new_elbo - old_elbo
    if not gain >= required:
        return Rejected("insufficient_gain", gain=gain)

    keep, sigma2s, weights, _, removed = _prune(
        table, sigma2s, weights, protected=mix.M, min_gain=criteria.min_gain, floor=old_elbo + required
    )
    new_weight = float(weights[keep.index(mix.M)])
    mixture = VariationalMixture.from_arrays(means[keep], sigma2s, weights)
    return Accepted(mixture, gain=gain, weight=new_weight, pruned=removed)


def onvi_propose(mix: Optional[VariationalMixture], candidate_mu: np.ndarray, X: np.ndarray, spec: ModelSpec,
                 criteria: ONVIConfig, sigma2_fixed: Optional[float] = None) -> ProposalOutcome:
    return propose_component(mix, candidate_mu, NMFLogJoint(X, spec), criteria, sigma2_fixed)


@dataclass
class OnlineNVI:
    """
    Stateful ONVI sink fed by the tree and the samplers.

    In Uniform mode the component variance is fixed at the first feasible
    proposal by fitting single-component NVI there.
    """

    target: LogDensity
    criteria: ONVIConfig = field(default_factory=ONVIConfig)
    max_components: Optional[int] = None
    mixture: Optional[VariationalMixture] = None
    sigma2_fixed: Optional[float] = None
    processed: int = 0
    accepted: int = 0
    rejected: int = 0
    history: List[Dict] = field(default_factory=list)

    @classmethod
    def for_data(cls, X: np.ndarray, spec: ModelSpec, criteria: Optional[ONVIConfig] = None,
                 max_components: Optional[int] = None) -> "OnlineNVI":
        return cls(NMFLogJoint(X, spec), criteria or ONVIConfig(), max_components)

    @property
    def exhausted(self) -> bool:
        return self.max_components is not None and self.processed >= self.max_components

    def propose(self, theta: np.ndarray, source: str = "unknown", **details) -> ProposalOutcome:
        """Offer theta; extra keyword details are stored in the proposal record."""
        theta = np.asarray(theta, dtype=float)
        if not self.target.has_curvature and self.sigma2_fixed is None and self.target.is_feasible(theta):
            single = fit_nvi(self.target, [theta], max_iter=self.criteria.nvi_max_iter, tol=self.criteria.tol)
            self.sigma2_fixed = float(single.sigma2s[0])
            logger.info("onvi_variance_fixed", sigma2=self.sigma2_fixed)

        outcome = propose_component(self.mixture, theta, self.target, self.criteria, self.sigma2_fixed)
        self.processed += 1
        if isinstance(outcome, Accepted):
            self.mixture = outcome.mixture
            self.accepted += 1
        else:
            self.rejected += 1

        record = {
            "index": self.processed,
            "source": source,
            "quality": float(self.target.value(theta)),
            "outcome": "accepted" if isinstance(outcome, Accepted) else "rejected",
            "gain": float(outcome.gain),
            "n_components": self.mixture.M if self.mixture is not None else 0,
        }
        if isinstance(outcome, Rejected):
            record["reason"] = outcome.reason
        record.update(details)
        self.history.append(record)
        logger.debug("onvi_proposal", **record)
        return outcome
