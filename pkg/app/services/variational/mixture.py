"""
Isotropic Gaussian Mixtures and the Approximate ELBO

The variational family is a weighted mixture of isotropic Gaussians over the
flattened (A, W) vector. The ELBO is approximated by a pairwise-convolution
lower bound on the entropy plus a second-order expansion of the expected log
joint around each component mean.

Design decisions:
- Entropy bound: -sum_m w_m log sum_j w_j N(mu_m; mu_j, (s_m + s_j) I),
  evaluated with scipy logsumexp.
- Weights of zero are allowed inside computations so that a no-op component
  can be represented; propose/prune never emit them.
- All quantities are also exposed on plain arrays so that optimizers can
  reuse precomputed squared distances.
"""

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from app.services.nmf_model import ModelSpec, NMFLogJoint

WEIGHT_SUM_TOL = 1e-12


class MixtureError(ValueError):
    """Raised for malformed mixtures or components."""


class LogDensity(Protocol):
    """Target of the variational approximation over parameter vectors."""

    dim: int
    has_curvature: bool

    def value(self, theta: np.ndarray) -> float: ...

    def gradient(self, theta: np.ndarray) -> np.ndarray: ...

    def hessian_trace(self, theta: np.ndarray) -> float: ...

    def hessian_trace_gradient(self, theta: np.ndarray) -> np.ndarray: ...

    def is_feasible(self, theta: np.ndarray) -> bool: ...


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    mu: np.ndarray
    sigma2: float
    w: float

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not self.sigma2 > 0:
            raise MixtureError(f"sigma2 must be positive, got {self.sigma2}")
        if not 0.0 <= self.w <= 1.0:
            raise MixtureError(f"weight must lie in [0, 1], got {self.w}")


@dataclass(frozen=True, eq=False)
class VariationalMixture:
    """Ordered, immutable collection of components whose weights sum to 1."""

    components: Tuple[MixtureComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise MixtureError("a mixture needs at least one component")
        dims = {c.mu.shape[0] for c in comps}
        if len(dims) != 1:
            raise MixtureError(f"components disagree on dimension: {sorted(dims)}")
        total = sum(c.w for c in comps)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MixtureError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, means: np.ndarray, sigma2s: Sequence[float],
                    weights: Optional[Sequence[float]] = None) -> "VariationalMixture":
        """Build a mixture, renormalizing weights (uniform when omitted)."""
        means = np.atleast_2d(np.asarray(means, dtype=float))
        M = means.shape[0]
        w = np.full(M, 1.0 / M) if weights is None else np.asarray(weights, dtype=float)
        if w.sum() <= 0:
            raise MixtureError("weights must have positive mass")
        w = w / w.sum()
        return cls(tuple(MixtureComponent(means[m], float(sigma2s[m]), float(w[m])) for m in range(M)))

    @property
    def M(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].mu.shape[0]

    @property
    def means(self) -> np.ndarray:
        return np.vstack([c.mu for c in self.components])

    @property
    def sigma2s(self) -> np.ndarray:
        return np.array([c.sigma2 for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.w for c in self.components])

    def without(self, index: int) -> "VariationalMixture":
        keep = [m for m in range(self.M) if m != index]
        return VariationalMixture.from_arrays(self.means[keep], self.sigma2s[keep], self.weights[keep])


# --------------------------------------------------------------------------- #
# Entropy lower bound
# --------------------------------------------------------------------------- #
def squared_distances(means: np.ndarray) -> np.ndarray:
    return cdist(means, means, metric="sqeuclidean")


def _log_kernel(d2: np.ndarray, sigma2s: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    S = sigma2s[:, None] + sigma2s[None, :]
    return -0.5 * dim * np.log(2.0 * np.pi * S) - d2 / (2.0 * S), S


def entropy_bound_arrays(d2: np.ndarray, sigma2s: np.ndarray, weights: np.ndarray, dim: int) -> float:
    log_n, _ = _log_kernel(d2, sigma2s, dim)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    L = logsumexp(log_n + log_w[None, :], axis=1)
    active = weights > 0
    return float(-np.sum(weights[active] * L[active]))


def entropy_bound_gradients(means: np.ndarray, d2: np.ndarray, sigma2s: np.ndarray,
                            weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of the entropy bound with respect to means, variances and weights.

    With responsibilities r_mj = w_j N_mj / sum_k w_k N_mk and
    C_kj = w_k r_kj + w_j r_jk:
        dH/dmu_k = sum_j C_kj (mu_k - mu_j) / (s_k + s_j)
        dH/ds_k  = -sum_j C_kj dlogN_kj/ds
        dH/dw_k  = -L_k - sum_m w_m N_mk / sum_j w_j N_mj
    """
    dim = means.shape[1]
    log_n, S = _log_kernel(d2, sigma2s, dim)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    L = logsumexp(log_n + log_w[None, :], axis=1)
    r = np.exp(log_n + log_w[None, :] - L[:, None])
    wr = weights[:, None] * r
    C = wr + wr.T

    G = C / S
    grad_mu = G.sum(axis=1)[:, None] * means - G @ means
    dlogn_ds = -dim / (2.0 * S) + d2 / (2.0 * S ** 2)
    grad_s = -np.sum(C * dlogn_ds, axis=1)
    grad_w = -L - np.sum(weights[:, None] * np.exp(log_n - L[:, None]), axis=0)
    return grad_mu, grad_s, grad_w


def entropy_lower_bound(mix: VariationalMixture) -> float:
    """Weighted pairwise-convolution lower bound on the mixture entropy."""
    means = mix.means
    return entropy_bound_arrays(squared_distances(means), mix.sigma2s, mix.weights, mix.dim)


def entropy_lower_bound_grad(mix: VariationalMixture) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d/dmu, d/dlog sigma2, d/dw) of entropy_lower_bound, weights treated as free."""
    means = mix.means
    g_mu, g_s, g_w = entropy_bound_gradients(means, squared_distances(means), mix.sigma2s, mix.weights)
    return g_mu, g_s * mix.sigma2s, g_w


# --------------------------------------------------------------------------- #
# Second-order expectation and ELBO
# --------------------------------------------------------------------------- #
def component_terms(means: np.ndarray, target: LogDensity) -> Tuple[np.ndarray, np.ndarray]:
    """f(mu_m) and Tr(H_m) per component (Tr(H) = 0 without curvature)."""
    values = np.array([target.value(mu) for mu in means])
    traces = np.array([target.hessian_trace(mu) if np.isfinite(v) else 0.0 for mu, v in zip(means, values)])
    return values, traces


def expectation_arrays(values: np.ndarray, traces: np.ndarray, sigma2s: np.ndarray,
                       weights: np.ndarray) -> float:
    active = weights > 0
    if np.any(~np.isfinite(values[active])):
        return -np.inf
    return float(np.sum(weights[active] * (values[active] + 0.5 * sigma2s[active] * traces[active])))


def expected_value(mix: VariationalMixture, target: LogDensity) -> float:
    """sum_m w_m [f(mu_m) + sigma2_m / 2 Tr(H_m)]; -inf if any weighted component is infeasible."""
    values, traces = component_terms(mix.means, target)
    return expectation_arrays(values, traces, mix.sigma2s, mix.weights)


def expected_log_joint(mix: VariationalMixture, X: np.ndarray, spec: ModelSpec) -> float:
    return expected_value(mix, NMFLogJoint(X, spec))


def elbo_target(mix: VariationalMixture, target: LogDensity) -> float:
    expectation = expected_value(mix, target)
    if not np.isfinite(expectation):
        return -np.inf
    return entropy_lower_bound(mix) + expectation


def elbo(mix: VariationalMixture, X: np.ndarray, spec: ModelSpec) -> float:
    """Entropy lower bound plus second-order expected log joint; -inf propagates."""
    return elbo_target(mix, NMFLogJoint(X, spec))
