"""
Conjugate Gibbs sampler for the Gaussian likelihood with exponential priors.

One sweep updates the columns of A in order, then the rows of W. Entries of
one A column are conditionally independent given everything else, so each
column is drawn in a single vectorized call; likewise for a W row.
"""

from dataclasses import replace
from typing import Optional

import numpy as np
import structlog

from app.services.nmf_model import Factorization, ModelSpec, log_joint
from app.services.samplers.trace import ChainReport, ChainState, SampleSink, SamplerInitError
from app.services.samplers.truncated_normal import truncated_normal_samples

logger = structlog.get_logger(__name__)


def _require_gaussian(spec: ModelSpec) -> None:
    if not spec.is_gaussian:
        raise SamplerInitError("there is no conjugate Gibbs sampler for the Uniform likelihood")


def update_basis(X: np.ndarray, A: np.ndarray, W: np.ndarray, spec: ModelSpec,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw every column of A from its full conditional; returns a new array."""
    A = A.copy()
    residual = X - A @ W
    for k in range(spec.R):
        w_k = W[k]
        ssq = float(w_k @ w_k)
        residual += np.outer(A[:, k], w_k)
        if ssq == 0.0:
            A[:, k] = rng.exponential(1.0 / spec.lambda_A[:, k])
        else:
            mean = (residual @ w_k - spec.sigma2 * spec.lambda_A[:, k]) / ssq
            A[:, k] = truncated_normal_samples(mean, spec.sigma2 / ssq, rng)
        residual -= np.outer(A[:, k], w_k)
    return A


def update_weights(X: np.ndarray, A: np.ndarray, W: np.ndarray, spec: ModelSpec,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw every row of W from its full conditional; returns a new array."""
    W = W.copy()
    residual = X - A @ W
    for k in range(spec.R):
        a_k = A[:, k]
        ssq = float(a_k @ a_k)
        residual += np.outer(a_k, W[k])
        if ssq == 0.0:
            W[k] = rng.exponential(1.0 / spec.lambda_W[k])
        else:
            mean = (a_k @ residual - spec.sigma2 * spec.lambda_W[k]) / ssq
            W[k] = truncated_normal_samples(mean, spec.sigma2 / ssq, rng)
        residual -= np.outer(a_k, W[k])
    return W


def gibbs_step(X: np.ndarray, state: ChainState, spec: ModelSpec) -> ChainState:
    """
    One systematic sweep: all of A, then all of W.

    Raises:
        SamplerInitError: Uniform likelihood
    """
    _require_gaussian(spec)
    spec.check(X, state.factorization)
    rng = state.generator()
    F = state.factorization
    A = update_basis(X, F.A, F.W, spec, rng)
    W = update_weights(X, A, F.W, spec, rng)
    return replace(state, factorization=Factorization(A, W), iteration=state.iteration + 1,
                   rng_state=rng.bit_generator.state)


def gibbs_run(X: np.ndarray, spec: ModelSpec, init: Factorization, n_samples: int,
              sink: Optional[SampleSink] = None, seed: int = 0, thin: int = 10) -> ChainReport:
    """
    Run n_samples sweeps from init, forwarding every state to sink.

    Stops early when the sink is exhausted.
    """
    _require_gaussian(spec)
    spec.check(X, init)
    state = ChainState.start(init.floored(), seed)
    trace = []
    for i in range(n_samples):
        state = gibbs_step(X, state, spec)
        if i % thin == 0:
            trace.append(log_joint(X, state.factorization, spec))
        if sink is not None:
            sink.propose(state.factorization.to_vector(), source="gibbs")
            if sink.exhausted:
                break
    logger.info("gibbs_run_finished", n_samples=state.iteration, final_log_joint=trace[-1] if trace else None)
    return ChainReport("gibbs", state.iteration, 1.0, log_joint_trace=trace, thin=thin, final_state=state)
