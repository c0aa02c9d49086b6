"""
Hamiltonian Monte Carlo over the flattened (A, W) vector.

Design decisions:
- Identity mass matrix, L leapfrog steps (20 by default).
- Nonnegativity by reflection: a coordinate that crosses zero is mirrored
  back and its momentum negated.
- Uniform likelihood: the feasible set is a hard wall. Inside it only the
  prior contributes to the gradient; an end point outside is rejected.
- The step size adapts by Robbins-Monro on log(step) toward the target
  acceptance during the first adapt_fraction of samples, then freezes at the
  average log step of the second half of that window.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import structlog

from app.services.nmf_model import Factorization, ModelSpec, NMFLogJoint
from app.services.samplers.trace import ChainReport, ChainState, SampleSink, SamplerInitError

logger = structlog.get_logger(__name__)

ADAPT_GAIN = 1.0
ADAPT_DECAY = 0.6
ADAPT_OFFSET = 10.0
MAX_HEURISTIC_HALVINGS = 60
MIN_STEP = 1e-12


@dataclass(frozen=True)
class HMCConfig:
    leapfrog_steps: int = 20
    target_accept: float = 0.65
    adapt_fraction: float = 0.1
    initial_step_size: Optional[float] = None
    thin: int = 10


class _Potential:
    """U(theta) = -log_joint with the Uniform hard wall."""

    def __init__(self, X: np.ndarray, spec: ModelSpec):
        self.spec = spec
        self.target = NMFLogJoint(X, spec)
        self.prior_gradient = -Factorization(spec.lambda_A, spec.lambda_W).to_vector()

    def energy(self, theta: np.ndarray) -> float:
        return -self.target.value(theta)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        if self.spec.is_gaussian:
            return -self.target.gradient(theta)
        return -self.prior_gradient


def leapfrog(theta: np.ndarray, momentum: np.ndarray, step_size: float, n_steps: int,
             gradient: Callable[[np.ndarray], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Reflective leapfrog; zero steps return the inputs unchanged."""
    theta = theta.copy()
    p = momentum.copy()
    if n_steps == 0:
        return theta, p
    p -= 0.5 * step_size * gradient(theta)
    for i in range(n_steps):
        theta += step_size * p
        crossed = theta < 0
        theta[crossed] = -theta[crossed]
        p[crossed] = -p[crossed]
        scale = step_size if i < n_steps - 1 else 0.5 * step_size
        p -= scale * gradient(theta)
    return theta, p


def hamiltonian(potential: _Potential, theta: np.ndarray, momentum: np.ndarray) -> float:
    return potential.energy(theta) + 0.5 * float(momentum @ momentum)


def _transition(potential: _Potential, theta: np.ndarray, step_size: float, n_steps: int,
                rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """One HMC transition; returns the next state and the acceptance probability."""
    p0 = rng.standard_normal(theta.shape[0])
    h0 = hamiltonian(potential, theta, p0)
    proposal, p1 = leapfrog(theta, p0, step_size, n_steps, potential.gradient)
    h1 = hamiltonian(potential, proposal, p1)
    if not np.isfinite(h1):
        rng.random()
        return theta, 0.0
    accept_prob = float(min(1.0, np.exp(h0 - h1)))
    if rng.random() < accept_prob:
        return proposal, accept_prob
    return theta, accept_prob


def find_reasonable_step(potential: _Potential, theta: np.ndarray, rng: np.random.Generator) -> float:
    """Double or halve a single-leapfrog step until its acceptance ratio crosses 1/2."""
    step = 1.0
    p0 = rng.standard_normal(theta.shape[0])
    h0 = hamiltonian(potential, theta, p0)

    def log_ratio(s: float) -> float:
        t, p = leapfrog(theta, p0, s, 1, potential.gradient)
        h1 = hamiltonian(potential, t, p)
        return h0 - h1 if np.isfinite(h1) else -np.inf

    direction = 1.0 if log_ratio(step) > np.log(0.5) else -1.0
    for _ in range(MAX_HEURISTIC_HALVINGS):
        if direction * log_ratio(step) <= direction * np.log(0.5):
            break
        step = step * 2.0 if direction > 0 else step / 2.0
    return max(step, MIN_STEP)


def hmc_run(X: np.ndarray, spec: ModelSpec, init: Factorization, n_samples: int,
            sink: Optional[SampleSink] = None, seed: int = 0,
            config: Optional[HMCConfig] = None) -> ChainReport:
    """
    Adaptive HMC chain of n_samples transitions starting from init.

    Post-adaptation states are forwarded to sink; the run stops early once
    the sink is exhausted.

    Raises:
        SamplerInitError: init outside the Uniform support
    """
    config = config or HMCConfig()
    spec.check(X, init)
    init = init.floored()
    potential = _Potential(X, spec)
    theta = init.to_vector()
    if not potential.target.is_feasible(theta):
        raise SamplerInitError("HMC initial factorization is outside the Uniform support")

    rng = np.random.default_rng(seed)
    step = config.initial_step_size or find_reasonable_step(potential, theta, rng)
    n_adapt = int(config.adapt_fraction * n_samples)
    log_step = np.log(step)
    window_logs = []
    adapt_accepts = []
    accepts = []
    trace = []
    iterations = 0

    for i in range(n_samples):
        iterations += 1
        theta, accept_prob = _transition(potential, theta, step, config.leapfrog_steps, rng)
        if i < n_adapt:
            log_step += ADAPT_GAIN * (accept_prob - config.target_accept) / (i + ADAPT_OFFSET) ** ADAPT_DECAY
            step = float(np.exp(log_step))
            if i >= n_adapt // 2:
                window_logs.append(log_step)
                adapt_accepts.append(accept_prob)
            if i == n_adapt - 1:
                step = float(np.exp(np.mean(window_logs)))
                logger.info("hmc_adaptation_finished", step_size=step,
                            acceptance=float(np.mean(adapt_accepts)))
            continue

        accepts.append(accept_prob)
        if (i - n_adapt) % config.thin == 0:
            trace.append(-potential.energy(theta))
        if sink is not None:
            sink.propose(theta.copy(), source="hmc")
            if sink.exhausted:
                break

    state = ChainState(potential.target.decode(theta), iterations,
                       rng.bit_generator.state, step)
    report = ChainReport(
        sampler="hmc",
        n_samples=len(accepts),
        acceptance_rate=float(np.mean(accepts)) if accepts else float("nan"),
        step_size=step,
        adapt_acceptance_rate=float(np.mean(adapt_accepts)) if adapt_accepts else None,
        log_joint_trace=trace,
        thin=config.thin,
        final_state=state,
    )
    logger.info("hmc_run_finished", n_samples=report.n_samples, acceptance_rate=report.acceptance_rate,
                step_size=step, likelihood=spec.likelihood.value)
    return report
