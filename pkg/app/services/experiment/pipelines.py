"""
Experiment Pipelines

One function per method. Each takes a resolved problem (data, model spec,
starting factorizations) and returns a PipelineOutcome holding the final
mixture, or a plain trace of samples for sampler runs without ONVI.

Design decisions:
- Noise calibration and Lin restarts use the base seed, so every repetition
  of a run sees the same model; method randomness uses the repetition seed.
- Uniform runs start chains, NVI and the tree from feasible points only
  (Lin fits inside the calibrated support, or the synthetic ground truth).
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import structlog

from app.models.run_config import RunConfig
from app.services.datasets import Dataset, gen_two_nmf_toy, load_matrix
from app.services.exploration import explore
from app.services.nmf_model import Factorization, ModelSpec, is_feasible
from app.services.nmf_solve import empirical_noise, lin_restarts
from app.services.samplers import HMCConfig, TraceSink, gibbs_run, hmc_run
from app.services.variational import OnlineNVI, VariationalMixture, nvi_fit

logger = structlog.get_logger(__name__)


@dataclass
class Problem:
    dataset: Dataset
    spec: ModelSpec
    lin_fits: List[Factorization]
    noise: Dict[str, float] = field(default_factory=dict)

    @property
    def X(self) -> np.ndarray:
        return self.dataset.X


@dataclass
class PipelineOutcome:
    mixture: Optional[VariationalMixture]
    samples: List[np.ndarray] = field(default_factory=list)
    proposals: List[Dict[str, Any]] = field(default_factory=list)
    chain: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = field(default_factory=dict)


def build_dataset(config: RunConfig) -> Dataset:
    source = config.dataset
    if source.synthetic is not None:
        params = source.synthetic
        seed = params.seed if params.seed is not None else config.seed
        return gen_two_nmf_toy(params.D, params.N, params.noise_eps, seed, name=source.label)
    return load_matrix(source.path, source.format, name=source.label)


def resolve_problem(config: RunConfig, dataset: Optional[Dataset] = None) -> Problem:
    """Build the data, calibrate the noise level and fit the Lin restarts."""
    dataset = dataset or build_dataset(config)
    X = dataset.X
    D, N = X.shape
    lik = config.likelihood
    n_fits = max(lik.noise_restarts, config.lin.n_restarts)
    fits = lin_restarts(X, config.R, n_fits, config.seed, tol=config.lin.tol, max_iter=config.lin.max_iter)
    sigma2_emp, eps_emp = empirical_noise(X, config.R, sigma_source=lik.sigma_source,
                                          fits=fits[: lik.noise_restarts])
    rates = {"lambda_A": lik.lambda_A, "lambda_W": lik.lambda_W}

    if lik.kind == "gaussian":
        if lik.sigma2 == "empirical":
            sigma2 = sigma2_emp
        elif lik.sigma2 == "empirical_x10":
            sigma2 = 10.0 * sigma2_emp
        else:
            sigma2 = float(lik.sigma2)
        spec = ModelSpec.gaussian(D, N, config.R, sigma2, **rates)
        noise = {"sigma2": sigma2, "sigma2_empirical": sigma2_emp}
    else:
        eps = eps_emp * (1.0 + lik.eps_margin) if lik.eps == "empirical" else float(lik.eps)
        spec = ModelSpec.uniform(D, N, config.R, eps, **rates)
        noise = {"eps": eps, "eps_empirical": eps_emp}
    logger.info("problem_resolved", dataset=dataset.name, D=D, N=N, R=config.R,
                likelihood=lik.kind, **noise)
    return Problem(dataset, spec, fits[: config.lin.n_restarts], noise)


def starting_points(problem: Problem, config: RunConfig) -> List[Factorization]:
    """Ground truth or Lin fits, restricted to feasible points under Uniform noise."""
    if config.init_source == "ground_truth":
        candidates = list(problem.dataset.ground_truth)
    else:
        candidates = list(problem.lin_fits)
    feasible = [F for F in candidates if is_feasible(problem.X, F, problem.spec)]
    if not feasible:
        raise ValueError(f"no feasible starting factorization from init_source={config.init_source}")
    return feasible


def _sink(problem: Problem, config: RunConfig, max_components: Optional[int] = None) -> OnlineNVI:
    return OnlineNVI.for_data(problem.X, problem.spec, config.onvi, max_components)


def run_lin_restarts(problem: Problem, config: RunConfig, seed: int) -> PipelineOutcome:
    fits = lin_restarts(problem.X, config.R, config.lin.n_restarts, seed,
                        tol=config.lin.tol, max_iter=config.lin.max_iter)
    sink = _sink(problem, config)
    for F in fits:
        sink.propose(F.to_vector(), source="lin")
    return PipelineOutcome(sink.mixture, proposals=sink.history,
                           details={"proposals": sink.processed, "accepted": sink.accepted})


def run_nvi(problem: Problem, config: RunConfig, seed: int) -> PipelineOutcome:
    init = None
    if not problem.spec.is_gaussian or config.init_source == "ground_truth":
        init = starting_points(problem, config)[0]
    mixture = nvi_fit(problem.X, problem.spec, config.nvi.M, init=init, max_iter=config.nvi.max_iter,
                      tol=config.nvi.tol, seed=seed)
    return PipelineOutcome(mixture, details={"M": config.nvi.M})


def run_gibbs_onvi(problem: Problem, config: RunConfig, seed: int) -> PipelineOutcome:
    sink = _sink(problem, config) if config.sampler.onvi else TraceSink(config.sampler.thin)
    report = gibbs_run(problem.X, problem.spec, starting_points(problem, config)[0], config.sampler.n_samples,
                       sink=sink, seed=seed, thin=config.sampler.thin)
    return _sampler_outcome(sink, report.to_dict())


def run_hmc_onvi(problem: Problem, config: RunConfig, seed: int) -> PipelineOutcome:
    sampler = config.sampler
    sink = _sink(problem, config) if sampler.onvi else TraceSink(sampler.thin)
    hmc_config = HMCConfig(
        leapfrog_steps=sampler.leapfrog_steps,
        target_accept=sampler.target_accept,
        adapt_fraction=sampler.adapt_fraction,
        initial_step_size=sampler.initial_step_size,
        thin=sampler.thin,
    )
    report = hmc_run(problem.X, problem.spec, starting_points(problem, config)[0], sampler.n_samples,
                     sink=sink, seed=seed, config=hmc_config)
    return _sampler_outcome(sink, report.to_dict())


def _sampler_outcome(sink, chain: Dict[str, Any]) -> PipelineOutcome:
    if isinstance(sink, TraceSink):
        return PipelineOutcome(None, samples=sink.samples, chain=chain,
                               details={"kept_samples": len(sink.samples)})
    return PipelineOutcome(sink.mixture, proposals=sink.history, chain=chain,
                           details={"proposals": sink.processed, "accepted": sink.accepted})


def run_rrt_onvi(problem: Problem, config: RunConfig, seed: int) -> PipelineOutcome:
    rrt = config.rrt.resolved(config.likelihood.kind)
    sink = _sink(problem, config, rrt.max_onvi_components)
    seeds = None
    if config.init_source == "ground_truth":
        seeds = starting_points(problem, config)
    elif not problem.spec.is_gaussian:
        seeds = lin_restarts(problem.X, config.R, rrt.n_init_restarts, config.seed,
                             tol=config.lin.tol, max_iter=config.lin.max_iter)
    report = explore(problem.X, problem.spec, rrt, sink, seed=seed, seeds=seeds, lin_tol=config.lin.tol,
                     lin_max_iter=config.lin.max_iter, scale_objective=config.likelihood.scale_objective,
                     normalization=config.metrics.normalization)
    return PipelineOutcome(sink.mixture, proposals=report.proposal_log, chain=report.to_dict(),
                           details={"proposals": report.proposals, "accepted": report.accepted,
                                    "termination_reason": report.termination_reason})


PIPELINES: Dict[str, Callable[[Problem, RunConfig, int], PipelineOutcome]] = {
    "lin_restarts": run_lin_restarts,
    "nvi": run_nvi,
    "gibbs_onvi": run_gibbs_onvi,
    "hmc_onvi": run_hmc_onvi,
    "rrt_onvi": run_rrt_onvi,
}
