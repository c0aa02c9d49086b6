"""
MCMC baselines feeding the online variational sink: conjugate Gibbs for the
Gaussian likelihood and adaptive reflective HMC for both likelihoods.
"""

from app.services.samplers.gibbs import gibbs_run, gibbs_step, update_basis, update_weights
from app.services.samplers.hmc import HMCConfig, hamiltonian, hmc_run, leapfrog
from app.services.samplers.trace import ChainReport, ChainState, SampleSink, SamplerInitError, TraceSink
from app.services.samplers.truncated_normal import truncated_normal_sample, truncated_normal_samples

__all__ = [
    "gibbs_run",
    "gibbs_step",
    "update_basis",
    "update_weights",
    "HMCConfig",
    "hamiltonian",
    "hmc_run",
    "leapfrog",
    "ChainReport",
    "ChainState",
    "SampleSink",
    "SamplerInitError",
    "TraceSink",
    "truncated_normal_sample",
    "truncated_normal_samples",
]
