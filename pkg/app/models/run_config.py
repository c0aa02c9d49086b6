"""
Run Configuration Models

Pydantic models for one experiment run: dataset, likelihood, method and the
per-module parameters. Every documented constant is a default here, so a
resolved config written next to the outputs is full provenance.

Design decisions:
- extra="forbid" everywhere so a misspelled key is a validation error.
- Likelihood-dependent RRT defaults (temporary-node cap, initial restarts)
  stay None until resolved against the likelihood kind.
"""

from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

Method = Literal["nvi", "gibbs_onvi", "hmc_onvi", "rrt_onvi", "lin_restarts"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SyntheticParams(_Section):
    """Two-exact-NMF toy embedded into D x N with Uniform noise."""

    D: int = Field(default=500, ge=4, description="Embedded rows")
    N: int = Field(default=500, ge=4, description="Embedded columns")
    noise_eps: float = Field(default=0.01, ge=0, description="Half-width of the additive Uniform noise")
    seed: Optional[int] = Field(default=None, description="Generation seed; defaults to the run seed")


class DatasetSource(_Section):
    path: Optional[Path] = Field(default=None, description="Matrix file to load")
    format: Literal["dense-csv", "coordinate-sparse"] = Field(default="dense-csv", description="File format of path")
    synthetic: Optional[SyntheticParams] = Field(default=None, description="Generate the two-NMF toy instead")
    name: Optional[str] = Field(default=None, description="Label used in reports")

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("dataset needs exactly one of dataset.path or dataset.synthetic.*")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return self.path.stem if self.path is not None else "two_nmf_toy"


class LikelihoodConfig(_Section):
    kind: Literal["gaussian", "uniform"] = Field(default="gaussian", description="Noise model")
    sigma2: Union[PositiveFloat, Literal["empirical", "empirical_x10"]] = Field(
        default="empirical", description="Gaussian noise variance, or calibrated from Lin fits (x10 variant)"
    )
    eps: Union[PositiveFloat, Literal["empirical"]] = Field(
        default="empirical", description="Uniform noise half-width, or the largest Lin-fit residual"
    )
    eps_margin: float = Field(
        default=1e-6, ge=0, description="Relative margin added to an empirical eps so calibrating fits stay inside the open support"
    )
    sigma_source: Literal["first", "best", "mean"] = Field(
        default="first", description="Which Lin fit(s) calibrate the empirical sigma2"
    )
    noise_restarts: int = Field(default=10, ge=1, description="Lin restarts used for empirical noise")
    lambda_A: PositiveFloat = Field(default=1.0, description="Exponential prior rate for every A entry")
    lambda_W: PositiveFloat = Field(default=1.0, description="Exponential prior rate for every W entry")
    scale_objective: Literal["as_displayed", "beta_squared"] = Field(
        default="as_displayed", description="Closed form used for the Gaussian scale optimization"
    )


class LinConfig(_Section):
    tol: PositiveFloat = Field(default=1e-4, description="Relative projected-gradient tolerance")
    max_iter: int = Field(default=500, ge=1, description="Outer iterations")
    n_restarts: int = Field(default=10, ge=1, description="Restarts for the lin_restarts method")


class NVIConfig(_Section):
    M: int = Field(default=4, ge=1, description="Number of components")
    max_iter: int = Field(default=200, ge=1, description="Newton-CG iterations")
    tol: PositiveFloat = Field(default=1e-4, description="Absolute ELBO change stopping rule")


class ONVIConfig(_Section):
    min_gain: PositiveFloat = Field(default=1e-4, description="Minimum ELBO gain to accept, and maximum loss to prune")
    tol: PositiveFloat = Field(default=1e-4, description="Absolute ELBO change stopping rule for proposal optimization")
    weight_update: Literal["scaled", "reoptimized"] = Field(
        default="scaled", description="Scale previous weights by (1 - w_new), or re-optimize all weights"
    )
    nvi_max_iter: int = Field(default=200, ge=1, description="Iterations for the single-component NVI that fixes Uniform variances")


class RRTConfig(_Section):
    s0: PositiveFloat = Field(default=0.01, description="Initial step size on the oblique manifold")
    growth: float = Field(default=1.10, gt=1.0, description="Step growth factor per feasible step")
    max_extend_steps: int = Field(default=50, ge=1, description="Step cap per extend")
    max_temp_nodes: Optional[int] = Field(default=None, ge=1, description="Temporary-node cap (100 Gaussian, 90 Uniform)")
    min_angle_deg: PositiveFloat = Field(default=0.01, description="Initial minimum WAD to existing nodes (Uniform)")
    min_angle_increment: PositiveFloat = Field(default=0.5, description="Minimum-angle increase per restart (Uniform)")
    max_onvi_components: int = Field(default=5000, ge=1, description="Stop after this many ONVI proposals")
    max_failed_attempts: int = Field(default=10000, ge=1, description="Stop after this many consecutive trapped extends")
    n_init_restarts: Optional[int] = Field(default=None, ge=1, description="Lin restarts seeding the tree (50 Gaussian, 10 Uniform)")
    threshold_referent: Literal["tree", "onvi"] = Field(
        default="tree", description="Gaussian threshold after saturation: best tree node or best ONVI component"
    )

    def resolved(self, likelihood: str) -> "RRTConfig":
        gaussian = likelihood == "gaussian"
        return self.model_copy(update={
            "max_temp_nodes": self.max_temp_nodes or (100 if gaussian else 90),
            "n_init_restarts": self.n_init_restarts or (50 if gaussian else 10),
        })


class SamplerConfig(_Section):
    n_samples: int = Field(default=10000, ge=1, description="Chain length")
    leapfrog_steps: int = Field(default=20, ge=0, description="HMC leapfrog steps per trajectory")
    target_accept: float = Field(default=0.65, gt=0, lt=1, description="HMC adaptation target")
    adapt_fraction: float = Field(default=0.1, ge=0, lt=1, description="Fraction of samples used for step-size adaptation")
    initial_step_size: Optional[PositiveFloat] = Field(default=None, description="HMC start step; found heuristically when unset")
    thin: int = Field(default=10, ge=1, description="Keep every thin-th state in the exported trace")
    onvi: bool = Field(default=True, description="Forward samples to an ONVI sink")


class MetricsConfig(_Section):
    normalization: Literal["l1", "l2"] = Field(default="l1", description="Column scaling for WAD weights")
    epsilon_min: PositiveFloat = Field(default=1e-3, description="Smallest persistence angle (degrees)")
    epsilon_max: float = Field(default=90.0, gt=0, le=90, description="Largest persistence angle (degrees)")
    n_epsilons: int = Field(default=50, ge=2, description="Log-spaced persistence grid size")


class RunConfig(_Section):
    """One experiment: a dataset, a model and a method, repeated with derived seeds."""

    dataset: DatasetSource
    R: int = Field(ge=1, description="Factorization rank")
    likelihood: LikelihoodConfig = Field(default_factory=LikelihoodConfig)
    method: Method = Field(default="rrt_onvi", description="Pipeline to run")
    init_source: Literal["lin", "ground_truth"] = Field(
        default="lin", description="Start chains and trees from Lin restarts or from synthetic ground truth"
    )
    lin: LinConfig = Field(default_factory=LinConfig)
    nvi: NVIConfig = Field(default_factory=NVIConfig)
    onvi: ONVIConfig = Field(default_factory=ONVIConfig)
    rrt: RRTConfig = Field(default_factory=RRTConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    repetitions: int = Field(default=10, ge=1, description="Independent repetitions (seed + index)")
    seed: int = Field(default=0, ge=0, description="Base seed")
    workers: Optional[int] = Field(default=None, ge=1, description="Parallel repetitions; settings.default_workers when unset")

    @model_validator(mode="after")
    def _check_combinations(self):
        if self.method == "gibbs_onvi" and self.likelihood.kind != "gaussian":
            raise ValueError("gibbs_onvi requires likelihood.kind = gaussian")
        if self.init_source == "ground_truth" and self.dataset.synthetic is None:
            raise ValueError("init_source = ground_truth requires a synthetic dataset")
        return self
