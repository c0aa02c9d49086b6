"""
Variational layer: isotropic Gaussian mixtures, the approximate ELBO, batch
NVI and the online accept/reject/prune protocol.
"""

from app.services.variational.mixture import (
    LogDensity,
    MixtureComponent,
    MixtureError,
    VariationalMixture,
    elbo,
    elbo_target,
    entropy_lower_bound,
    entropy_lower_bound_grad,
    expected_log_joint,
    expected_value,
)
from app.services.variational.nvi import feasibility_radius, fit_nvi, nvi_fit
from app.services.variational.onvi import (
    Accepted,
    OnlineNVI,
    Rejected,
    entropy_gain_threshold,
    onvi_propose,
    propose_component,
)

__all__ = [
    "LogDensity",
    "MixtureComponent",
    "MixtureError",
    "VariationalMixture",
    "elbo",
    "elbo_target",
    "entropy_lower_bound",
    "entropy_lower_bound_grad",
    "expected_log_joint",
    "expected_value",
    "feasibility_radius",
    "fit_nvi",
    "nvi_fit",
    "Accepted",
    "OnlineNVI",
    "Rejected",
    "entropy_gain_threshold",
    "onvi_propose",
    "propose_component",
]
