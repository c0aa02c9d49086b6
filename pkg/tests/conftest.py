"""Shared fixtures: small NMF problems with both likelihoods."""

import numpy as np
import pytest

from app.services.nmf_model import Factorization, ModelSpec


@pytest.fixture
def gaussian_problem():
    """6 x 7 rank-2 data with Gaussian noise; returns (X, spec, true factorization)."""
    rng = np.random.default_rng(42)
    F = Factorization(rng.uniform(0.2, 1.0, (6, 2)), rng.uniform(0.2, 1.0, (2, 7)))
    X = np.maximum(F.reconstruction() + rng.normal(0, 0.05, (6, 7)), 0.0)
    return X, ModelSpec.gaussian(6, 7, 2, 0.05 ** 2), F


@pytest.fixture
def uniform_problem():
    """6 x 7 rank-2 data with Uniform noise of half-width 0.05; the truth is feasible."""
    rng = np.random.default_rng(43)
    F = Factorization(rng.uniform(0.2, 1.0, (6, 2)), rng.uniform(0.2, 1.0, (2, 7)))
    X = F.reconstruction() + rng.uniform(-0.05, 0.05, (6, 7))
    return X, ModelSpec.uniform(6, 7, 2, 0.06), F
