"""
Tests for the projected-gradient NMF solver and noise calibration.

Tests cover:
- Truncated SVD reconstruction, singular-value tail and rank validation
- Lin's solver: nonnegativity, monotone objective, exact recovery of low-rank data,
  no worse than multiplicative updates from the same start
- Seeded restarts are reproducible
- Empirical sigma2 / eps from restarts
"""

import numpy as np
import pytest

from app.services.nmf_model import Factorization
from app.services.nmf_solve import (
    InputShapeError,
    ProjectedGradientNMF,
    empirical_noise,
    lin_pg_nmf,
    lin_restarts,
    random_init,
    truncated_svd,
)


@pytest.fixture
def low_rank():
    rng = np.random.default_rng(11)
    return rng.uniform(0.1, 1.0, (12, 2)) @ rng.uniform(0.1, 1.0, (2, 15))


class TestTruncatedSvd:

    def test_full_rank_split_reconstructs(self, low_rank):
        """A_svd W_svd equals X when R covers the rank."""
        pair = truncated_svd(low_rank, 2)
        np.testing.assert_allclose(pair.A_svd @ pair.W_svd, low_rank, atol=1e-10)
        assert pair.rank == 2
        assert pair.singular_values[0] >= pair.singular_values[1]

    def test_identity_is_exact(self):
        pair = truncated_svd(np.eye(3), 3)
        np.testing.assert_allclose(pair.A_svd @ pair.W_svd, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_error_equals_singular_value_tail(self, seed):
        """The rank-3 residual has Frobenius norm sqrt(sum of the discarded squared singular values)."""
        X = np.random.default_rng(seed).uniform(0, 1, (10, 8))
        pair = truncated_svd(X, 3)
        s = np.linalg.svd(X, compute_uv=False)
        error = np.linalg.norm(X - pair.A_svd @ pair.W_svd)
        assert error == pytest.approx(np.sqrt(np.sum(s[3:] ** 2)), abs=1e-8)

    @pytest.mark.parametrize("R", [0, 13])
    def test_rank_out_of_range(self, low_rank, R):
        with pytest.raises(InputShapeError):
            truncated_svd(low_rank, R)


class TestProjectedGradientNMF:

    def test_factors_nonnegative_and_objective_decreases(self, low_rank):
        result = ProjectedGradientNMF(tol=1e-6, max_iter=300).fit(low_rank, 2, init=3)
        F = result.factorization
        assert F.A.min() >= 0 and F.W.min() >= 0
        trace = np.array(result.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * trace[0])

    def test_recovers_exact_low_rank(self, low_rank):
        """Exact rank-2 nonnegative data is fit to small relative error."""
        F = lin_pg_nmf(low_rank, 2, init=0, tol=1e-8, max_iter=2000)
        rel = np.linalg.norm(low_rank - F.reconstruction()) / np.linalg.norm(low_rank)
        assert rel < 1e-3

    @pytest.mark.parametrize("seed", range(10))
    def test_not_worse_than_multiplicative_updates(self, seed):
        """From the same start, Lin's solver reaches an error no larger than 200 multiplicative updates."""
        X = np.random.default_rng(100 + seed).uniform(0, 1, (20, 15))
        start = random_init(X, 3, np.random.default_rng(seed))
        A, W = start.A.copy(), start.W.copy()
        for _ in range(200):
            W *= (A.T @ X) / (A.T @ A @ W + 1e-12)
            A *= (X @ W.T) / (A @ W @ W.T + 1e-12)
        mu_error = np.sum((X - A @ W) ** 2)
        F = lin_pg_nmf(X, 3, init=seed, tol=1e-6, max_iter=1000)
        assert np.sum((X - F.reconstruction()) ** 2) <= mu_error * (1 + 1e-6)

    def test_factorization_init_is_floored(self, low_rank):
        init = Factorization(-np.ones((12, 2)) + 1.5, np.ones((2, 15)))
        F = lin_pg_nmf(low_rank, 2, init=init, max_iter=5)
        assert F.A.shape == (12, 2)

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            ProjectedGradientNMF(tol=0.0)

    def test_rank_too_large(self, low_rank):
        with pytest.raises(InputShapeError):
            lin_pg_nmf(low_rank, 20)


class TestRestarts:

    def test_restarts_are_reproducible(self, low_rank):
        first = lin_restarts(low_rank, 2, 3, seed=5, max_iter=20)
        second = lin_restarts(low_rank, 2, 3, seed=5, max_iter=20)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.A, b.A)
            np.testing.assert_array_equal(a.W, b.W)

    def test_restart_i_uses_seed_plus_i(self, low_rank):
        restarts = lin_restarts(low_rank, 2, 2, seed=5, max_iter=20)
        single = lin_pg_nmf(low_rank, 2, init=6, max_iter=20)
        np.testing.assert_array_equal(restarts[1].A, single.A)

    def test_zero_restarts_rejected(self, low_rank):
        with pytest.raises(ValueError):
            lin_restarts(low_rank, 2, 0, seed=0)


class TestEmpiricalNoise:

    def test_values_from_given_fits(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        exact = Factorization(np.array([[1.0], [3.0]]), np.array([[1.0, 4.0 / 3.0]]))
        off = Factorization(np.array([[1.0], [3.0]]), np.array([[1.0, 1.0]]))
        sigma2, eps = empirical_noise(X, 1, fits=[off, exact])
        resid = X - off.reconstruction()
        assert sigma2 == pytest.approx(np.sum(resid ** 2) / 4)
        assert eps == pytest.approx(np.max(np.abs(resid)))

    def test_hand_built_residual(self):
        """Residuals [[0, 1], [0, 1]] and [[0, 0], [0, 1]] give sigma2 = 2 / 4 and 1 / 4 with eps = 1."""
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        off = Factorization(np.array([[1.0], [3.0]]), np.array([[1.0, 1.0]]))
        off_by_one = Factorization(np.array([[1.0, 1.0], [3.0, 0.0]]), np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert empirical_noise(X, 1, fits=[off]) == (0.5, 1.0)
        assert empirical_noise(X, 2, fits=[off_by_one]) == (0.25, 1.0)

    @pytest.mark.parametrize("source", ["best", "mean"])
    def test_aggregated_sources(self, source):
        X = np.array([[2.0]])
        fits = [Factorization(np.array([[1.0]]), np.array([[1.0]])),
                Factorization(np.array([[1.0]]), np.array([[1.5]]))]
        sigma2, _ = empirical_noise(X, 1, sigma_source=source, fits=fits)
        assert sigma2 == pytest.approx(0.25 if source == "best" else (1.0 + 0.25) / 2)
