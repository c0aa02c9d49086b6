"""
Tests for the oblique manifold of changes of basis.

Tests cover:
- Points keep unit columns and reject singular matrices
- Chained steps do not drift off the manifold
- Q <-> factorization round trip on clip-free instances
- Uniform sampling and zero-direction steps
"""

import numpy as np
import pytest

from app.services.manifold import (
    ObliquePoint,
    SingularBasisError,
    distance,
    factorization_to_q,
    project_to_oblique,
    q_to_factorization,
    sample_uniform,
    step,
)
from app.services.nmf_model import Factorization
from app.services.nmf_solve import SvdPair, truncated_svd


class TestObliquePoint:

    def test_rejects_non_unit_columns(self):
        with pytest.raises(ValueError):
            ObliquePoint(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_rejects_singular(self):
        with pytest.raises(SingularBasisError):
            project_to_oblique(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_rejects_zero_column(self):
        with pytest.raises(SingularBasisError):
            project_to_oblique(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_is_immutable(self):
        point = project_to_oblique(np.eye(3))
        with pytest.raises(ValueError):
            point.Q[0, 0] = 2.0

    def test_projection_examples(self):
        np.testing.assert_allclose(project_to_oblique(3 * np.eye(2)).Q, np.eye(2))
        point = project_to_oblique(np.array([[3.0, 1.0], [4.0, 0.0]]))
        np.testing.assert_allclose(point.Q[:, 0], [0.6, 0.8])
        np.testing.assert_allclose(point.Q[:, 1], [1.0, 0.0])


class TestStep:

    def test_chained_steps_keep_unit_columns(self):
        """10,000 chained steps of s=0.01 keep column-norm drift below 1e-9."""
        rng = np.random.default_rng(0)
        point = sample_uniform(3, rng)
        for _ in range(10_000):
            target = sample_uniform(3, rng)
            try:
                point = step(point, target, 0.01)
            except SingularBasisError:
                continue
        assert np.max(np.abs(np.linalg.norm(point.Q, axis=0) - 1.0)) < 1e-9

    def test_step_toward_self_returns_same_point(self):
        point = project_to_oblique(np.eye(2))
        assert step(point, point, 0.5) is point

    def test_step_moves_closer(self):
        rng = np.random.default_rng(3)
        a, b = sample_uniform(3, rng), sample_uniform(3, rng)
        assert distance(step(a, b, 0.05), b) < distance(a, b)

    def test_nonpositive_step_rejected(self):
        point = project_to_oblique(np.eye(2))
        with pytest.raises(ValueError):
            step(point, point, 0.0)

    def test_hand_computed_step(self):
        """Column (1, 0) toward (0, 1) with s = 1 has tangent part (0, 1) and lands on (1, 1) / sqrt(2)."""
        start = project_to_oblique(np.eye(2))
        toward = project_to_oblique(np.array([[0.0, -1.0], [1.0, 0.0]]))
        moved = step(start, toward, 1.0)
        np.testing.assert_allclose(moved.Q[:, 0], np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(moved.Q[:, 1], np.array([-1.0, 1.0]) / np.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(moved.Q, axis=0), 1.0, atol=1e-12)


class TestDistance:

    def test_hand_computed_distances(self):
        identity = project_to_oblique(np.eye(2))
        swapped = project_to_oblique(np.array([[0.0, 1.0], [1.0, 0.0]]))
        flipped = project_to_oblique(np.array([[-1.0, 0.0], [0.0, 1.0]]))
        assert distance(identity, identity) == 0.0
        assert distance(identity, swapped) == pytest.approx(2.0)
        assert distance(identity, flipped) == pytest.approx(2.0)

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a, b, c = (sample_uniform(3, rng) for _ in range(3))
            assert distance(a, b) == pytest.approx(distance(b, a))
            assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12


class TestSampleUniform:

    def test_column_mean_is_near_zero(self):
        """Columns are symmetric on the sphere: the mean of 10,000 draws is close to the origin."""
        rng = np.random.default_rng(12)
        columns = np.hstack([sample_uniform(3, rng).Q for _ in range(10_000)])
        assert np.linalg.norm(columns.mean(axis=1)) < 0.05
        np.testing.assert_allclose(np.linalg.norm(columns, axis=0), 1.0)


class TestRoundTrip:

    @pytest.mark.parametrize("seed", range(3))
    def test_q_factorization_round_trip(self, seed):
        """On exact data built from A_svd Q >= 0 the round trip recovers Q to 1e-8."""
        rng = np.random.default_rng(seed)
        A = rng.uniform(0.2, 1.0, (10, 3))
        W = rng.uniform(0.2, 1.0, (3, 8))
        svd = truncated_svd(A @ W, 3)
        Q_raw = np.linalg.lstsq(svd.A_svd, A, rcond=None)[0]
        Q = project_to_oblique(Q_raw)

        F = q_to_factorization(Q, svd)
        assert F.A.min() >= 0 and F.W.min() >= 0
        np.testing.assert_allclose(F.reconstruction(), A @ W, atol=1e-8)
        back = factorization_to_q(F, svd)
        np.testing.assert_allclose(back.Q, Q.Q, atol=1e-8)

    def test_negative_entries_are_floored(self):
        svd = SvdPair(A_svd=np.array([[1.0, 0.0], [-0.3, 1.0]]), W_svd=np.eye(2), singular_values=np.ones(2))
        F = q_to_factorization(project_to_oblique(np.eye(2)), svd)
        assert F.A[1, 0] == 0.0
        np.testing.assert_array_equal(F.A, [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(F.W, np.eye(2))

    def test_samples_are_invertible(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            point = sample_uniform(4, rng)
            assert abs(np.linalg.det(point.Q)) > 0
            np.testing.assert_allclose(np.linalg.norm(point.Q, axis=0), 1.0)
