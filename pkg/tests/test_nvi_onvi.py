"""
Tests for batch NVI and the online accept/reject/prune protocol.

Tests cover:
- Single-component NVI recovers the mean and variance of a Gaussian target
- Multi-component NVI never lowers the ELBO of its starting point
- Curvature-free targets: feasibility radius and ascent inside the support
- ONVI: first proposal, infeasible and duplicate rejection, acceptance of a
  better mode, weight re-optimization, proposal history and the sink component cap
- Pruning order, the ELBO floor and the protected new component
- Entropy gain threshold against a direct density evaluation
"""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from app.models.run_config import ONVIConfig
from app.services.nmf_model import ModelSpec, NMFLogJoint
from app.services.nmf_solve import random_init
from app.services.variational import (
    Accepted,
    MixtureComponent,
    MixtureError,
    OnlineNVI,
    Rejected,
    VariationalMixture,
    elbo_target,
    entropy_gain_threshold,
    feasibility_radius,
    fit_nvi,
    nvi_fit,
    onvi_propose,
    propose_component,
)
from app.services.variational.mixture import component_terms
from app.services.variational.nvi import closed_form_sigma2
from app.services.variational.onvi import _ComponentTable, _prune
from tests.targets import BoxTarget, QuadraticTarget


class TestFitNvi:

    def test_single_component_recovers_gaussian(self):
        """One component on N(3, 0.5) ends at mu ~ 3 with sigma2 = 0.5."""
        target = QuadraticTarget(center=np.array([3.0]), precision=2.0)
        mix = fit_nvi(target, [np.zeros(1)])
        assert mix.M == 1
        assert mix.means[0, 0] == pytest.approx(3.0, rel=0.02)
        assert mix.sigma2s[0] == pytest.approx(0.5, rel=0.02)

    def test_closed_form_sigma2(self):
        target = QuadraticTarget(center=np.zeros(4), precision=4.0)
        assert closed_form_sigma2(target, np.zeros(4)) == pytest.approx(0.25)

    def test_nmf_fit_does_not_lower_elbo(self, gaussian_problem):
        X, spec, _ = gaussian_problem
        target = NMFLogJoint(X, spec)
        rng = np.random.default_rng(0)
        means = np.vstack([random_init(X, spec.R, rng).to_vector() for _ in range(3)])
        start = VariationalMixture.from_arrays(means, [closed_form_sigma2(target, mu) for mu in means])

        mix = nvi_fit(X, spec, 3, seed=0, max_iter=20)
        assert mix.M == 3
        np.testing.assert_allclose(mix.weights, 1.0 / 3)
        assert elbo_target(mix, target) >= elbo_target(start, target)

    def test_single_init_is_copied(self, gaussian_problem):
        X, spec, F = gaussian_problem
        mix = nvi_fit(X, spec, 2, init=F, max_iter=5)
        assert mix.M == 2

    def test_argument_validation(self, gaussian_problem, uniform_problem):
        X, spec, F = gaussian_problem
        with pytest.raises(ValueError):
            nvi_fit(X, spec, 0)
        with pytest.raises(ValueError):
            nvi_fit(X, spec, 3, init=[F, F])
        Xu, spec_u, _ = uniform_problem
        with pytest.raises(ValueError):
            nvi_fit(Xu, spec_u, 1)


class TestCurvatureFree:

    def test_feasibility_radius(self):
        """Largest sigma keeping mu +/- sigma * 1 inside |theta| < 1."""
        target = BoxTarget(dim=2)
        assert feasibility_radius(target, np.array([0.5, -0.2])) == pytest.approx(0.5, rel=1e-5)

    def test_radius_of_infeasible_mean(self):
        with pytest.raises(MixtureError):
            feasibility_radius(BoxTarget(dim=1), np.array([2.0]))

    def test_uniform_fit_stays_feasible_and_improves(self):
        target = BoxTarget(dim=2)
        start_mu = np.array([0.5, 0.5])
        radius = feasibility_radius(target, start_mu)
        start = VariationalMixture.from_arrays(start_mu[None, :], [radius ** 2])

        mix = fit_nvi(target, [start_mu], max_iter=50)
        mu = mix.means[0]
        assert target.is_feasible(mu)
        assert mix.sigma2s[0] == pytest.approx(feasibility_radius(target, mu) ** 2, rel=1e-4)
        assert elbo_target(mix, target) >= elbo_target(start, target)

    def test_uniform_nmf_fit_from_truth(self, uniform_problem):
        X, spec, F = uniform_problem
        mix = nvi_fit(X, spec, 1, init=F, max_iter=10)
        assert NMFLogJoint(X, spec).is_feasible(mix.means[0])


class TestProposeComponent:

    def test_first_proposal_accepted(self):
        target = QuadraticTarget(center=np.zeros(2), precision=2.0)
        outcome = propose_component(None, np.ones(2), target, ONVIConfig())
        assert isinstance(outcome, Accepted)
        assert outcome.weight == 1.0
        assert outcome.mixture.sigma2s[0] == pytest.approx(0.5)

    def test_infeasible_candidate_rejected(self):
        outcome = propose_component(None, np.array([3.0]), BoxTarget(dim=1), ONVIConfig(), sigma2_fixed=0.1)
        assert isinstance(outcome, Rejected)
        assert outcome.reason == "infeasible_candidate"

    def test_curvature_free_needs_fixed_variance(self):
        with pytest.raises(ValueError):
            propose_component(None, np.zeros(1), BoxTarget(dim=1), ONVIConfig())

    def test_better_mode_replaces_distant_component(self):
        """A candidate at the mode is accepted and the far-off old component is pruned."""
        target = QuadraticTarget(center=np.zeros(1), precision=1.0)
        mix = VariationalMixture((MixtureComponent(np.array([-6.0]), 1.0, 1.0),))
        outcome = propose_component(mix, np.zeros(1), target, ONVIConfig())
        assert isinstance(outcome, Accepted)
        assert outcome.gain >= 1e-4
        assert outcome.pruned == 1
        assert outcome.mixture.M == 1
        assert outcome.mixture.means[0, 0] == 0.0
        assert outcome.weight == 1.0
        assert elbo_target(outcome.mixture, target) >= elbo_target(mix, target) + 1e-4

    def test_reoptimized_weights_sum_to_one(self):
        target = QuadraticTarget(center=np.zeros(1), precision=1.0)
        mix = VariationalMixture.from_arrays(np.array([[-2.0], [2.0]]), [1.0, 1.0])
        outcome = propose_component(mix, np.zeros(1), target, ONVIConfig(weight_update="reoptimized"))
        assert isinstance(outcome, Accepted)
        assert outcome.mixture.weights.sum() == pytest.approx(1.0)

    def test_high_bar_rejects_and_leaves_mixture(self):
        target = QuadraticTarget(center=np.zeros(1), precision=1.0)
        mix = VariationalMixture((MixtureComponent(np.array([-2.0]), 1.0, 1.0),))
        outcome = propose_component(mix, np.zeros(1), target, ONVIConfig(min_gain=100.0))
        assert isinstance(outcome, Rejected)
        assert outcome.reason == "insufficient_gain"
        assert mix.M == 1 and mix.means[0, 0] == -2.0

    def test_dimension_mismatch(self):
        target = QuadraticTarget(center=np.zeros(2))
        mix = VariationalMixture.from_arrays(np.zeros((1, 3)), [1.0])
        with pytest.raises(ValueError):
            propose_component(mix, np.zeros(2), target, ONVIConfig())

    def test_nmf_wrapper(self, gaussian_problem):
        X, spec, F = gaussian_problem
        assert isinstance(onvi_propose(None, F.to_vector(), X, spec, ONVIConfig()), Accepted)


class TestPrune:

    @staticmethod
    def _table(centers):
        means = np.array(centers, dtype=float)[:, None]
        values, traces = component_terms(means, QuadraticTarget(center=np.zeros(1), precision=1.0))
        return _ComponentTable(means, values, traces)

    def test_dominated_components_removed_lowest_weight_first(self, monkeypatch):
        table = self._table([-2.0, 5.0, 8.0, 0.0])
        weights = np.array([0.5, 0.05, 0.15, 0.3])
        tried = []
        original = _ComponentTable.subset

        def recording_subset(self, keep):
            tried.append(list(keep))
            return original(self, keep)

        monkeypatch.setattr(_ComponentTable, "subset", recording_subset)

        keep, _, kept_weights, value, removed = _prune(table, np.ones(4), weights, protected=3,
                                                       min_gain=1e-4, floor=-np.inf)
        assert tried[0] == [0, 2, 3]
        assert 1 not in keep and 2 not in keep and 3 in keep
        assert removed == 4 - len(keep)
        assert kept_weights.sum() == pytest.approx(1.0)
        assert value > table.elbo(np.ones(4), weights)

    def test_floor_blocks_removal(self):
        table = self._table([-2.0, 5.0, 0.0])
        weights = np.array([0.6, 0.1, 0.3])
        floor = table.elbo(np.ones(3), weights) + 100.0
        keep, _, kept_weights, _, removed = _prune(table, np.ones(3), weights, protected=2, min_gain=1e-4, floor=floor)
        assert keep == [0, 1, 2] and removed == 0
        np.testing.assert_array_equal(kept_weights, weights)

    def test_new_component_is_never_pruned(self):
        """The protected component stays even when dropping it would raise the ELBO."""
        table = self._table([0.0, 10.0])
        weights = np.array([0.99, 0.01])
        keep, _, _, _, removed = _prune(table, np.ones(2), weights, protected=1, min_gain=1e-4, floor=-np.inf)
        assert keep == [0, 1] and removed == 0


class TestEntropyGainThreshold:

    def test_positive_for_single_component(self):
        mix = VariationalMixture.from_arrays(np.zeros((1, 5)), [0.3])
        assert entropy_gain_threshold(mix, 0.3) > 0

    def test_matches_direct_evaluation(self):
        """d = 2, M = 1, sigma2 = 1: the hypothetical sits at (1, 1) with weight 1 / 2."""
        mix = VariationalMixture.from_arrays(np.zeros((1, 2)), [1.0])
        pair_means = [np.zeros(2), np.ones(2)]

        def bound(means, weights):
            return -sum(w_m * np.log(sum(w_j * multivariate_normal.pdf(mu_m, mean=mu_j, cov=2.0 * np.eye(2))
                                         for mu_j, w_j in zip(means, weights)))
                        for mu_m, w_m in zip(means, weights))

        expected = bound(pair_means, [0.5, 0.5]) - bound([np.zeros(2)], [1.0])
        assert entropy_gain_threshold(mix, 1.0) == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(np.log(2.0) - np.log1p(np.exp(-0.5)), rel=1e-12)

    def test_shrinks_with_variance(self):
        mix = VariationalMixture.from_arrays(np.zeros((1, 3)), [0.5])
        assert entropy_gain_threshold(mix, 1e-4) < entropy_gain_threshold(mix, 1e-2) < entropy_gain_threshold(mix, 1.0)

    def test_duplicate_is_rejected_under_fixed_variance(self):
        """Re-proposing an existing mean gains nothing and cannot clear the entropy bar."""
        target = BoxTarget(dim=2)
        mu = np.array([0.1, 0.2])
        mix = VariationalMixture.from_arrays(mu[None, :], [0.01])
        outcome = propose_component(mix, mu, target, ONVIConfig(), sigma2_fixed=0.01)
        assert isinstance(outcome, Rejected)


class TestOnlineNVI:

    def test_history_and_counters(self):
        sink = OnlineNVI(QuadraticTarget(center=np.zeros(2)))
        sink.propose(np.ones(2), source="lin", wad_to_nearest=1.5)
        sink.propose(np.ones(2) * 50, source="rrt")
        assert sink.processed == 2
        assert sink.accepted + sink.rejected == 2
        first = sink.history[0]
        assert first["source"] == "lin" and first["outcome"] == "accepted"
        assert first["wad_to_nearest"] == 1.5
        assert first["n_components"] == 1

    def test_component_cap_exhausts(self):
        sink = OnlineNVI(QuadraticTarget(center=np.zeros(1)), max_components=2)
        assert not sink.exhausted
        sink.propose(np.zeros(1))
        sink.propose(np.ones(1))
        assert sink.exhausted

    def test_uniform_variance_fixed_at_first_feasible(self):
        sink = OnlineNVI(BoxTarget(dim=2))
        outcome = sink.propose(np.array([3.0, 0.0]))
        assert isinstance(outcome, Rejected)
        assert sink.sigma2_fixed is None and sink.mixture is None

        outcome = sink.propose(np.array([0.0, 0.0]))
        assert isinstance(outcome, Accepted)
        assert sink.sigma2_fixed is not None and sink.sigma2_fixed > 0
        assert sink.mixture.sigma2s[0] == sink.sigma2_fixed
        assert sink.history[0]["reason"] == "infeasible_candidate"

    def test_for_data(self, gaussian_problem):
        X, spec, F = gaussian_problem
        sink = OnlineNVI.for_data(X, spec, ONVIConfig(min_gain=1e-3), max_components=10)
        sink.propose(F.to_vector(), source="truth")
        assert sink.mixture is not None and sink.criteria.min_gain == 1e-3
