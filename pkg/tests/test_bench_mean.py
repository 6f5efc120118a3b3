from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from numpy.testing import assert_allclose

from benchsae.bench_mean import (
    benchmark_mean,
    benchmark_raked,
    mean_intermediates,
    percent_prmse_increase,
    pmse,
    reduced_objective,
)
from benchsae.core import (
    BenchmarkProblem,
    ConstraintWeights,
    LossWeights,
    PosteriorSummary,
    area_offsets,
    loss_scale,
    make_loss_weights,
)
from benchsae.errors import DegenerateProblemError, InvalidInputError
from benchsae.oracle import encode_theorem1, null_space_perturbation, random_problem, solve_kkt
from conftest import assert_constraints
from strategies import problems


def simple_problem(target=0.45):
    cw = ConstraintWeights.from_ragged([[0.5, 0.5]], [1.0], target)
    return BenchmarkProblem.from_ragged([[0.2, 0.4]], cw)


def point_posterior(problem, var_area):
    """Posterior whose means are the problem's Bayes estimates, with given area variances."""
    cw = problem.constraint
    covs = []
    for i, lo in enumerate(area_offsets(cw.sizes)[:-1]):
        n = cw.sizes[i]
        wi = cw.unit_weights[lo : lo + n]
        covs.append(var_area[i] / (wi @ wi) * np.eye(n))
    var = np.concatenate([np.diag(c) for c in covs])
    return PosteriorSummary(problem.bayes_estimates, var, tuple(covs), problem.area_bayes(), var_area, 10, cw.sizes)


class TestBenchmarkMean:
    def test_zero_correction_returns_bayes(self, rng):
        problem = random_problem(rng)
        problem = problem.with_target(problem.overall_bayes())
        sol = benchmark_mean(problem)
        assert np.array_equal(sol.unit_estimates, problem.bayes_estimates)
        assert np.array_equal(sol.area_estimates, problem.area_bayes())

    @pytest.mark.parametrize("xi, phi", [(1.0, 1.0), (0.3, 7.0), (5.0, 0.0)])
    def test_single_unit_gets_target(self, xi, phi):
        cw = ConstraintWeights.from_ragged([[1.0]], [1.0], 0.37)
        problem = BenchmarkProblem.from_ragged([[0.8]], cw, LossWeights.from_ragged([[xi]], [phi]))
        sol = benchmark_mean(problem)
        # exact up to the rounding of 0.8 + (0.37 - 0.8)
        assert sol.area_estimates[0] == pytest.approx(0.37, rel=0, abs=2 * np.spacing(0.37))
        assert sol.unit_estimates[0] == pytest.approx(0.37, rel=0, abs=2 * np.spacing(0.37))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_kkt_oracle_m3(self, seed):
        rng = np.random.default_rng(seed)
        sizes = rng.integers(2, 5, size=3)
        cw = ConstraintWeights(
            np.concatenate([(lambda v: v / v.sum())(rng.uniform(0.1, 1, n)) for n in sizes]),
            (lambda v: v / v.sum())(rng.uniform(0.1, 1, 3)),
            rng.uniform(0.2, 0.8),
            sizes,
        )
        loss = LossWeights(rng.uniform(0.1, 5, sizes.sum()), rng.uniform(0.1, 5, 3))
        problem = BenchmarkProblem(rng.uniform(0, 1, sizes.sum()), cw, loss)
        oracle = solve_kkt(encode_theorem1(problem))
        assert np.max(np.abs(benchmark_mean(problem).unit_estimates - oracle)) <= 1e-9

    def test_equal_weights_give_equal_adjustment(self, rng):
        problem = random_problem(rng)
        cw = problem.constraint
        problem = problem.with_loss(LossWeights(cw.unit_weights, cw.area_weights))
        sol = benchmark_mean(problem)
        eta = cw.area_weights
        expected = (cw.target - problem.overall_bayes()) * eta / (1 + eta) / np.sum(eta**2 / (1 + eta))
        shift = sol.unit_estimates - problem.bayes_estimates
        assert_allclose(shift, np.repeat(expected, cw.sizes), rtol=0, atol=1e-12)
        assert_allclose(loss_scale(problem.loss, cw), 1.0, rtol=0, atol=1e-12)

    def test_rejects_problem_without_loss(self):
        with pytest.raises(InvalidInputError, match="no loss"):
            benchmark_mean(simple_problem())

    def test_degenerate_q(self):
        # phi -> -1/s makes 1 + phi s vanish; validation catches the non-positive case
        cw = ConstraintWeights.from_ragged([[1.0]], [1.0], 0.5)
        problem = BenchmarkProblem.from_ragged([[0.2]], cw, LossWeights.from_ragged([[1.0]], [-1.0]))
        with pytest.raises(InvalidInputError, match="not positive"):
            benchmark_mean(problem)

    def test_overflowing_scale_is_degenerate(self):
        cw = ConstraintWeights.from_ragged([[1.0], [1.0]], [0.5, 0.5], 0.5)
        problem = BenchmarkProblem.from_ragged([[0.2], [0.3]], cw, LossWeights.from_ragged([[1e-320], [1.0]], [1.0, 1.0]))
        with np.errstate(all="ignore"), pytest.raises(DegenerateProblemError):
            benchmark_mean(problem)


class TestBenchmarkRaked:
    def test_worked_example(self):
        sol = benchmark_raked(simple_problem())
        assert_allclose(sol.unit_estimates, [0.3, 0.6], rtol=1e-15)
        assert sol.area_estimates[0] == pytest.approx(0.45, rel=1e-15)

    def test_target_met_returns_bayes(self):
        sol = benchmark_raked(simple_problem(target=0.3))
        assert_allclose(sol.unit_estimates, [0.2, 0.4], rtol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("g_factor", [1.01, 2.0, 50.0])
    def test_equals_closed_form_with_raked_weights(self, seed, g_factor):
        problem = random_problem(np.random.default_rng(seed))
        g = g_factor * float(np.max(1 / problem.constraint.area_weights))
        closed = benchmark_mean(problem.with_loss(make_loss_weights("raked", problem, g=g)))
        direct = benchmark_raked(problem)
        assert_allclose(closed.unit_estimates, direct.unit_estimates, rtol=0, atol=1e-10)
        assert_allclose(closed.area_estimates, direct.area_estimates, rtol=0, atol=1e-10)

    def test_rejects_nonpositive(self):
        cw = ConstraintWeights.from_ragged([[0.5, 0.5]], [1.0], 0.45)
        with pytest.raises(InvalidInputError):
            benchmark_raked(BenchmarkProblem.from_ragged([[0.0, 0.4]], cw))


class TestPmse:
    def test_worked_area_value(self):
        problem = simple_problem(target=0.33).with_loss(LossWeights([1.0, 1.0], [1.0]))
        post = point_posterior(problem, np.array([0.04]))
        sol = pmse(benchmark_mean(problem), post)
        assert sol.area_estimates[0] - post.mean_area[0] == pytest.approx(0.03, abs=1e-15)
        assert sol.area_pmse[0] == pytest.approx(0.0409, abs=1e-15)
        assert percent_prmse_increase(sol, post)[0] == pytest.approx(1.1187, abs=5e-5)
        assert percent_prmse_increase(sol, post)[0] == pytest.approx(100 * (np.sqrt(0.0409) - 0.2) / 0.2, rel=1e-12)

    def test_zero_correction_pmse_is_variance(self, rng):
        problem = random_problem(rng)
        problem = problem.with_target(problem.overall_bayes())
        sol = pmse(benchmark_mean(problem), problem.posterior)
        assert np.array_equal(sol.unit_pmse, problem.posterior.var_theta)
        assert np.array_equal(sol.area_pmse, problem.posterior.var_area)
        assert np.all(percent_prmse_increase(sol, problem.posterior) == 0)

    def test_zero_variance_gives_nan(self):
        problem = simple_problem(target=0.33).with_loss(LossWeights([1.0, 1.0], [1.0]))
        post = point_posterior(problem, np.array([0.0]))
        assert np.isnan(percent_prmse_increase(benchmark_mean(problem), post)[0])

    @pytest.mark.parametrize("seed", range(20))
    def test_decomposition(self, seed):
        problem = random_problem(np.random.default_rng(seed), "inverse_variance")
        post = problem.posterior
        sol = pmse(benchmark_mean(problem), post)
        adj_unit = sol.unit_estimates - post.mean_theta
        adj_area = sol.area_estimates - post.mean_area
        assert_allclose(sol.unit_pmse - post.var_theta, adj_unit**2, rtol=0, atol=1e-12)
        assert_allclose(sol.area_pmse - post.var_area, adj_area**2, rtol=0, atol=1e-12)
        assert np.all(percent_prmse_increase(sol, post) >= 0)


class TestProperties:
    @given(problems())
    def test_constraints_hold(self, problem):
        assert_constraints(benchmark_mean(problem), problem.constraint)

    @given(problems(max_areas=4, max_units=4))
    def test_optimal_against_feasible_perturbations(self, problem):
        sol = benchmark_mean(problem)
        qp = encode_theorem1(problem)
        best = reduced_objective(problem, sol.unit_estimates)
        assert best == pytest.approx(qp.objective(sol.unit_estimates), rel=1e-9, abs=1e-12)
        rng = np.random.default_rng(0)
        for _ in range(20):
            other = null_space_perturbation(qp, sol.unit_estimates, rng, scale=0.1)
            assert reduced_objective(problem, other) >= best - 1e-12

    @given(problems())
    def test_cross_term_identity(self, problem):
        cw, loss = problem.constraint, problem.loss
        s = loss_scale(loss, cw)
        offsets = area_offsets(cw.sizes)
        for i in range(cw.n_areas):
            w = cw.unit_weights[offsets[i] : offsets[i + 1]]
            xi = loss.unit_loss[offsets[i] : offsets[i + 1]]
            psi = np.diag(xi) + loss.area_loss[i] * np.outer(w, w)
            assert_allclose(psi @ (w / xi), (1 + loss.area_loss[i] * s[i]) * w, rtol=1e-12, atol=1e-12)

    @given(problems())
    def test_total_area_adjustment_is_fixed(self, problem):
        sol = benchmark_mean(problem)
        eta = problem.constraint.area_weights
        total = float(eta @ (sol.area_estimates - problem.area_bayes()))
        assert total == pytest.approx(problem.constraint.target - problem.overall_bayes(), abs=1e-10)
        im = mean_intermediates(problem)
        assert im.q > 0 and np.all(im.s > 0)
