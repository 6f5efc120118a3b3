from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from benchsae.bench_mean import benchmark_mean
from benchsae.bench_multi import MultiBenchmarkProblem, benchmark_mean_multi, multi_constraint_residuals
from benchsae.core import area_offsets
from benchsae.errors import DegenerateProblemError, InvalidInputError
from benchsae.oracle import encode_theorem3, null_space_perturbation, random_multi_problem, random_problem, solve_kkt
from strategies import problems


def with_target(problem, target):
    return MultiBenchmarkProblem(
        problem.bayes_estimates, problem.W, problem.Gamma, problem.Lambda, problem.Psi, target, problem.sizes
    )


class TestBenchmarkMeanMulti:
    @pytest.mark.parametrize("seed", range(10))
    def test_scalar_reduction(self, seed):
        problem = random_problem(np.random.default_rng(seed), "constant")
        multi = benchmark_mean_multi(MultiBenchmarkProblem.from_scalar(problem))
        scalar = benchmark_mean(problem)
        assert_allclose(multi.unit_estimates[:, 0], scalar.unit_estimates, rtol=0, atol=1e-10)
        assert_allclose(multi.area_estimates[:, 0], scalar.area_estimates, rtol=0, atol=1e-10)

    def test_zero_correction(self, rng):
        problem = random_multi_problem(rng, 2)
        problem = with_target(problem, problem.overall_bayes())
        sol = benchmark_mean_multi(problem)
        assert_allclose(sol.unit_estimates, problem.bayes_estimates, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_dim2_m2_n2_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        problem = None
        while problem is None or problem.n_areas != 2 or tuple(problem.sizes) != (2, 2):
            problem = random_multi_problem(rng, 2, max_areas=2, max_units=2)
        oracle = solve_kkt(encode_theorem3(problem))
        closed = benchmark_mean_multi(problem).unit_estimates.reshape(-1)
        assert np.max(np.abs(closed - oracle)) <= 1e-9

    def test_singular_s_reported(self, rng):
        problem = random_multi_problem(rng, 2)
        W = np.array(problem.W)
        W[:, 1, :] = 0.0  # every W_ij has a zero row, so s_i is singular
        bad = MultiBenchmarkProblem(problem.bayes_estimates, W, problem.Gamma, problem.Lambda, problem.Psi, problem.target, problem.sizes)
        with pytest.raises(DegenerateProblemError, match="area 0"):
            benchmark_mean_multi(bad)

    def test_singular_R_reported(self, rng):
        problem = random_multi_problem(rng, 2)
        Gamma = np.zeros_like(problem.Gamma)
        Gamma[:, 0, 0] = 1.0
        bad = MultiBenchmarkProblem(problem.bayes_estimates, problem.W, Gamma, problem.Lambda, problem.Psi, problem.target, problem.sizes)
        with pytest.raises(DegenerateProblemError, match="R"):
            benchmark_mean_multi(bad)

    def test_rejects_non_spd(self, rng):
        problem = random_multi_problem(rng, 2)
        Lam = np.array(problem.Lambda)
        Lam[0] = -np.eye(2)
        with pytest.raises(InvalidInputError, match="Lambda"):
            MultiBenchmarkProblem(problem.bayes_estimates, problem.W, problem.Gamma, Lam, problem.Psi, problem.target, problem.sizes)


class TestProperties:
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
    def test_constraints_hold(self, seed, dim):
        problem = random_multi_problem(np.random.default_rng(seed), dim)
        within, overall = multi_constraint_residuals(benchmark_mean_multi(problem), problem)
        assert within <= 1e-10 and overall <= 1e-10

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
    def test_stationarity_identity(self, seed, dim):
        problem = random_multi_problem(np.random.default_rng(seed), dim)
        sol = benchmark_mean_multi(problem)
        offsets = area_offsets(problem.sizes)
        for i in range(problem.n_areas):
            lo, hi = offsets[i], offsets[i + 1]
            A = np.zeros(((hi - lo) * dim, (hi - lo) * dim))
            for k, lam in enumerate(problem.Lambda[lo:hi]):
                A[k * dim : (k + 1) * dim, k * dim : (k + 1) * dim] = lam
            Wi = np.concatenate(list(problem.W[lo:hi]), axis=1)
            shift = (sol.unit_estimates[lo:hi] - problem.bayes_estimates[lo:hi]).reshape(-1)
            lhs = (A + Wi.T @ problem.Psi[i] @ Wi) @ shift
            rhs = Wi.T @ problem.Gamma[i].T @ sol.multiplier
            assert_allclose(lhs, rhs, rtol=0, atol=1e-10)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
    def test_optimal_against_feasible_points(self, seed, dim):
        rng = np.random.default_rng(seed)
        problem = random_multi_problem(rng, dim, max_areas=3, max_units=3)
        qp = encode_theorem3(problem)
        x = benchmark_mean_multi(problem).unit_estimates.reshape(-1)
        best = qp.objective(x)
        for _ in range(10):
            assert qp.objective(null_space_perturbation(qp, x, rng, 0.1)) >= best - 1e-12

    @given(problems())
    def test_scalar_embedding_agrees(self, problem):
        if np.any(problem.loss.area_loss <= 0):
            return  # Psi must be positive definite in the matrix formulation
        multi = benchmark_mean_multi(MultiBenchmarkProblem.from_scalar(problem))
        assert_allclose(multi.unit_estimates[:, 0], benchmark_mean(problem).unit_estimates, rtol=0, atol=1e-10)
