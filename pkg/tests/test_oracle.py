from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from benchsae.bench_mean import benchmark_mean
from benchsae.bench_multi import MultiBenchmarkProblem, benchmark_mean_multi
from benchsae.core import BenchmarkProblem, ConstraintWeights, LossWeights
from benchsae.errors import DegenerateProblemError
from benchsae.oracle import (
    QuadraticProgram,
    encode_theorem1,
    encode_theorem3,
    random_multi_problem,
    random_problem,
    solve_kkt,
    solve_projected_cg,
)
from benchsae.verify import dump_instance, run_verification


class TestSolveKkt:
    def test_unconstrained_returns_center(self, rng):
        c = rng.normal(size=4)
        B = rng.normal(size=(4, 4))
        qp = QuadraticProgram(B @ B.T + np.eye(4), c, np.zeros((0, 4)), [])
        assert_allclose(solve_kkt(qp), c, rtol=0, atol=1e-14)

    def test_hyperplane_projection(self, rng):
        c = rng.normal(size=5)
        qp = QuadraticProgram(np.eye(5), c, np.ones((1, 5)), [2.0])
        assert_allclose(solve_kkt(qp), c + (2.0 - c.sum()) / 5, rtol=0, atol=1e-14)

    @pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
    def test_singular_system(self):
        qp = QuadraticProgram(np.eye(2), [0.0, 0.0], [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
        with pytest.raises(DegenerateProblemError):
            solve_kkt(qp)

    @pytest.mark.parametrize("seed", range(20))
    def test_agrees_with_projected_cg(self, seed):
        problem = random_problem(np.random.default_rng(seed))
        qp = encode_theorem1(problem)
        assert_allclose(solve_kkt(qp), solve_projected_cg(qp), rtol=0, atol=1e-7)

    @pytest.mark.parametrize("seed", range(10))
    def test_multi_agrees_with_projected_cg(self, seed):
        qp = encode_theorem3(random_multi_problem(np.random.default_rng(seed), 2))
        assert_allclose(solve_kkt(qp), solve_projected_cg(qp), rtol=0, atol=1e-7)


class TestEncodings:
    def test_single_unit(self):
        cw = ConstraintWeights.from_ragged([[1.0]], [1.0], 0.3)
        problem = BenchmarkProblem.from_ragged([[0.9]], cw, LossWeights.from_ragged([[2.0]], [3.0]))
        qp = encode_theorem1(problem)
        assert qp.Q.shape == (1, 1)
        assert solve_kkt(qp)[0] == pytest.approx(0.3, abs=1e-15)

    def test_equal_weights_equal_shifts(self, rng):
        problem = random_problem(rng)
        cw = problem.constraint
        problem = problem.with_loss(LossWeights(cw.unit_weights, cw.area_weights))
        shift = solve_kkt(encode_theorem1(problem)) - problem.bayes_estimates
        start = 0
        for n in cw.sizes:
            assert np.ptp(shift[start : start + n]) <= 1e-12
            start += n

    def test_objective_zero_at_center(self, rng):
        qp = encode_theorem1(random_problem(rng))
        assert qp.objective(qp.center) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_dim1_reduction_identical(self, seed):
        problem = random_problem(np.random.default_rng(seed), "constant")
        a = encode_theorem1(problem)
        b = encode_theorem3(MultiBenchmarkProblem.from_scalar(problem))
        assert_allclose(a.Q, b.Q, rtol=0, atol=1e-15)
        assert_allclose(a.C, b.C, rtol=0, atol=1e-15)
        assert_allclose(a.r, b.r)

    def test_target_met_gives_bayes(self, rng):
        problem = random_multi_problem(rng, 2)
        problem = MultiBenchmarkProblem(
            problem.bayes_estimates, problem.W, problem.Gamma, problem.Lambda, problem.Psi,
            problem.overall_bayes(), problem.sizes,
        )
        assert_allclose(solve_kkt(encode_theorem3(problem)), problem.bayes_estimates.reshape(-1), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_dim2_matches_closed_form(self, seed):
        problem = random_multi_problem(np.random.default_rng(seed), 2)
        closed = benchmark_mean_multi(problem).unit_estimates.reshape(-1)
        assert np.max(np.abs(closed - solve_kkt(encode_theorem3(problem)))) <= 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_objectives_agree(self, seed):
        problem = random_problem(np.random.default_rng(seed))
        qp = encode_theorem1(problem)
        a = qp.objective(solve_kkt(qp))
        b = qp.objective(benchmark_mean(problem).unit_estimates)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


class TestVerification:
    def test_default_passes(self):
        report = run_verification(instances=30, seed=3)
        assert report.ok
        assert report.max_deviation <= 1e-9
        assert "PASS" in report.summary()

    def test_injected_fault_fails(self):
        report = run_verification(instances=10, seed=3, fault=1e-6)
        assert not report.ok
        assert len(report.failures) == len(report.results)
        assert '"deviation"' in dump_instance(report.failures[0])
        assert '"Psi"' in dump_instance(report.failures[-1])
