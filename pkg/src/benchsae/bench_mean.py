"""Closed-form two-stage mean benchmarking and posterior mean squared error."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    BenchmarkProblem,
    BenchmarkSolution,
    PosteriorSummary,
    area_index,
    area_sums,
    coerce_normalization,
    loss_scale,
    validate_problem,
)
from .errors import DegenerateProblemError, InvalidInputError, MissingInputError


@dataclass(frozen=True)
class MeanBenchmarkIntermediates:
    """Quantities shared by the unit- and area-level closed forms."""

    s: np.ndarray
    q: float
    theta_tilde_w: float
    correction_scale: float


def prepare_problem(problem: BenchmarkProblem) -> BenchmarkProblem:
    """Repair rounding-level normalisation and reject invalid problems."""
    if problem.loss is None:
        raise InvalidInputError("problem has no loss weights; see make_loss_weights")
    problem = replace(problem, constraint=coerce_normalization(problem.constraint))
    violations = validate_problem(problem)
    if violations:
        raise InvalidInputError("; ".join(violations))
    return problem


def mean_intermediates(problem: BenchmarkProblem) -> MeanBenchmarkIntermediates:
    cw, loss = problem.constraint, problem.loss
    s = loss_scale(loss, cw)
    q = float(np.sum(cw.area_weights**2 * s / (1.0 + loss.area_loss * s)))
    theta_w = problem.overall_bayes()
    return MeanBenchmarkIntermediates(s=s, q=q, theta_tilde_w=theta_w, correction_scale=cw.target - theta_w)


def benchmark_mean(problem: BenchmarkProblem) -> BenchmarkSolution:
    """Benchmark unit and area estimates to both weighted-mean constraints.

    Every unit moves by ``p* eta_i / (1 + phi_i s_i) * w_ij / xi_ij / q`` and
    every area by ``p* eta_i s_i / (1 + phi_i s_i) / q``, where ``p*`` is the
    gap between the target and the weighted Bayes aggregate.
    """
    problem = prepare_problem(problem)
    cw, loss = problem.constraint, problem.loss
    im = mean_intermediates(problem)
    if not np.isfinite(im.q) or im.q <= 0:
        raise DegenerateProblemError(f"normaliser q = {im.q!r} must be positive and finite")

    area_gain = cw.area_weights / (1.0 + loss.area_loss * im.s) * (im.correction_scale / im.q)
    idx = area_index(cw.sizes)
    units = problem.bayes_estimates + area_gain[idx] * cw.unit_weights / loss.unit_loss
    areas = problem.area_bayes() + area_gain * im.s
    if not (np.all(np.isfinite(units)) and np.all(np.isfinite(areas))):
        raise DegenerateProblemError("benchmarked estimates are not finite")
    return BenchmarkSolution(units, areas, scheme_tag=loss.scheme_tag, sizes=cw.sizes)


def benchmark_raked(problem: BenchmarkProblem) -> BenchmarkSolution:
    """Ratio (raking) adjustment of every unit and area by ``p / theta_w``."""
    cw = problem.constraint
    theta = problem.bayes_estimates
    if np.any(theta <= 0):
        raise InvalidInputError("raking needs strictly positive Bayes estimates")
    theta_w = problem.overall_bayes()
    if not theta_w > 0:
        raise InvalidInputError("raking needs a positive weighted Bayes aggregate")
    ratio = cw.target / theta_w
    return BenchmarkSolution(theta * ratio, problem.area_bayes() * ratio, scheme_tag="raked", sizes=cw.sizes)


def pmse(solution: BenchmarkSolution, posterior: PosteriorSummary) -> BenchmarkSolution:
    """Attach posterior mean squared errors: posterior variance plus squared shift."""
    if posterior is None or posterior.var_theta is None or posterior.var_area is None:
        raise MissingInputError("posterior variances are required for PMSE")
    if len(posterior.mean_theta) != len(solution.unit_estimates):
        raise InvalidInputError("posterior and solution disagree on the number of units")
    unit = posterior.var_theta + (posterior.mean_theta - solution.unit_estimates) ** 2
    area = posterior.var_area + (posterior.mean_area - solution.area_estimates) ** 2
    return replace(solution, unit_pmse=unit, area_pmse=area)


def _pct_increase(mse: np.ndarray, var: np.ndarray) -> np.ndarray:
    out = np.full(len(var), np.nan)
    ok = var > 0
    sd = np.sqrt(var[ok])
    out[ok] = 100.0 * (np.sqrt(mse[ok]) - sd) / sd
    return out


def percent_prmse_increase(solution: BenchmarkSolution, posterior: PosteriorSummary) -> np.ndarray:
    """Per-area percent increase of root PMSE over the posterior standard deviation.

    Areas with zero posterior variance get NaN.
    """
    if solution.area_pmse is None:
        solution = pmse(solution, posterior)
    return _pct_increase(solution.area_pmse, posterior.var_area)


def percent_prmse_increase_units(solution: BenchmarkSolution, posterior: PosteriorSummary) -> np.ndarray:
    """Unit-level counterpart of :func:`percent_prmse_increase`."""
    if solution.unit_pmse is None:
        solution = pmse(solution, posterior)
    return _pct_increase(solution.unit_pmse, posterior.var_theta)


def reduced_objective(problem: BenchmarkProblem, unit_estimates: np.ndarray) -> float:
    """Expected loss minus its estimator-free part, for given unit estimates.

    ``sum xi (theta - theta_B)^2 + sum phi (sum_j w (theta - theta_B))^2``
    """
    cw, loss = problem.constraint, problem.loss
    diff = np.asarray(unit_estimates, dtype=float) - problem.bayes_estimates
    area_shift = area_sums(cw.unit_weights * diff, cw.sizes)
    return float(np.sum(loss.unit_loss * diff**2) + np.sum(loss.area_loss * area_shift**2))
