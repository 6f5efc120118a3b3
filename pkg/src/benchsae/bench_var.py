"""Two-stage benchmarking that also fixes the weighted spread within each area."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bench_mean import prepare_problem
from .core import (
    BenchmarkProblem,
    BenchmarkSolution,
    ConstraintWeights,
    PosteriorSummary,
    area_index,
    area_sums,
)
from .errors import DegenerateProblemError, InvalidInputError, MissingInputError, UnsupportedConfigurationError

#: Relative tolerance for deciding that the unit loss weights equal the unit constraint weights.
LOSS_EQUALS_WEIGHTS_RTOL = 1e-10
#: Spreads below (this many ulps of the estimates)^2 are treated as zero.
SPREAD_NOISE_ULPS = 64


@dataclass(frozen=True, eq=False)
class VariabilityTargets:
    """Target weighted variability ``h`` and the Bayes estimates' own spread ``d``."""

    h: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        d = np.array(self.d, dtype=float)
        if h.shape != d.shape or h.ndim != 1:
            raise InvalidInputError("h and d must be 1-d arrays of equal length")
        if np.any(~np.isfinite(h)) or np.any(h < 0):
            raise InvalidInputError("variability targets must be finite and nonnegative")
        h.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "d", d)


def bayes_spread(problem: BenchmarkProblem) -> np.ndarray:
    """``d_i = sum_j w_ij (theta_B_ij - theta_B_iw)^2``."""
    cw = problem.constraint
    dev = problem.bayes_estimates - problem.area_bayes()[area_index(cw.sizes)]
    return area_sums(cw.unit_weights * dev**2, cw.sizes)


def variability_targets(problem: BenchmarkProblem, h) -> VariabilityTargets:
    """Pair externally supplied targets ``h`` with the spread of the Bayes estimates."""
    h = np.asarray(h, dtype=float)
    if h.shape != (problem.constraint.n_areas,):
        raise InvalidInputError(f"expected {problem.constraint.n_areas} variability targets, got {h.shape}")
    return VariabilityTargets(h=h, d=bayes_spread(problem))


def default_variability_targets(posterior: PosteriorSummary, constraint: ConstraintWeights) -> VariabilityTargets:
    """Posterior expectation of the weighted within-area spread.

    ``E[sum_j w_ij (theta_ij - theta_iw)^2 | y]`` expands to
    ``sum_j w_ij [V_ij + (m_ij - m_i)^2] - 2 sum_j w_ij Cov(theta_ij, theta_iw) + V(theta_iw)``.
    """
    if posterior.within_area_cov is None or len(posterior.within_area_cov) != constraint.n_areas:
        raise MissingInputError("posterior within-area covariances are required")
    sizes = constraint.sizes
    w = constraint.unit_weights
    mean = posterior.mean_theta
    area_mean = area_sums(w * mean, sizes)
    d = area_sums(w * (mean - area_mean[area_index(sizes)]) ** 2, sizes)

    offsets = np.concatenate(([0], np.cumsum(sizes)))
    h = np.empty(len(sizes))
    for i, cov in enumerate(posterior.within_area_cov):
        wi = w[offsets[i] : offsets[i + 1]]
        cov_with_mean = cov @ wi
        var_mean = float(wi @ cov_with_mean)
        h[i] = float(wi @ np.diag(cov)) + d[i] - 2.0 * float(wi @ cov_with_mean) + var_mean
    return VariabilityTargets(h=np.maximum(h, 0.0), d=d)


def benchmark_mean_and_variability(problem: BenchmarkProblem, targets: VariabilityTargets) -> BenchmarkSolution:
    """Benchmark means at both levels and the weighted variability within areas.

    Only defined when the unit loss weights equal the unit constraint weights.
    Area estimates coincide with :func:`benchmark_mean` in that case; unit
    deviations from the area mean are the Bayes deviations scaled by
    ``sqrt(h_i / d_i)``.
    """
    problem = prepare_problem(problem)
    cw, loss = problem.constraint, problem.loss
    if not np.allclose(loss.unit_loss, cw.unit_weights, rtol=LOSS_EQUALS_WEIGHTS_RTOL, atol=0.0):
        raise UnsupportedConfigurationError(
            "variability benchmarking requires unit loss weights equal to the unit constraint weights"
        )
    m = cw.n_areas
    if len(targets.h) != m or len(targets.d) != m:
        raise InvalidInputError(f"expected {m} variability targets")

    eta, phi = cw.area_weights, loss.area_loss
    if np.any(1.0 + phi <= 0):
        raise InvalidInputError("1 + phi_i must be positive for every area")
    denom = float(np.sum(eta**2 / (1.0 + phi)))
    if not np.isfinite(denom) or denom <= 0:
        raise DegenerateProblemError(f"normaliser {denom!r} must be positive and finite")

    area_bayes = problem.area_bayes()
    shift = (cw.target - problem.overall_bayes()) * eta / (1.0 + phi) / denom
    areas = area_bayes + shift

    h, d = targets.h, targets.d
    scale = np.zeros(m)
    # A spread at the level of rounding error in the deviations carries no direction.
    noise = (SPREAD_NOISE_ULPS * np.finfo(float).eps * max(1.0, float(np.max(np.abs(problem.bayes_estimates))))) ** 2
    spread = d > noise
    flat = ~spread
    if np.any(flat & (h > 0)):
        bad = int(np.flatnonzero(flat & (h > 0))[0]) + 1
        raise DegenerateProblemError(f"area {bad}: Bayes estimates have zero spread but target h > 0")
    scale[spread] = np.sqrt(h[spread] / d[spread])

    idx = area_index(cw.sizes)
    dev = scale[idx] * (problem.bayes_estimates - area_bayes[idx])
    dev -= area_sums(cw.unit_weights * dev, cw.sizes)[idx]  # remove rounding drift of the weighted mean
    units = areas[idx] + dev
    return BenchmarkSolution(units, areas, scheme_tag=f"{loss.scheme_tag}+variability", sizes=cw.sizes)


def variability_residual(solution: BenchmarkSolution, constraint: ConstraintWeights, h) -> float:
    """Largest gap between the achieved weighted within-area spread and ``h``."""
    idx = area_index(constraint.sizes)
    dev = solution.unit_estimates - solution.area_estimates[idx]
    spread = area_sums(constraint.unit_weights * dev**2, constraint.sizes)
    return float(np.max(np.abs(spread - np.asarray(h, dtype=float))))
