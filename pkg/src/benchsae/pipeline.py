"""Run several benchmarked estimators against one posterior."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bench_mean import benchmark_mean, percent_prmse_increase, percent_prmse_increase_units, pmse
from .bench_var import benchmark_mean_and_variability, default_variability_targets, variability_targets
from .core import (
    BenchmarkProblem,
    BenchmarkSolution,
    ConstraintWeights,
    LossWeights,
    PosteriorSummary,
    Scheme,
    make_loss_weights,
)
from .errors import InvalidInputError

#: Scheme name for benchmarking means plus within-area variability.
VARIABILITY = "variability"


@dataclass(frozen=True, eq=False)
class SchemeResult:
    name: str
    solution: BenchmarkSolution
    adjustment: np.ndarray  # area estimate minus Bayes area estimate
    pct_prmse: np.ndarray  # per area
    unit_pct_prmse: np.ndarray
    variability_target: np.ndarray | None = None


def scheme_names(schemes: Sequence[str]) -> list[str]:
    """Canonical scheme names, preserving order and dropping duplicates."""
    out = []
    for s in schemes:
        key = str(s).strip().lower()
        name = VARIABILITY if key in (VARIABILITY, "var", "bm2") else Scheme.parse(key).value
        if name not in out:
            out.append(name)
    if not out:
        raise InvalidInputError("at least one scheme is required")
    return out


def variability_loss(constraint: ConstraintWeights) -> LossWeights:
    """Loss with unit weights equal to the constraint weights and area weights ``eta``."""
    return LossWeights(constraint.unit_weights, constraint.area_weights, VARIABILITY)


def benchmark_schemes(
    posterior: PosteriorSummary,
    constraint: ConstraintWeights,
    schemes: Sequence[str],
    h: np.ndarray | None = None,
    g: float | None = None,
) -> dict[str, SchemeResult]:
    """Benchmark the posterior means under every requested scheme and attach PMSE.

    ``h`` gives the within-area variability targets for the ``variability``
    scheme; without it the posterior expectation of the weighted spread is used.
    """
    base = BenchmarkProblem.from_posterior(posterior, constraint)
    results: dict[str, SchemeResult] = {}
    for name in scheme_names(schemes):
        target = None
        if name == VARIABILITY:
            problem = base.with_loss(variability_loss(constraint))
            targets = variability_targets(problem, h) if h is not None else default_variability_targets(posterior, constraint)
            target = targets.h
            sol = benchmark_mean_and_variability(problem, targets)
        else:
            loss = make_loss_weights(name, base, g=g if name == Scheme.RAKED.value else None)
            sol = benchmark_mean(base.with_loss(loss))
        sol = pmse(sol, posterior)
        results[name] = SchemeResult(
            name=name,
            solution=sol,
            adjustment=sol.area_estimates - posterior.mean_area,
            pct_prmse=percent_prmse_increase(sol, posterior),
            unit_pct_prmse=percent_prmse_increase_units(sol, posterior),
            variability_target=target,
        )
    return results


def dominates(pmse_a: np.ndarray, pmse_b: np.ndarray) -> bool:
    """True when ``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    return bool(np.all(pmse_a <= pmse_b) and np.any(pmse_a < pmse_b))


def mutually_non_dominating(pmse_a: np.ndarray, pmse_b: np.ndarray) -> bool:
    """Each estimator has strictly smaller PMSE than the other in at least one area."""
    return bool(np.any(pmse_a < pmse_b) and np.any(pmse_b < pmse_a))
