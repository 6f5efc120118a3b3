"""Randomized comparison of the closed-form estimators against the KKT oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bench_mean import benchmark_mean
from .bench_multi import MultiBenchmarkProblem, benchmark_mean_multi
from .core import BenchmarkProblem, Scheme
from .oracle import encode_theorem1, encode_theorem3, random_multi_problem, random_problem, solve_kkt

#: Agreement threshold between closed form and oracle.
VERIFY_TOL = 1e-9
#: Loss-weight sources cycled through by the scalar instances; ``None`` means random positive weights.
SCALAR_SOURCES: tuple[str | None, ...] = tuple(s.value for s in Scheme) + (None,)
MULTI_DIMS = (1, 2, 3)


@dataclass
class InstanceResult:
    kind: str
    index: int
    deviation: float
    problem: object = field(repr=False)


@dataclass
class VerificationReport:
    results: list[InstanceResult]
    tol: float = VERIFY_TOL

    @property
    def max_deviation(self) -> float:
        return max((r.deviation for r in self.results), default=0.0)

    @property
    def failures(self) -> list[InstanceResult]:
        return [r for r in self.results if not r.deviation <= self.tol]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = []
        for kind in dict.fromkeys(r.kind for r in self.results):
            devs = [r.deviation for r in self.results if r.kind == kind]
            lines.append(f"{kind}: {len(devs)} instances, max deviation {max(devs):.3e}")
        lines.append(f"overall max deviation {self.max_deviation:.3e} (tolerance {self.tol:.0e})")
        lines.append("PASS" if self.ok else f"FAIL: {len(self.failures)} instance(s) above tolerance")
        return "\n".join(lines)


def scalar_deviation(problem: BenchmarkProblem, fault: float = 0.0) -> float:
    closed = benchmark_mean(problem).unit_estimates + fault
    return float(np.max(np.abs(closed - solve_kkt(encode_theorem1(problem)))))


def multi_deviation(problem: MultiBenchmarkProblem, fault: float = 0.0) -> float:
    closed = benchmark_mean_multi(problem).unit_estimates.reshape(-1) + fault
    return float(np.max(np.abs(closed - solve_kkt(encode_theorem3(problem)))))


def run_verification(
    instances: int = 100,
    seed: int = 0,
    fault: float = 0.0,
    max_areas: int = 5,
    max_units: int = 6,
    multivariate: bool = True,
) -> VerificationReport:
    """``instances`` scalar problems plus, optionally, as many multivariate ones.

    ``fault`` is added to every closed-form output; a nonzero value is a
    negative control that must make the check fail.
    """
    rng = np.random.default_rng(seed)
    results = []
    for k in range(instances):
        source = SCALAR_SOURCES[k % len(SCALAR_SOURCES)]
        problem = random_problem(rng, source, max_areas, max_units)
        results.append(InstanceResult(f"scalar[{source or 'random'}]", k, scalar_deviation(problem, fault), problem))
    if multivariate:
        for k in range(instances):
            dim = MULTI_DIMS[k % len(MULTI_DIMS)]
            problem = random_multi_problem(rng, dim, max_areas, max_units)
            results.append(InstanceResult(f"multivariate[dim={dim}]", k, multi_deviation(problem, fault), problem))
    return VerificationReport(results)


def dump_instance(result: InstanceResult) -> str:
    """JSON description of an instance, enough to rebuild it."""
    p = result.problem
    payload: dict = {"kind": result.kind, "index": result.index, "deviation": result.deviation}
    if isinstance(p, BenchmarkProblem):
        payload.update(
            bayes_estimates=p.bayes_estimates.tolist(),
            sizes=p.constraint.sizes.tolist(),
            unit_weights=p.constraint.unit_weights.tolist(),
            area_weights=p.constraint.area_weights.tolist(),
            target=p.constraint.target,
            unit_loss=p.loss.unit_loss.tolist(),
            area_loss=p.loss.area_loss.tolist(),
        )
    else:
        payload.update(
            bayes_estimates=p.bayes_estimates.tolist(),
            sizes=p.sizes.tolist(),
            W=p.W.tolist(),
            Gamma=p.Gamma.tolist(),
            Lambda=p.Lambda.tolist(),
            Psi=p.Psi.tolist(),
            target=np.asarray(p.target).tolist(),
        )
    return json.dumps(payload, indent=1)
