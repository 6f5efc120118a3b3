"""Synthetic survey data from the logistic-normal model and the simulation study."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .core import ConstraintWeights, PosteriorSummary, SurveyDataset, area_index, constraint_weights_from_survey
from .errors import InvalidInputError
from .hb.model import ChainDraws, HBModelSpec, McmcConfig, run_chains, summarize_posterior
from .pipeline import SchemeResult, benchmark_schemes


@dataclass(frozen=True, eq=False)
class SimSpec:
    """Known parameters for simulating responses.

    ``covariates`` excludes the intercept; ``beta_true[0]`` is the intercept.
    ``survey_weights`` default to 1 for every unit (uniform within area, so
    area weights are proportional to area sample sizes).
    """

    covariates: np.ndarray
    sizes: np.ndarray
    beta_true: np.ndarray
    sigma2_u_true: float
    sigma2_e_true: float
    seed: int = 0
    survey_weights: np.ndarray | None = None
    area_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        cov = np.array(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        sizes = np.array(self.sizes, dtype=np.int64)
        beta = np.array(self.beta_true, dtype=float).reshape(-1)
        n = int(sizes.sum())
        if cov.shape[0] != n:
            raise InvalidInputError(f"covariates have {cov.shape[0]} rows, sizes sum to {n}")
        if beta.shape != (cov.shape[1] + 1,):
            raise InvalidInputError("beta_true needs one entry per covariate plus the intercept")
        if self.sigma2_u_true < 0 or self.sigma2_e_true < 0:
            raise InvalidInputError("variance components must be nonnegative")
        wts = np.ones(n) if self.survey_weights is None else np.array(self.survey_weights, dtype=float)
        if wts.shape != (n,):
            raise InvalidInputError("one survey weight per unit is required")
        ids = self.area_ids or tuple(f"A{i + 1:02d}" for i in range(len(sizes)))
        for name, value in (("covariates", cov), ("sizes", sizes), ("beta_true", beta), ("survey_weights", wts)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "area_ids", tuple(ids))

    @property
    def design(self) -> np.ndarray:
        return np.column_stack([np.ones(len(self.covariates)), self.covariates])

    def with_parameters(self, beta, sigma2_u: float, sigma2_e: float, seed: int) -> "SimSpec":
        return SimSpec(self.covariates, self.sizes, beta, sigma2_u, sigma2_e, seed, self.survey_weights, self.area_ids)


def default_sim_spec(seed: int = 0, m: int = 20, n_range: tuple[int, int] = (5, 50)) -> SimSpec:
    """Desk-scale fixture: log-uniform area sizes, two N(0,1) covariates plus intercept,
    ``beta = (-1, 0.5, -0.25)``, ``sigma2_u = 0.25``, ``sigma2_e = 1``.

    The design is drawn from its own stream so ``seed`` also fixes the design.
    """
    rng = np.random.default_rng([seed, 2])
    lo, hi = np.log(n_range[0]), np.log(n_range[1])
    sizes = np.clip(np.round(np.exp(rng.uniform(lo, hi, size=m))), n_range[0], n_range[1]).astype(np.int64)
    covariates = rng.standard_normal((int(sizes.sum()), 2))
    return SimSpec(covariates, sizes, [-1.0, 0.5, -0.25], 0.25, 1.0, seed)


class Simulation(NamedTuple):
    dataset: SurveyDataset
    probability: np.ndarray  # expit(X beta + Z u + e)
    u: np.ndarray
    e: np.ndarray


def simulate(spec: SimSpec) -> Simulation:
    """Draw ``u``, ``e`` and Bernoulli responses; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    m, n = len(spec.sizes), int(spec.sizes.sum())
    u = np.sqrt(spec.sigma2_u_true) * rng.standard_normal(m)
    e = np.sqrt(spec.sigma2_e_true) * rng.standard_normal(n)
    prob = expit(spec.design @ spec.beta_true + u[area_index(spec.sizes)] + e)
    y = (rng.random(n) < prob).astype(float)
    unit_ids = [f"{spec.area_ids[i]}-{j + 1}" for i, size in enumerate(spec.sizes) for j in range(size)]
    data = SurveyDataset(spec.area_ids, spec.sizes, unit_ids, y, spec.survey_weights, spec.covariates)
    return Simulation(data, prob, u, e)


def simulate_dataset(spec: SimSpec) -> SurveyDataset:
    return simulate(spec).dataset


@dataclass(eq=False)
class SourceResult:
    """Fit and benchmarked estimates for one data source."""

    label: str
    dataset: SurveyDataset
    constraint: ConstraintWeights
    posterior: PosteriorSummary
    chains: list[ChainDraws] = field(repr=False)
    schemes: dict[str, SchemeResult] = field(repr=False)

    def adjustment_series(self, scheme: str) -> np.ndarray:
        """``(n_i, delta_scheme - delta_Bayes)`` rows."""
        return np.column_stack([self.dataset.sizes, self.schemes[scheme].adjustment])

    def prmse_series(self, scheme: str) -> np.ndarray:
        """``(n_i, %PRMSE)`` rows."""
        return np.column_stack([self.dataset.sizes, self.schemes[scheme].pct_prmse])


@dataclass(eq=False)
class StudyReport:
    reference: SourceResult
    simulated: SourceResult | None
    truth: Simulation

    @property
    def scheme_names(self) -> list[str]:
        return list(self.reference.schemes)

    def difference_series(self, scheme: str) -> np.ndarray:
        """Area estimate under the re-simulated data minus under the reference data."""
        if self.simulated is None:
            raise InvalidInputError("study was run without the re-simulation stage")
        return self.simulated.schemes[scheme].solution.area_estimates - self.reference.schemes[scheme].solution.area_estimates


def fit_source(
    label: str,
    data: SurveyDataset,
    schemes: Sequence[str],
    config: McmcConfig,
    hyper: dict | None = None,
    target: str = "survey",
    backend: str | None = None,
    h: np.ndarray | None = None,
    g: float | None = None,
) -> SourceResult:
    """Fit the hierarchical model to ``data`` and benchmark every scheme.

    ``target="bayes"`` replaces the survey target by the weighted Bayes
    aggregate, which makes every benchmarking adjustment zero. ``h`` and
    ``g`` are passed to :func:`benchmark_schemes`.
    """
    spec = HBModelSpec.from_dataset(data, **(hyper or {}))
    chains = run_chains(spec, config, backend=backend)
    cw = constraint_weights_from_survey(data)
    post = summarize_posterior(chains, cw)
    if target == "bayes":
        cw = ConstraintWeights(cw.unit_weights, cw.area_weights, float(cw.area_weights @ post.mean_area), cw.sizes)
    elif target != "survey":
        raise InvalidInputError(f"unknown target mode {target!r}")
    return SourceResult(label, data, cw, post, chains, benchmark_schemes(post, cw, schemes, h=h, g=g))


def run_simulation_study(
    spec: SimSpec,
    schemes: Sequence[str],
    config: McmcConfig,
    hyper: dict | None = None,
    resimulate: bool = True,
    target: str = "survey",
    backend: str | None = None,
) -> StudyReport:
    """Simulate, fit and benchmark; optionally repeat on data re-simulated from the fit.

    The reference stage plays the role of the observed survey. The second
    stage simulates fresh responses with the same covariates from the posterior
    means of ``beta``, ``sigma2_u`` and ``sigma2_e`` and repeats the analysis,
    so the two stages can be compared area by area.
    """
    truth = simulate(spec)
    ref = fit_source("reference", truth.dataset, schemes, config, hyper, target, backend)
    simulated = None
    if resimulate:
        draws = ref.chains
        beta = np.concatenate([c.beta for c in draws]).mean(axis=0)
        s2u = float(np.concatenate([c.sigma2_u for c in draws]).mean())
        s2e = float(np.concatenate([c.sigma2_e for c in draws]).mean())
        seed2 = int(np.random.SeedSequence([spec.seed, 1]).generate_state(1)[0])
        spec2 = spec.with_parameters(beta, s2u, s2e, seed2)
        data2 = simulate_dataset(spec2)
        simulated = fit_source("simulated", data2, schemes, config, hyper, target, backend)
    return StudyReport(ref, simulated, truth)
