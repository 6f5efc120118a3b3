"""Two-stage benchmarked Bayes estimates for small areas and their units."""

from __future__ import annotations

from .bench_mean import benchmark_mean, benchmark_raked, percent_prmse_increase, pmse
from .bench_multi import MultiBenchmarkProblem, MultiBenchmarkSolution, benchmark_mean_multi
from .bench_var import VariabilityTargets, benchmark_mean_and_variability, default_variability_targets
from .core import (
    BenchmarkProblem,
    BenchmarkSolution,
    ConstraintWeights,
    LossWeights,
    PosteriorSummary,
    Scheme,
    SurveyDataset,
    constraint_residuals,
    constraint_weights_from_survey,
    make_loss_weights,
)
from .errors import (
    BenchmarkError,
    DegenerateProblemError,
    InsufficientSampleError,
    InvalidInputError,
    MissingInputError,
    SamplerDivergenceError,
    UnsupportedConfigurationError,
)
from .hb import HBModelSpec, McmcConfig, run_chain, run_chains, summarize_posterior
from .oracle import QuadraticProgram, encode_theorem1, encode_theorem3, solve_kkt
from .pipeline import benchmark_schemes
from .sim import SimSpec, default_sim_spec, run_simulation_study, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "BenchmarkError",
    "BenchmarkProblem",
    "BenchmarkSolution",
    "ConstraintWeights",
    "DegenerateProblemError",
    "HBModelSpec",
    "InsufficientSampleError",
    "InvalidInputError",
    "LossWeights",
    "McmcConfig",
    "MissingInputError",
    "MultiBenchmarkProblem",
    "MultiBenchmarkSolution",
    "PosteriorSummary",
    "QuadraticProgram",
    "SamplerDivergenceError",
    "Scheme",
    "SimSpec",
    "SurveyDataset",
    "UnsupportedConfigurationError",
    "VariabilityTargets",
    "benchmark_mean",
    "benchmark_mean_and_variability",
    "benchmark_mean_multi",
    "benchmark_raked",
    "benchmark_schemes",
    "constraint_residuals",
    "constraint_weights_from_survey",
    "default_sim_spec",
    "default_variability_targets",
    "encode_theorem1",
    "encode_theorem3",
    "make_loss_weights",
    "percent_prmse_increase",
    "pmse",
    "run_chain",
    "run_chains",
    "run_simulation_study",
    "simulate_dataset",
    "solve_kkt",
    "summarize_posterior",
]
