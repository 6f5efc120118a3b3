"""Hierarchical Bayes model, Gibbs sampler and posterior summaries."""

from .diagnostics import (
    DiagnosticReport,
    autocorrelation,
    batch_means_se,
    effective_sample_size,
    mcmc_diagnostics,
    scale_reduction,
)
from .draws_io import read_draws, write_draws
from .model import (
    PUBLISHED_CONFIG,
    ChainDraws,
    GibbsState,
    HBModelSpec,
    McmcConfig,
    gibbs_step,
    initial_state,
    run_chain,
    run_chains,
    sample_theta_rejection,
    successive_conditional_draws,
    summarize_posterior,
)
from ..core import PosteriorSummary

__all__ = [
    "PUBLISHED_CONFIG",
    "ChainDraws",
    "DiagnosticReport",
    "GibbsState",
    "HBModelSpec",
    "McmcConfig",
    "PosteriorSummary",
    "autocorrelation",
    "batch_means_se",
    "effective_sample_size",
    "gibbs_step",
    "initial_state",
    "mcmc_diagnostics",
    "read_draws",
    "run_chain",
    "run_chains",
    "sample_theta_rejection",
    "scale_reduction",
    "successive_conditional_draws",
    "summarize_posterior",
    "write_draws",
]
