"""Exception hierarchy shared by the estimators, the sampler and the CLI."""

from __future__ import annotations


class BenchmarkError(Exception):
    """Base class for every error raised by :mod:`benchsae`."""


class InvalidInputError(BenchmarkError, ValueError):
    """Inputs violate a documented invariant (weights, dimensions, signs)."""


class MissingInputError(BenchmarkError, ValueError):
    """An operation needs data that was not supplied, e.g. posterior variances."""


class DegenerateProblemError(BenchmarkError, ArithmeticError):
    """A closed form cannot be evaluated: singular matrix, zero normaliser, NaN."""


class UnsupportedConfigurationError(BenchmarkError, ValueError):
    """The requested estimator exists only for a narrower configuration."""


class SamplerDivergenceError(BenchmarkError, RuntimeError):
    """The Gibbs sampler produced a non-finite draw or a runaway rejection loop."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class InsufficientSampleError(BenchmarkError, ValueError):
    """Too few retained draws to form the requested Monte Carlo summary."""
