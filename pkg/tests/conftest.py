from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from benchsae.core import area_index, area_sums, constraint_residuals

DATA_DIR = Path(__file__).parent / "data"

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

#: Lines reported by tests/test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def assert_constraints(solution, constraint, tol=1e-10):
    within, overall = constraint_residuals(solution, constraint)
    assert within <= tol, f"within-area residual {within:.3e}"
    assert overall <= tol, f"overall residual {overall:.3e}"


def weighted_spread(solution, constraint):
    idx = area_index(constraint.sizes)
    dev = solution.unit_estimates - solution.area_estimates[idx]
    return area_sums(constraint.unit_weights * dev**2, constraint.sizes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_csv():
    return DATA_DIR / "tiny.csv"
