"""Domain types shared by the benchmarking estimators.

Unit-level quantities are stored as flat arrays in area order (all units of
area 0, then area 1, ...) together with the per-area unit counts ``sizes``.
Areas are never reordered, so every output lines up positionally with its
input.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidInputError, MissingInputError

#: Normalisation error above which externally supplied weights are rejected.
NORMALIZATION_REJECT_TOL = 1e-6
#: Normalisation error below which weights are accepted as exact.
NORMALIZATION_EXACT_TOL = 1e-12


def _frozen(values, dtype=float, ndim: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidInputError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def area_index(sizes: np.ndarray) -> np.ndarray:
    """Map each unit (flat position) to its area number."""
    return np.repeat(np.arange(len(sizes)), sizes)


def area_offsets(sizes: np.ndarray) -> np.ndarray:
    """Start offset of every area in the flat unit arrays, plus the end."""
    return np.concatenate(([0], np.cumsum(sizes)))


def area_sums(values: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Sum a flat per-unit array within each area."""
    return np.bincount(area_index(sizes), weights=values, minlength=len(sizes))


def split_areas(values: np.ndarray, sizes: np.ndarray) -> list[np.ndarray]:
    """Split a flat per-unit array into one array per area."""
    return np.split(np.asarray(values), np.cumsum(sizes)[:-1])


def _sizes_of(blocks: Sequence[Sequence]) -> np.ndarray:
    return np.array([len(b) for b in blocks], dtype=np.int64)


# --------------------------------------------------------------------------
# survey data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitRecord:
    unit_id: str
    response: int
    survey_weight: float
    covariates: tuple[float, ...]


@dataclass(frozen=True)
class AreaBlock:
    area_id: str
    units: tuple[UnitRecord, ...]


@dataclass(frozen=True, eq=False)
class SurveyDataset:
    """Unit records (binary response, survey weight, covariates) grouped by area.

    Covariates exclude the intercept; model builders add it.
    """

    area_ids: tuple[str, ...]
    sizes: np.ndarray
    unit_ids: tuple[str, ...]
    response: np.ndarray
    survey_weight: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        sizes = _frozen(self.sizes, dtype=np.int64, ndim=1)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "area_ids", tuple(str(a) for a in self.area_ids))
        object.__setattr__(self, "unit_ids", tuple(str(u) for u in self.unit_ids))
        object.__setattr__(self, "response", _frozen(self.response, ndim=1))
        object.__setattr__(self, "survey_weight", _frozen(self.survey_weight, ndim=1))
        cov = np.array(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        object.__setattr__(self, "covariates", _frozen(cov, ndim=2))

        n = int(sizes.sum())
        if len(self.area_ids) != len(sizes):
            raise InvalidInputError("one area id per area is required")
        if np.any(sizes < 1):
            bad = self.area_ids[int(np.argmin(sizes))]
            raise InvalidInputError(f"area {bad!r} has no units")
        for name in ("unit_ids", "response", "survey_weight", "covariates"):
            if len(getattr(self, name)) != n:
                raise InvalidInputError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        if not np.all(np.isin(self.response, (0.0, 1.0))):
            raise InvalidInputError("responses must be binary (0/1)")
        if not np.all(np.isfinite(self.survey_weight)) or np.any(self.survey_weight <= 0):
            raise InvalidInputError("survey weights must be positive and finite")
        if self.covariates.shape[1] < 1:
            raise InvalidInputError("at least one covariate column is required")
        if not np.all(np.isfinite(self.covariates)):
            raise InvalidInputError("covariates must be finite")

    @property
    def n_areas(self) -> int:
        return len(self.sizes)

    @property
    def n_units(self) -> int:
        return int(self.sizes.sum())

    @classmethod
    def from_blocks(cls, blocks: Iterable[AreaBlock]) -> "SurveyDataset":
        blocks = list(blocks)
        units = [u for b in blocks for u in b.units]
        return cls(
            area_ids=tuple(b.area_id for b in blocks),
            sizes=_sizes_of([b.units for b in blocks]),
            unit_ids=tuple(u.unit_id for u in units),
            response=[u.response for u in units],
            survey_weight=[u.survey_weight for u in units],
            covariates=[u.covariates for u in units],
        )

    def blocks(self) -> Iterator[AreaBlock]:
        offsets = area_offsets(self.sizes)
        for i, area_id in enumerate(self.area_ids):
            lo, hi = offsets[i], offsets[i + 1]
            yield AreaBlock(
                area_id,
                tuple(
                    UnitRecord(
                        self.unit_ids[k],
                        int(self.response[k]),
                        float(self.survey_weight[k]),
                        tuple(self.covariates[k]),
                    )
                    for k in range(lo, hi)
                ),
            )


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstraintWeights:
    """Benchmarking constraint: within-area unit weights, area weights, target.

    The weights are stored as given; :func:`validate_problem` reports
    normalisation failures and :func:`coerce_normalization` repairs small ones.
    """

    unit_weights: np.ndarray
    area_weights: np.ndarray
    target: float
    sizes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "unit_weights", _frozen(self.unit_weights, ndim=1))
        object.__setattr__(self, "area_weights", _frozen(self.area_weights, ndim=1))
        object.__setattr__(self, "sizes", _frozen(self.sizes, dtype=np.int64, ndim=1))
        object.__setattr__(self, "target", float(self.target))
        if len(self.area_weights) != len(self.sizes):
            raise InvalidInputError("area_weights and sizes disagree on the number of areas")
        if len(self.unit_weights) != int(self.sizes.sum()):
            raise InvalidInputError("unit_weights length does not match sizes")
        if np.any(self.sizes < 1):
            raise InvalidInputError("every area needs at least one unit")

    @classmethod
    def from_ragged(
        cls, unit_weights: Sequence[Sequence[float]], area_weights: Sequence[float], target: float
    ) -> "ConstraintWeights":
        return cls(
            unit_weights=np.concatenate([np.asarray(w, dtype=float) for w in unit_weights]),
            area_weights=area_weights,
            target=target,
            sizes=_sizes_of(unit_weights),
        )

    @property
    def n_areas(self) -> int:
        return len(self.sizes)


@dataclass(frozen=True, eq=False)
class LossWeights:
    """Loss weights: one per unit (xi) and one per area (phi)."""

    unit_loss: np.ndarray
    area_loss: np.ndarray
    scheme_tag: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "unit_loss", _frozen(self.unit_loss, ndim=1))
        object.__setattr__(self, "area_loss", _frozen(self.area_loss, ndim=1))

    @classmethod
    def from_ragged(
        cls, unit_loss: Sequence[Sequence[float]], area_loss: Sequence[float], scheme_tag: str = "custom"
    ) -> "LossWeights":
        return cls(np.concatenate([np.asarray(x, dtype=float) for x in unit_loss]), area_loss, scheme_tag)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Monte Carlo moments of the unit parameters.

    ``within_area_cov[i]`` is the ``n_i x n_i`` posterior covariance of the
    units of area ``i``. ``mean_area``/``var_area`` are the posterior mean and
    variance of the weighted area mean under the constraint weights used when
    summarising.
    """

    mean_theta: np.ndarray
    var_theta: np.ndarray
    within_area_cov: tuple[np.ndarray, ...]
    mean_area: np.ndarray
    var_area: np.ndarray
    retained_draws: int
    sizes: np.ndarray

    def __post_init__(self):
        for name in ("mean_theta", "var_theta", "mean_area", "var_area"):
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim=1))
        object.__setattr__(self, "sizes", _frozen(self.sizes, dtype=np.int64, ndim=1))
        object.__setattr__(
            self, "within_area_cov", tuple(_frozen(c, ndim=2) for c in self.within_area_cov)
        )
        n = int(self.sizes.sum())
        if len(self.mean_theta) != n or len(self.var_theta) != n:
            raise InvalidInputError("unit moments do not match sizes")
        if len(self.within_area_cov) != len(self.sizes):
            raise InvalidInputError("one covariance matrix per area is required")


# --------------------------------------------------------------------------
# problems and solutions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    bayes_estimates: np.ndarray
    constraint: ConstraintWeights
    loss: LossWeights | None = None
    posterior: PosteriorSummary | None = None

    def __post_init__(self):
        object.__setattr__(self, "bayes_estimates", _frozen(self.bayes_estimates, ndim=1))

    @classmethod
    def from_ragged(
        cls,
        bayes_estimates: Sequence[Sequence[float]],
        constraint: ConstraintWeights,
        loss: LossWeights | None = None,
        posterior: PosteriorSummary | None = None,
    ) -> "BenchmarkProblem":
        flat = np.concatenate([np.asarray(b, dtype=float) for b in bayes_estimates])
        return cls(flat, constraint, loss, posterior)

    @classmethod
    def from_posterior(
        cls, posterior: PosteriorSummary, constraint: ConstraintWeights, loss: LossWeights | None = None
    ) -> "BenchmarkProblem":
        return cls(posterior.mean_theta, constraint, loss, posterior)

    @property
    def sizes(self) -> np.ndarray:
        return self.constraint.sizes

    def with_loss(self, loss: LossWeights) -> "BenchmarkProblem":
        return replace(self, loss=loss)

    def with_target(self, target: float) -> "BenchmarkProblem":
        return replace(self, constraint=replace(self.constraint, target=target))

    def area_bayes(self) -> np.ndarray:
        """Weighted area means of the Bayes estimates."""
        return area_sums(self.constraint.unit_weights * self.bayes_estimates, self.sizes)

    def overall_bayes(self) -> float:
        """Area-weighted overall mean of the Bayes estimates."""
        return float(self.constraint.area_weights @ self.area_bayes())


@dataclass(frozen=True, eq=False)
class BenchmarkSolution:
    unit_estimates: np.ndarray
    area_estimates: np.ndarray
    unit_pmse: np.ndarray | None = None
    area_pmse: np.ndarray | None = None
    scheme_tag: str = ""
    sizes: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "unit_estimates", _frozen(self.unit_estimates, ndim=1))
        object.__setattr__(self, "area_estimates", _frozen(self.area_estimates, ndim=1))
        for name in ("unit_pmse", "area_pmse"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _frozen(getattr(self, name), ndim=1))
        if self.sizes is not None:
            object.__setattr__(self, "sizes", _frozen(self.sizes, dtype=np.int64, ndim=1))

    def unit_estimates_by_area(self) -> list[np.ndarray]:
        if self.sizes is None:
            raise MissingInputError("solution carries no area sizes")
        return split_areas(self.unit_estimates, self.sizes)


def constraint_residuals(solution: BenchmarkSolution, constraint: ConstraintWeights) -> tuple[float, float]:
    """Largest violation of the within-area and the overall constraint."""
    unit_means = area_sums(constraint.unit_weights * solution.unit_estimates, constraint.sizes)
    within = float(np.max(np.abs(unit_means - solution.area_estimates)))
    overall = abs(float(constraint.area_weights @ solution.area_estimates) - constraint.target)
    return within, overall


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def constraint_weights_from_survey(data: SurveyDataset) -> ConstraintWeights:
    """Constraint weights and target implied by the survey design weights.

    Unit weights are the design weights normalised within area, area weights
    are area weight totals over the grand total, and the target is the
    design-weighted overall proportion of the response.
    """
    totals = area_sums(data.survey_weight, data.sizes)
    if np.any(totals <= 0) or not np.all(np.isfinite(totals)):
        raise InvalidInputError("every area needs a positive total survey weight")
    grand = totals.sum()
    unit_w = data.survey_weight / totals[area_index(data.sizes)]
    eta = totals / grand
    target = float(data.survey_weight @ data.response / grand)
    return ConstraintWeights(unit_w, eta, target, data.sizes)


class Scheme(str, enum.Enum):
    """Loss-weight schemes; each one defines a benchmarked estimator."""

    CONSTANT = "constant"
    INVERSE_VARIANCE = "inverse_variance"
    RAKED = "raked"
    DOMAIN_WEIGHTED = "domain_weighted"

    @classmethod
    def parse(cls, name: "str | Scheme") -> "Scheme":
        if isinstance(name, Scheme):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "const": cls.CONSTANT,
            "invvar": cls.INVERSE_VARIANCE,
            "inverse": cls.INVERSE_VARIANCE,
            "rake": cls.RAKED,
            "domain": cls.DOMAIN_WEIGHTED,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise InvalidInputError(f"unknown scheme {name!r}; choose from {choices}") from None


def default_raking_factor(area_weights: np.ndarray) -> float:
    """Twice the smallest admissible raking factor ``max(1/eta)``."""
    eta = np.asarray(area_weights, dtype=float)
    if np.any(eta <= 0):
        raise InvalidInputError("raked weights need strictly positive area weights")
    return 2.0 * float(np.max(1.0 / eta))


def make_loss_weights(
    scheme: "str | Scheme", problem: BenchmarkProblem, g: float | None = None
) -> LossWeights:
    """Build the loss weights for one of the four standard estimators.

    ``g`` is only used by the raked scheme and must exceed ``max_i 1/eta_i``.
    """
    scheme = Scheme.parse(scheme)
    cw = problem.constraint
    n_units = len(cw.unit_weights)

    if scheme is Scheme.CONSTANT:
        return LossWeights(np.ones(n_units), np.ones(cw.n_areas), scheme.value)

    if scheme is Scheme.RAKED:
        theta = problem.bayes_estimates
        if np.any(theta <= 0):
            raise InvalidInputError("raked weights need strictly positive Bayes estimates")
        if np.any(cw.area_weights <= 0):
            raise InvalidInputError("raked weights need strictly positive area weights")
        g_min = float(np.max(1.0 / cw.area_weights))
        if g is None:
            g = 2.0 * g_min
        if not g > g_min:
            raise InvalidInputError(f"raking factor g={g} must exceed max(1/eta)={g_min}")
        xi = cw.unit_weights / theta
        phi = (g * cw.area_weights - 1.0) / problem.area_bayes()
        return LossWeights(xi, phi, scheme.value)

    post = problem.posterior
    if post is None:
        raise MissingInputError(f"scheme {scheme.value!r} needs posterior variances")
    if np.any(post.var_theta <= 0) or np.any(post.var_area <= 0):
        raise InvalidInputError(f"scheme {scheme.value!r} needs strictly positive posterior variances")
    xi = 1.0 / post.var_theta
    phi = 1.0 / post.var_area
    if scheme is Scheme.DOMAIN_WEIGHTED:
        phi = cw.sizes * phi
    return LossWeights(xi, phi, scheme.value)


def loss_scale(loss: LossWeights, constraint: ConstraintWeights) -> np.ndarray:
    """Per-area ``s_i = sum_j w_ij^2 / xi_ij``."""
    return area_sums(constraint.unit_weights**2 / loss.unit_loss, constraint.sizes)


def validate_problem(problem: BenchmarkProblem) -> list[str]:
    """List every invariant the problem violates; empty when well formed."""
    out: list[str] = []
    cw = problem.constraint
    sizes = cw.sizes
    n_units = int(sizes.sum())

    if len(problem.bayes_estimates) != n_units:
        out.append(f"bayes_estimates has {len(problem.bayes_estimates)} units, constraint has {n_units}")
    elif not np.all(np.isfinite(problem.bayes_estimates)):
        out.append("bayes_estimates contain non-finite values")

    w = cw.unit_weights
    if not np.all(np.isfinite(w)) or not np.all(np.isfinite(cw.area_weights)) or not np.isfinite(cw.target):
        out.append("constraint weights or target are not finite")
    for i, total in enumerate(area_sums(w, sizes)):
        if abs(total - 1.0) > NORMALIZATION_EXACT_TOL:
            out.append(f"unit weights of area {i + 1} sum to {total:.12g}")
    for k in np.flatnonzero(w < 0):
        out.append(f"negative unit weight at area {int(area_index(sizes)[k]) + 1}, position {k}")
    eta_total = float(cw.area_weights.sum())
    if abs(eta_total - 1.0) > NORMALIZATION_EXACT_TOL:
        out.append(f"area weights sum to {eta_total:.12g}")
    for i in np.flatnonzero(cw.area_weights < 0):
        out.append(f"negative area weight for area {i + 1}")

    loss = problem.loss
    if loss is not None:
        if len(loss.unit_loss) != n_units:
            out.append(f"unit_loss has {len(loss.unit_loss)} entries, expected {n_units}")
        if len(loss.area_loss) != len(sizes):
            out.append(f"area_loss has {len(loss.area_loss)} entries, expected {len(sizes)}")
        if len(loss.unit_loss) == n_units and len(loss.area_loss) == len(sizes):
            idx = area_index(sizes)
            for k in np.flatnonzero(~(loss.unit_loss > 0)):
                out.append(f"nonpositive loss weight xi at area {idx[k] + 1}, position {k}")
            if not np.all(np.isfinite(loss.area_loss)):
                out.append("area loss weights phi are not finite")
            if np.all(loss.unit_loss > 0):
                s = loss_scale(loss, cw)
                for i in np.flatnonzero(~(1.0 + loss.area_loss * s > 0)):
                    out.append(f"area {i + 1}: 1 + phi*s = {1.0 + loss.area_loss[i] * s[i]:.6g} is not positive")
    return out


def coerce_normalization(constraint: ConstraintWeights) -> ConstraintWeights:
    """Renormalise weights that miss unit sums by a rounding-sized amount.

    Errors above :data:`NORMALIZATION_REJECT_TOL` are rejected; errors between
    the exact and the reject tolerance are repaired with a warning.
    """
    sizes = constraint.sizes
    totals = area_sums(constraint.unit_weights, sizes)
    eta_total = float(constraint.area_weights.sum())
    err = max(float(np.max(np.abs(totals - 1.0))), abs(eta_total - 1.0))
    if not np.isfinite(err) or err > NORMALIZATION_REJECT_TOL:
        raise InvalidInputError(f"constraint weights are not normalised (error {err:.3g})")
    if err <= NORMALIZATION_EXACT_TOL:
        return constraint
    warnings.warn(f"renormalising constraint weights (error {err:.3g})", stacklevel=2)
    return replace(
        constraint,
        unit_weights=constraint.unit_weights / totals[area_index(sizes)],
        area_weights=constraint.area_weights / eta_total,
    )
