"""Reading survey CSV files and writing result tables.

Input layout, one row per sampled unit::

    area_id,unit_id,y,weight,x1,...,xk

Rows of an area must be contiguous; the covariate count is taken from the
header. Output tables use 12 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import SurveyDataset, area_index
from .errors import InvalidInputError, MissingInputError

FLOAT_FORMAT = "{:.12g}"
REQUIRED_COLUMNS = ("area_id", "unit_id", "y", "weight")


def fmt(value) -> str:
    v = float(value)
    if np.isnan(v):
        return "nan"
    return FLOAT_FORMAT.format(v)


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InvalidInputError(f"line {line}: column {column!r} is not a number: {text!r}") from None
    if not np.isfinite(value):
        raise InvalidInputError(f"line {line}: column {column!r} is not finite: {text!r}")
    return value


def read_survey_csv(path) -> SurveyDataset:
    """Parse a survey file; every error message names the offending line."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        if tuple(header[:4]) != REQUIRED_COLUMNS:
            raise InvalidInputError(f"line 1: header must start with {','.join(REQUIRED_COLUMNS)}, got {','.join(header[:4])}")
        cov_names = header[4:]
        if not cov_names:
            raise InvalidInputError("line 1: at least one covariate column x1.. is required")

        area_ids: list[str] = []
        sizes: list[int] = []
        unit_ids, ys, wts, covs = [], [], [], []
        seen_units: set[tuple[str, str]] = set()
        closed: set[str] = set()
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"line {line}: expected {len(header)} fields, found {len(row)}")
            area, unit = row[0].strip(), row[1].strip()
            if not area or not unit:
                raise InvalidInputError(f"line {line}: area_id and unit_id must be non-empty")
            y = _parse_float(row[2], "y", line)
            if y not in (0.0, 1.0):
                raise InvalidInputError(f"line {line}: response y must be 0 or 1, got {row[2]!r}")
            w = _parse_float(row[3], "weight", line)
            if w <= 0:
                raise InvalidInputError(f"line {line}: weight must be positive, got {row[3]!r}")
            x = [_parse_float(v, name, line) for v, name in zip(row[4:], cov_names)]
            if (area, unit) in seen_units:
                raise InvalidInputError(f"line {line}: duplicate unit {unit!r} in area {area!r}")
            seen_units.add((area, unit))
            if not area_ids or area_ids[-1] != area:
                if area in closed or area in area_ids:
                    raise InvalidInputError(f"line {line}: rows of area {area!r} are not contiguous")
                if area_ids:
                    closed.add(area_ids[-1])
                area_ids.append(area)
                sizes.append(0)
            sizes[-1] += 1
            unit_ids.append(unit)
            ys.append(y)
            wts.append(w)
            covs.append(x)
    if not area_ids:
        raise InvalidInputError(f"{path}: no data rows")
    return SurveyDataset(tuple(area_ids), np.array(sizes), tuple(unit_ids), ys, wts, np.array(covs))


def write_survey_csv(path, data: SurveyDataset) -> None:
    idx = area_index(data.sizes)
    k = data.covariates.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(REQUIRED_COLUMNS) + [f"x{j + 1}" for j in range(k)])
        for n in range(data.n_units):
            writer.writerow(
                [data.area_ids[idx[n]], data.unit_ids[n], int(data.response[n]), fmt(data.survey_weight[n])]
                + [fmt(v) for v in data.covariates[n]]
            )


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV writer formatting floats with 12 significant digits and leaving strings alone."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else (int(v) if isinstance(v, (int, np.integer)) else fmt(v)) for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [r for r in reader if r]


def read_area_vector(path, n_areas: int | None = None) -> tuple[list[str], np.ndarray]:
    """Two-column ``area_id,value`` file, as used for variability targets."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise InvalidInputError(f"{path}: line 1: expected header area_id,<value>")
        ids, values = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise InvalidInputError(f"{path}: line {reader.line_num}: expected 2 fields, found {len(row)}")
            ids.append(row[0].strip())
            values.append(_parse_float(row[1], header[1], reader.line_num))
    if n_areas is not None and len(values) != n_areas:
        raise InvalidInputError(f"{path}: {len(values)} rows but the data has {n_areas} areas")
    return ids, np.array(values)


def read_key_value(path) -> dict[str, str]:
    """Flat ``key = value`` config; ``#`` starts a comment, blank lines are skipped."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for n, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}: line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise InvalidInputError(f"{path}: line {n}: empty key")
        out[key.replace("-", "_")] = value
    return out
