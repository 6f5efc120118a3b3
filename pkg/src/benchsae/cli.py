"""Command-line front end: ``estimate``, ``simulate`` and ``verify``.

Options may come from a flat ``key = value`` config file (``--config``);
command-line flags override config values. No environment variables are
read for configuration.

Config keys (all optional, flag names with dashes replaced by underscores)::

    input, out, scheme, iters, burn_in, thin, seed, chains, h_targets,
    hyper_a, hyper_b, hyper_c, hyper_d, raking_g, dump_draws, backend

``simulate`` specs additionally accept::

    m, n_min, n_max, beta, sigma2_u, sigma2_e, resimulate, target
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .core import SurveyDataset, area_index
from .errors import BenchmarkError
from .hb.diagnostics import mcmc_diagnostics
from .hb.draws_io import write_draws
from .hb.model import DEFAULT_SIGMA2_E_HYPER, DEFAULT_SIGMA2_U_HYPER, McmcConfig
from .pipeline import scheme_names
from .sim import SourceResult, default_sim_spec, fit_source, run_simulation_study
from .verify import dump_instance, run_verification

#: Residual bound for constraints recomputed from the written tables.
CONSTRAINT_TOL = 1e-10

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


@dataclass
class RunConfig:
    mode: str
    input_path: str | None = None
    output_dir: str = "."
    schemes: list[str] = field(default_factory=lambda: ["constant"])
    iterations: int = 20_000
    burn_in: int = 2_000
    thin: int = 10
    seed: int = 0
    chains: int = 1
    hyper_a: float = DEFAULT_SIGMA2_E_HYPER
    hyper_b: float = DEFAULT_SIGMA2_E_HYPER
    hyper_c: float = DEFAULT_SIGMA2_U_HYPER
    hyper_d: float = DEFAULT_SIGMA2_U_HYPER
    h_targets: str | None = None
    raking_g: float | None = None
    dump_draws: bool = False
    backend: str | None = None
    # simulate
    m: int = 20
    n_min: int = 5
    n_max: int = 50
    beta: tuple[float, ...] = (-1.0, 0.5, -0.25)
    sigma2_u: float = 0.25
    sigma2_e: float = 1.0
    resimulate: bool = True
    target: str = "survey"
    # verify
    instances: int = 100
    inject_fault: bool = False

    @property
    def mcmc(self) -> McmcConfig:
        return McmcConfig(self.iterations, self.burn_in, self.thin, self.seed, self.chains)

    @property
    def hyper(self) -> dict:
        return {"hyper_a": self.hyper_a, "hyper_b": self.hyper_b, "hyper_c": self.hyper_c, "hyper_d": self.hyper_d}


_KEY_ALIASES = {"input": "input_path", "out": "output_dir", "scheme": "schemes", "iters": "iterations", "spec": None}


def _truthy(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(name: str, value):
    if value is None:
        return None
    if name == "schemes":
        items = value.split(",") if isinstance(value, str) else list(value)
        return scheme_names([s for s in items if str(s).strip()])
    if name == "beta":
        items = value.split(",") if isinstance(value, str) else list(value)
        return tuple(float(v) for v in items)
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if not isinstance(value, str):
        return value
    if "bool" in kind:
        return _truthy(value)
    if kind.startswith("int"):
        return int(value)
    if kind.startswith("float"):
        return float(value)
    return value


def build_config(mode: str, config_file: str | None, overrides: dict) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    if config_file:
        for key, raw in io.read_key_value(config_file).items():
            name = _KEY_ALIASES.get(key, key)
            if name is None:
                continue
            if name not in known or name == "mode":
                raise BenchmarkError(f"{config_file}: unknown config key {key!r}")
            values[name] = raw
    for key, value in overrides.items():
        if value is not None:
            values[_KEY_ALIASES.get(key, key) or key] = value
    try:
        converted = {k: _convert(k, v) for k, v in values.items()}
    except ValueError as exc:
        raise BenchmarkError(f"bad configuration value: {exc}") from None
    return RunConfig(mode=mode, **converted)


# --------------------------------------------------------------------------
# table emission
# --------------------------------------------------------------------------


def _estimate_rows(data: SurveyDataset, source: SourceResult, scheme: str):
    res = source.schemes[scheme]
    post = source.posterior
    idx = area_index(data.sizes)
    w = source.constraint.unit_weights
    sol = res.solution
    for n in range(data.n_units):
        yield (
            data.area_ids[idx[n]], data.unit_ids[n], w[n], post.mean_theta[n],
            sol.unit_estimates[n], sol.unit_pmse[n], res.unit_pct_prmse[n],
        )


def _area_rows(data: SurveyDataset, source: SourceResult, scheme: str):
    res = source.schemes[scheme]
    post, sol, cw = source.posterior, res.solution, source.constraint
    h = res.variability_target
    for i in range(data.n_areas):
        row = [
            data.area_ids[i], int(data.sizes[i]), cw.area_weights[i], post.mean_area[i],
            sol.area_estimates[i], post.var_area[i], sol.area_pmse[i], res.pct_prmse[i],
        ]
        if h is not None:
            row.append(h[i])
        yield row


ESTIMATE_HEADER = ["area_id", "unit_id", "w", "bayes", "benchmarked", "pmse", "pct_prmse"]
AREA_HEADER = ["area_id", "n", "eta", "bayes", "benchmarked", "posterior_var", "pmse", "pct_prmse"]


def write_scheme_tables(out: Path, data: SurveyDataset, source: SourceResult, suffix: str = "") -> None:
    for scheme in source.schemes:
        tag = f"{scheme}{suffix}"
        header = AREA_HEADER + (["h_target"] if source.schemes[scheme].variability_target is not None else [])
        io.write_table(out / f"estimates_{tag}.csv", ESTIMATE_HEADER, _estimate_rows(data, source, scheme))
        io.write_table(out / f"pmse_{tag}.csv", header, _area_rows(data, source, scheme))
        io.write_table(
            out / f"plotdata_adjustment_{tag}.csv", ["area_id", "n", "adjustment"],
            ([a, int(n), v] for a, (n, v) in zip(data.area_ids, source.adjustment_series(scheme))),
        )
        io.write_table(
            out / f"plotdata_prmse_{tag}.csv", ["area_id", "n", "pct_prmse"],
            ([a, int(n), v] for a, (n, v) in zip(data.area_ids, source.prmse_series(scheme))),
        )


def check_written_tables(out: Path, schemes: Sequence[str], target: float, suffix: str = "") -> tuple[bool, list[str]]:
    """Recompute every benchmarking constraint from the files on disk."""
    lines = [f"# target p = {io.fmt(target)}; tolerance {CONSTRAINT_TOL:.0e}"]
    lines.append("# scheme\twithin_area_max\toverall\tvariability_max\tstatus")
    ok = True
    for scheme in schemes:
        tag = f"{scheme}{suffix}"
        _, unit_rows = io.read_table(out / f"estimates_{tag}.csv")
        area_header, area_rows = io.read_table(out / f"pmse_{tag}.csv")
        delta = {r[0]: float(r[4]) for r in area_rows}
        eta = {r[0]: float(r[2]) for r in area_rows}
        sums: dict[str, float] = dict.fromkeys(delta, 0.0)
        spread: dict[str, float] = dict.fromkeys(delta, 0.0)
        for r in unit_rows:
            w, est = float(r[2]), float(r[4])
            sums[r[0]] += w * est
            spread[r[0]] += w * (est - delta[r[0]]) ** 2
        within = max(abs(sums[a] - delta[a]) for a in delta)
        overall = abs(sum(eta[a] * delta[a] for a in delta) - target)
        var_text = "NA"
        passed = within <= CONSTRAINT_TOL and overall <= CONSTRAINT_TOL
        if "h_target" in area_header:
            col = area_header.index("h_target")
            var_dev = max(abs(spread[r[0]] - float(r[col])) for r in area_rows)
            var_text = f"{var_dev:.3e}"
            passed = passed and var_dev <= CONSTRAINT_TOL
        ok = ok and passed
        lines.append(f"{tag}\t{within:.3e}\t{overall:.3e}\t{var_text}\t{'PASS' if passed else 'FAIL'}")
    return ok, lines


def _write_fit_outputs(out: Path, cfg: RunConfig, source: SourceResult, suffix: str = "") -> tuple[bool, list[str]]:
    write_scheme_tables(out, source.dataset, source, suffix)
    (out / f"diagnostics{suffix}.txt").write_text(mcmc_diagnostics(source.chains).to_text())
    if cfg.dump_draws:
        write_draws(out / f"draws{suffix}.csv", source.chains)
    return check_written_tables(out, list(source.schemes), source.constraint.target, suffix)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _h_targets(cfg: RunConfig, data: SurveyDataset) -> np.ndarray | None:
    if not cfg.h_targets:
        return None
    ids, h = io.read_area_vector(cfg.h_targets, data.n_areas)
    if ids != list(data.area_ids):
        raise BenchmarkError(f"{cfg.h_targets}: area ids must match the input areas in order")
    return h


def _finish(out: Path, ok: bool, lines: list[str]) -> int:
    lines = lines + ["all constraints satisfied" if ok else "constraint verification FAILED"]
    (out / "constraints_report.txt").write_text("\n".join(lines) + "\n")
    if not ok:
        print(f"constraint verification failed; see {out / 'constraints_report.txt'}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_estimate(cfg: RunConfig) -> int:
    if not cfg.input_path:
        raise BenchmarkError("estimate needs --input")
    data = io.read_survey_csv(cfg.input_path)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = _h_targets(cfg, data)
    source = fit_source(
        "input", data, cfg.schemes, cfg.mcmc, cfg.hyper, backend=cfg.backend, h=h, g=cfg.raking_g
    )
    status = _finish(out, *_write_fit_outputs(out, cfg, source))
    print(f"wrote {len(source.schemes)} scheme(s) to {out}")
    return status


def cmd_simulate(cfg: RunConfig) -> int:
    base = default_sim_spec(cfg.seed, m=cfg.m, n_range=(cfg.n_min, cfg.n_max))
    spec = base.with_parameters(cfg.beta, cfg.sigma2_u, cfg.sigma2_e, cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_simulation_study(spec, cfg.schemes, cfg.mcmc, cfg.hyper, cfg.resimulate, cfg.target, cfg.backend)
    io.write_survey_csv(out / "simulated_data.csv", report.truth.dataset)
    ok, lines = _write_fit_outputs(out, cfg, report.reference)
    if report.simulated is not None:
        ok2, lines2 = _write_fit_outputs(out, cfg, report.simulated, suffix="_resimulated")
        ok, lines = ok and ok2, lines + lines2
        for scheme in report.scheme_names:
            diff = report.difference_series(scheme)
            io.write_table(
                out / f"plotdata_difference_{scheme}.csv", ["area_id", "n", "difference"],
                ([a, int(n), v] for a, n, v in zip(report.truth.dataset.area_ids, report.truth.dataset.sizes, diff)),
            )
    status = _finish(out, ok, lines)
    print(f"wrote simulation study outputs to {out}")
    return status


def cmd_verify(cfg: RunConfig) -> int:
    report = run_verification(cfg.instances, cfg.seed, fault=1e-6 if cfg.inject_fault else 0.0)
    print(report.summary())
    if report.ok:
        return EXIT_OK
    worst = max(report.failures, key=lambda r: r.deviation)
    print("offending instance:", file=sys.stderr)
    print(dump_instance(worst), file=sys.stderr)
    return EXIT_CHECK_FAILED


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int, help="Gibbs sweeps per chain")
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    for name in "abcd":
        p.add_argument(f"--hyper-{name}", dest=f"hyper_{name}", type=float)
    p.add_argument("--dump-draws", dest="dump_draws", action="store_const", const=True)
    p.add_argument("--backend", choices=("numba", "numpy"), help="compute backend for the sampler")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benchsae", description="Two-stage benchmarked small area estimates.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit the hierarchical model to a survey file and benchmark")
    est.add_argument("--input", help="survey CSV: area_id,unit_id,y,weight,x1,...")
    est.add_argument("--scheme", help="comma-separated schemes: constant, inverse_variance, raked, domain_weighted, variability")
    est.add_argument("--h-targets", dest="h_targets", help="CSV area_id,h with within-area variability targets")
    est.add_argument("--raking-g", dest="raking_g", type=float, help="raking factor g")
    _add_common(est)

    sim = sub.add_parser("simulate", help="simulation study on synthetic data")
    sim.add_argument("--spec", help="simulation spec file (key = value)")
    sim.add_argument("--schemes", dest="scheme")
    sim.add_argument("--m", type=int)
    sim.add_argument("--no-resimulate", dest="resimulate", action="store_const", const=False)
    _add_common(sim)

    ver = sub.add_parser("verify", help="compare closed forms with the KKT oracle on random instances")
    ver.add_argument("--instances", type=int)
    ver.add_argument("--seed", type=int)
    ver.add_argument("--inject-fault", dest="inject_fault", action="store_const", const=True, help=argparse.SUPPRESS)
    return parser


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    mode = args.pop("command")
    spec_file, config_file = args.pop("spec", None), args.pop("config", None)
    config_file = config_file or spec_file
    try:
        cfg = build_config(mode, config_file, args)
        return COMMANDS[mode](cfg)
    except BenchmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
