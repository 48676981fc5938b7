"""
Command-line interface.

``rmfanova test``      global tests, JSON report (and optional pointwise trace CSV)
``rmfanova posthoc``   Bonferroni pairwise tests, JSON report and percentage table
``rmfanova simulate``  Monte Carlo size / power / FWER from a TOML config

Exit status is 0 on success, 2 for invalid input or arguments and 3 for
numerical failures (unbounded pointwise F, failed factorization).
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import io
from .core import FunctionalDataset
from .errors import DegeneracyError, NumericalError
from .pointwise import f_pointwise, ssa_pointwise, write_traces_csv
from .posthoc import run_posthoc_grid
from .resampling import DEFAULT_B, ResamplingMethod, check_seed, run_tests
from .simulation import (MomentModel, SimulationSpec, estimate_fwer, estimate_rejection_rates)
from .statistics import StatisticKind

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def sample_data_path() -> Path:
    return Path(str(resources.files("rmfanova") / "data" / "sample_long.csv"))


def _choices(value: str, enum):
    if value == "all":
        return list(enum)
    out = []
    for part in value.split(","):
        try:
            out.append(enum(part.strip()))
        except ValueError:
            raise ValueError(f"unknown {enum.__name__} {part!r}") from None
    return out


def _pairs(value):
    if value in (None, "all"):
        return None
    out = []
    for part in value.split(","):
        try:
            r, s = (int(x) for x in part.strip().split("-"))
        except ValueError:
            raise ValueError(f"pairs must look like 1-2,2-4; got {part!r}") from None
        out.append((r, s))
    return out


def _add_common(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="dataset CSV")
    src.add_argument("--sample", action="store_true", help="use the bundled sample dataset")
    p.add_argument("--layout", choices=("long", "wide"), default="long")
    p.add_argument("--statistic", default="all", help="C, D, E, a comma list, or all")
    p.add_argument("--method", default="all", help="P1, P2, B1, B2, B3, a comma list, or all")
    p.add_argument("--B", type=int, default=DEFAULT_B, help="number of replicates")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="JSON report path (default: stdout)")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--verbose", action="store_true", help="include resampled values in reports")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rmfanova", description="Repeated-measures ANOVA for functional data")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="global tests of equal condition means")
    _add_common(p)
    p.add_argument("--trace-out", type=Path, help="CSV of pointwise SSA and F")

    p = sub.add_parser("posthoc", help="Bonferroni pairwise comparisons")
    _add_common(p)
    p.add_argument("--pairs", help="e.g. 1-4,2-4 (default: all pairs)")
    p.add_argument("--table", type=Path, help="CSV of adjusted p-values in percent")

    p = sub.add_parser("simulate", help="Monte Carlo size, power and FWER")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, help="JSON report path (overrides the config)")
    p.add_argument("--table", type=Path, help="CSV table path (overrides the config)")
    p.add_argument("--threads", type=int, help="worker processes (results do not depend on it)")
    return parser


def _check_run_args(args):
    if args.B < 1:
        raise ValueError(f"--B must be a positive integer, got {args.B}")
    if not 0.0 < args.alpha < 1.0:
        raise ValueError(f"--alpha must be in (0, 1), got {args.alpha}")
    check_seed(args.seed)
    if args.threads is not None and args.threads < 1:
        raise ValueError(f"--threads must be positive, got {args.threads}")


def _load(args) -> FunctionalDataset:
    path = sample_data_path() if args.sample else args.input
    return io.read_dataset_csv(path, "long" if args.sample else args.layout)


def _emit(args, kind, body):
    text = io.dumps_report(kind, body)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def cli_test(args) -> int:
    _check_run_args(args)
    kinds = _choices(args.statistic, StatisticKind)
    methods = _choices(args.method, ResamplingMethod)
    data = _load(args)
    if args.trace_out is not None:
        write_traces_csv(args.trace_out, [ssa_pointwise(data), f_pointwise(data)])
    results = []
    for m in methods:
        for res in run_tests(data, kinds, m, args.B, args.seed, args.threads):
            row = res.to_dict(args.verbose)
            row["reject"] = bool(res.p_value <= args.alpha)
            results.append(row)
    _emit(args, "test", {"data": io.dataset_summary(data), "alpha": args.alpha,
                         "results": results})
    return EXIT_OK


def cli_posthoc(args) -> int:
    _check_run_args(args)
    kinds = _choices(args.statistic, StatisticKind)
    methods = _choices(args.method, ResamplingMethod)
    pairs = _pairs(args.pairs)
    data = _load(args)
    reports = run_posthoc_grid(data, kinds, methods, args.B, args.alpha, args.seed, pairs,
                               args.threads)
    if args.table is not None:
        io.write_posthoc_table(args.table, reports)
    _emit(args, "posthoc", {"data": io.dataset_summary(data),
                            "reports": [r.to_dict() for r in reports]})
    return EXIT_OK


def simulation_rows(cfg: io.SimulationConfig):
    """``(row keys, SimulationSpec)`` for every table row of a config."""
    common = dict(model=cfg.model, n=cfg.n, B=cfg.B, n_runs=cfg.n_runs, alpha=cfg.alpha,
                  seed=cfg.seed, grid_kind=cfg.grid_kind)
    if cfg.model == "GP":
        source = io.read_dataset_csv(cfg.source, cfg.source_layout)
        moments = MomentModel.from_dataset(source, cfg.hypothesis)
        return [((d,), SimulationSpec(distribution=d, moments=moments, **common))
                for d in cfg.distributions]
    extra = {k: v for k, v in (("p", cfg.p), ("xi", cfg.xi)) if v is not None}
    return [((d, r), SimulationSpec(distribution=d, rho=r, **common, **extra))
            for d in cfg.distributions for r in cfg.rhos]


def _summary_dict(keys, names, summary) -> dict:
    cells = []
    for (k, m), rate in summary.rejection_rate.items():
        cell = {"statistic": k.value, "method": m.value, "rejection_rate": rate,
                "mc_stderr": summary.mc_stderr[(k, m)]}
        if summary.mode == "posthoc":
            cell["fwer"] = summary.fwer[(k, m)]
            cell["per_pair_power"] = {f"{r}-{s}": v
                                      for (r, s), v in summary.per_pair_power[(k, m)].items()}
        cells.append(cell)
    return {**dict(zip(names, keys)), "cells": cells}


def cli_simulate(args) -> int:
    if args.threads is not None and args.threads < 1:
        raise ValueError(f"--threads must be positive, got {args.threads}")
    cfg = io.load_simulation_config(args.config)
    kinds = [StatisticKind(s) for s in cfg.statistics]
    methods = [ResamplingMethod(m) for m in cfg.methods]
    names = ("distribution",) if cfg.model == "GP" else ("distribution", "rho")
    estimate = estimate_fwer if cfg.mode == "posthoc" else estimate_rejection_rates
    rows = [(keys, estimate(spec, kinds, methods, args.threads))
            for keys, spec in simulation_rows(cfg)]
    table = args.table or cfg.table
    if table is not None:
        io.write_simulation_table(table, rows, names)
    out = args.out or cfg.json
    body = {"mode": cfg.mode, "model": cfg.model, "n": cfg.n, "B": cfg.B,
            "n_runs": cfg.n_runs, "alpha": cfg.alpha, "seed": cfg.seed,
            "rows": [_summary_dict(keys, names, s) for keys, s in rows]}
    _emit(replace_out(args, out), "simulation", body)
    return EXIT_OK


def replace_out(args, out):
    ns = argparse.Namespace(**vars(args))
    ns.out = out
    return ns


_COMMANDS = {"test": cli_test, "posthoc": cli_posthoc, "simulate": cli_simulate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (DegeneracyError, NumericalError) as exc:
        print(f"rmfanova: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"rmfanova: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
