"""Command-line entry point: ``catgate <subcommand> [--config PATH] [--out PATH] [--threads N]``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import asdict

from . import output
from .experiment import (COLUMNS, ExperimentConfig, Scenario, convergence_study, load_config,
                         run_many, run_scenario)
from .lindblad import NumericalAbort
from .params import ConfigError, derive, derived_table, paper_operating_point, validate_regime

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def _config(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config)
    base = Scenario.for_case("a")
    return ExperimentConfig(base, (base.kappa_inv_us,), (base.model,))


def _emit(text: str, out):
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)


def cmd_params(args) -> int:
    p = _config(args).base.params if args.config else paper_operating_point()
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        d = derive(p)
        report = validate_regime(p, d)
    lines = [f"{name:<16s} {value:>16.6g} {unit}" for name, value, unit in derived_table(p, d)]
    if report.flagged:
        lines.append("marginal dispersive ratios: " + ", ".join(
            f"{k}={report.ratios[k]:.3g}" for k in report.flagged))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = _config(args)
    row = run_scenario(cfg.base)
    if args.out:
        output.emit_csv([row], args.out)
    else:
        for k, v in asdict(row).items():
            if k in COLUMNS:
                print(f"{k:<14s} {v}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows = run_many(cfg.scenarios(), args.threads)
    if args.out:
        output.emit_csv(rows, args.out)
    else:
        sys.stdout.write(output.csv_text(rows))
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"failed: {r.scenario_id}: {r.error}", file=sys.stderr)
    return EXIT_ABORT if failed else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all()
    _emit("".join(r.line() + "\n" for r in results), args.out)
    return EXIT_OK if all(r.passed for r in results) else 1


def cmd_convergence(args) -> int:
    rep = convergence_study(_config(args).base, threads=args.threads)
    _emit("\n".join(rep.lines()) + "\n", args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    if not args.csv:
        raise ConfigError("plot needs an input CSV")
    rows = output.load_csv(args.csv)
    output.emit_plot(rows, args.out or "fidelity.svg")
    return EXIT_OK


COMMANDS = {
    "params": (cmd_params, "print the derived parameter table"),
    "evolve": (cmd_evolve, "run one scenario"),
    "sweep": (cmd_sweep, "run every kappa/model point of the config and write CSV"),
    "verify": (cmd_verify, "truth-table, commutation, decay and oracle checks"),
    "convergence": (cmd_convergence, "fidelity over n_cut and dt grids"),
    "plot": (cmd_plot, "CSV to SVG chart"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catgate", description=__doc__.split(":")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", metavar="PATH", help="JSON scenario config")
        sp.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        sp.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker processes for independent runs")
        if name == "plot":
            sp.add_argument("csv", nargs="?", help="result CSV from `sweep`")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
