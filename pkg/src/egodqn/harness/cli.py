"""Command-line entry point: ``egodqn {run,sweep,report,plot,selftest}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from egodqn.agent import Variant
from egodqn.harness import config as cfgmod
from egodqn.harness import plot as plotmod
from egodqn.harness.report import run_checks, write_report
from egodqn.harness.runner import DEFAULT_SEEDS, collect, finalize, run, summary_csv_path, sweep

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; we reserve 2 for runtime failures."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _variant(text: str) -> Variant:
    try:
        return Variant.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from exc
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _common(p: argparse.ArgumentParser, out_default=None):
    p.add_argument("--out", default=out_default, help="output directory (default: results)")
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--episodes", type=_positive)
    p.add_argument("--local-feature-rule", choices=("fruits", "any"), dest="local_feature_rule")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="egodqn", description="Egocentric DQN fruit-collection experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="train one variant with one seed")
    p.add_argument("--variant", type=_variant)
    p.add_argument("--seed", type=int)
    _common(p)

    p = sub.add_parser("sweep", help="train several variants over several seeds")
    p.add_argument("--variant", type=_variant, action="append", dest="variants",
                   help="repeatable; default: all 11 variants")
    p.add_argument("--seeds", type=_seed_list, help="comma separated (default 1,2,3,4,5)")
    p.add_argument("--parallel", type=_positive, help="worker processes (default: cpu count)")
    p.add_argument("--skip-existing", action="store_true", help="reuse run CSVs already on disk")
    _common(p)

    p = sub.add_parser("report", help="aggregate existing run CSVs and evaluate the comparison checks")
    p.add_argument("--variant", type=_variant, action="append", dest="variants")
    p.add_argument("--seeds", type=_seed_list)
    p.add_argument("--out", default="results")

    p = sub.add_parser("plot", help="render running-mean curves or stability bars as SVG")
    p.add_argument("inputs", nargs="*", help="run or aggregate CSVs (line mode)")
    p.add_argument("--output", "-o", required=True, help="SVG file to write")
    p.add_argument("--bars", metavar="SUMMARY_CSV", help="stability bar chart from a summary CSV")
    p.add_argument("--variant", type=_variant, action="append", dest="variants")
    p.add_argument("--out", help="results directory; plots its aggregate curves when no inputs are given")

    sub.add_parser("selftest", help="fast numerical self-checks")
    return parser


def _config_values(args) -> dict:
    values = cfgmod.load_config(args.config) if getattr(args, "config", None) else {}
    flags = {k: getattr(args, k, None) for k in ("variant", "seed", "episodes", "out", "local_feature_rule")}
    values.update({k: v for k, v in flags.items() if v is not None})
    return values


def _cmd_run(args) -> int:
    values = _config_values(args)
    if "variant" not in values:
        raise UsageError("run: --variant is required (or 'variant = ...' in the config file)")
    config = cfgmod.build_run_config(values, {})

    def progress(rec):
        if rec.episode % 50 == 0:
            logging.info("episode %d return %.0f epsilon %.3f", rec.episode, rec.ret, rec.epsilon)

    metrics = run(config, progress)
    print(f"{config.variant.value} seed {config.seed}: {len(metrics)} episodes, "
          f"final running mean {metrics.running_mean()[-1]:.3f} -> {config.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    values = _config_values(args)
    out = values.pop("out", "results")
    file_variant = values.pop("variant", None)
    values.pop("seed", None)
    variants = args.variants or ([file_variant] if file_variant else list(Variant))
    seeds = args.seeds or list(DEFAULT_SEEDS)
    cfgmod.build_run_config({"variant": variants[0], **values}, {})  # validate overrides early
    report = sweep(variants, seeds, values, out=out, parallel=args.parallel, skip_existing=args.skip_existing)
    write_report(out, report)
    for row in report.summary_rows():
        print(f"{row[0]:24s} final={row[1]:.3f} auc={row[2]:.1f} stability={row[3]:.3f} seeds={row[4]}")
    if report.failures:
        print(f"{len(report.failures)} run(s) failed; see {Path(out) / 'failures.txt'}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_report(args) -> int:
    variants = args.variants or list(Variant)
    seeds = args.seeds or list(DEFAULT_SEEDS)
    if not Path(args.out).is_dir():
        raise FileNotFoundError(f"results directory {args.out} does not exist")
    report = collect(args.out, variants, seeds)
    if not report.results:
        raise FileNotFoundError(f"no run CSVs found under {Path(args.out) / 'runs'}")
    finalize(args.out, report)
    path = write_report(args.out, report)
    for check in run_checks(report):
        print(check.line())
    print(f"report written to {path}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    if args.bars:
        names = [v.value for v in args.variants] if args.variants else None
        path = plotmod.plot_stability(args.bars, args.output, names)
    else:
        inputs = list(args.inputs)
        if not inputs and args.out:
            wanted = args.variants or list(Variant)
            inputs = [p for v in wanted if (p := Path(args.out) / "aggregate" / f"{v.value}.csv").exists()]
        if not inputs:
            raise UsageError("plot: give CSV inputs, --out with aggregate CSVs, or --bars SUMMARY_CSV")
        path = plotmod.plot_curves(inputs, args.output)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from egodqn.harness.selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_FAILURE


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "report": _cmd_report, "plot": _cmd_plot,
            "selftest": _cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("egodqn: error: a subcommand is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except cfgmod.ConfigError as exc:
        print(f"egodqn: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        print(f"egodqn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
