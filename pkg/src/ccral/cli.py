"""Command line: ``ccral run | gen-synth | report | prepare``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .data import generate_synthetic, save_schema, synthetic_schema, write_csv
from .datasets import PREPARERS
from .exceptions import DataError, TrainingError
from .experiment import (
    METHODS,
    ExperimentConfig,
    dumps_report,
    load_report,
    render_report,
    run_experiment,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fractions(text):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split needs three comma-separated fractions")
    return parts


def _methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be a subset of {','.join(METHODS)}")
    return methods


def build_parser():
    parser = _Parser(prog="ccral", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the repeated comparison and write a JSON report")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    run.add_argument("--data")
    run.add_argument("--schema", help="schema JSON path or a shipped schema name")
    run.add_argument("--methods", type=_methods)
    run.add_argument("--k", type=int)
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--split", type=_fractions)
    run.add_argument("--classifier", choices=("logistic", "hinge"))
    run.add_argument("--out", help="report path (default: standard output)")

    gen = sub.add_parser("gen-synth", help="write a synthetic CSV and its schema")
    gen.add_argument("--n", type=int, default=2000)
    gen.add_argument("--dims", type=int, default=5)
    gen.add_argument("--effect", type=float, default=2.0)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="CSV path; schema goes to <stem>.schema.json")

    rep = sub.add_parser("report", help="render a JSON report as a text table")
    rep.add_argument("--in", dest="path", required=True)

    prep = sub.add_parser("prepare", help="convert a raw public dataset file to schema CSV")
    prep.add_argument("dataset", choices=sorted(PREPARERS))
    prep.add_argument("--raw", required=True)
    prep.add_argument("--out", required=True)
    return parser


def _experiment_config(args):
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
    overrides = {
        "data_path": args.data, "schema_path": args.schema, "methods": args.methods,
        "K": args.k, "repeats": args.repeats, "master_seed": args.seed, "split": args.split,
        "output_path": args.out,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if not doc.get("data_path") or not doc.get("schema_path"):
        raise UsageError("--data and --schema are required (directly or via --config)")
    try:
        cfg = ExperimentConfig.from_dict(doc)
        if args.classifier:
            cfg = replace(cfg, classifier=replace(cfg.classifier, loss_kind=args.classifier))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    return cfg


def cmd_run(args):
    cfg = _experiment_config(args)
    report = run_experiment(cfg)
    text = dumps_report(report)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if report["errors"]:
        kinds = {e["kind"] for e in report["errors"].values()}
        print(f"{len(report['errors'])} repeat(s) failed", file=sys.stderr)
        return EXIT_TRAINING if "training" in kinds else EXIT_DATA
    return EXIT_OK


def cmd_gen_synth(args):
    if args.n < 10 or args.dims < 1 or args.noise < 0:
        raise UsageError("need --n >= 10, --dims >= 1, --noise >= 0")
    out = Path(args.out)
    table = generate_synthetic(args.n, args.dims, args.effect, args.noise, args.seed)
    try:
        write_csv(table, out)
        save_schema(synthetic_schema(args.dims), out.with_suffix(".schema.json"))
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}")
    return EXIT_OK


def cmd_report(args):
    sys.stdout.write(render_report(load_report(args.path)))
    return EXIT_OK


def cmd_prepare(args):
    table = PREPARERS[args.dataset](args.raw)
    try:
        write_csv(table, args.out)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}")
    print(f"wrote {table.n_rows} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "gen-synth": cmd_gen_synth, "report": cmd_report,
            "prepare": cmd_prepare}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ccral: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"ccral: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"ccral: training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
