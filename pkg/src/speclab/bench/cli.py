"""Command-line entry point: ``speclab run | probe | oracle``.

Exit codes: 0 success, 1 usage error, 2 dataset or config error,
3 invariant violation (lossless check or oracle mismatch).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Optional, Sequence

from ..core import StepRecord
from .config import METHODS, BenchConfig, ConfigError, load_config
from .dataset import DatasetError, load_dataset
from .metrics import relevance_probe
from .oracles import run_oracle_suite
from .report import emit_report, load_report
from .runner import batched_run, run_experiment
from ..viskip import GateConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="speclab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="decode a dataset with one or more methods")
    run.add_argument("--dataset", required=True)
    run.add_argument("--method", action="append", choices=METHODS, required=True,
                     help="repeat to compare several methods")
    run.add_argument("--config", help="JSON config file")
    gate = run.add_mutually_exclusive_group()
    gate.add_argument("--gate", dest="gate", action="store_true", default=None, help="enable vision gating")
    gate.add_argument("--no-gate", dest="gate", action="store_false")
    run.add_argument("--tau", type=float)
    run.add_argument("--batch-size", type=int)
    run.add_argument("--temperature", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--max-new-tokens", type=int)
    run.add_argument("--out")
    run.add_argument("--format", choices=("json", "csv"), default="json")

    probe = sub.add_parser("probe", help="relevance-vs-acceptance probe over a saved JSON report")
    probe.add_argument("--report", required=True)
    probe.add_argument("--threshold", type=float, default=0.35)

    oracle = sub.add_parser("oracle", help="check context drafters against brute-force scans")
    oracle.add_argument("--cases", type=int, default=1000)
    oracle.add_argument("--seed", type=int, default=0)
    return parser


def _configure(args) -> BenchConfig:
    cfg = load_config(args.config) if args.config else BenchConfig()
    run = cfg.run
    overrides = {
        "batch_size": args.batch_size,
        "temperature": args.temperature,
        "seed": args.seed,
        "workers": args.workers,
        "max_new_tokens": args.max_new_tokens,
    }
    cfg.run = dataclasses.replace(run, **{k: v for k, v in overrides.items() if v is not None})
    if cfg.run.batch_size < 1 or cfg.run.workers < 1 or cfg.run.temperature < 0:
        raise ConfigError("batch size and workers must be positive, temperature non-negative")
    if args.gate is False:
        cfg.gate = None
    elif args.gate or args.tau is not None:
        base = cfg.gate or GateConfig()
        cfg.gate = dataclasses.replace(base, tau=base.tau if args.tau is None else args.tau)
    return cfg


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.3f}"


def cmd_run(args) -> int:
    cfg = _configure(args)
    dataset = load_dataset(args.dataset, cfg.model.vocab_size)
    reports = []
    for method in args.method:
        gate = cfg.gate if method != "ar" else None
        if cfg.run.batch_size > 1:
            report = batched_run(cfg, dataset, method, cfg.run.batch_size, gate)
        else:
            report = run_experiment(cfg, dataset, method, gate)
        reports.append(report)
        tau = "" if gate is None else f" tau={gate.tau}"
        print(f"{method}{tau}: MAT={_fmt(report.mat)} modeled_speedup={_fmt(report.modeled_speedup)} "
              f"walltime_speedup={_fmt(report.walltime_speedup)} failed={len(report.errors)}")
    if args.out:
        emit_report(reports, args.out, args.format)
    violations = [v for r in reports for v in r.invariant_violations]
    for v in violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_probe(args) -> int:
    for report in load_report(args.report):
        records: list[StepRecord] = [r for s in report.samples if s.ok for r in s.records]
        table = relevance_probe(records, args.threshold)
        if table is None:
            print(f"{report.method}: no scored speculative steps")
            continue
        print(f"{report.method}: measured={table.measured_steps} "
              f"high_visual={table.high_visual_steps} ({100 * table.high_visual_share:.1f}%) "
              f"avg_accept_high={_fmt(table.avg_accept_high)} avg_accept_low={_fmt(table.avg_accept_low)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    failures = run_oracle_suite(args.cases, args.seed)
    bad = 0
    for name, msgs in failures.items():
        print(f"{name}: {'ok' if not msgs else f'{len(msgs)} mismatches'}")
        for m in msgs[:5]:
            print(f"  {m}")
        bad += len(msgs)
    return EXIT_INVARIANT if bad else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "probe":
            return cmd_probe(args)
        return cmd_oracle(args)
    except (DatasetError, ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
