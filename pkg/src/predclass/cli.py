"""Command-line entry point: ``predclass <subcommand> --spec FILE ...``.

Exit status is 0 iff every declared bound passed, 1 if some bound failed and
2 on invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from predclass import config
from predclass.cover import NuPredictor
from predclass.errors import PredclassError
from predclass.harness import (
    EvalReport,
    ExperimentSpec,
    run_suite,
    verify_bounds,
)
from predclass.kernels import BACKEND

log = logging.getLogger("predclass")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}")


def _common(p: argparse.ArgumentParser, out_help: str = "CSV output path") -> None:
    p.add_argument("--spec", required=True, help="YAML spec file")
    p.add_argument("--out", help=out_help)
    p.add_argument("--seed", type=_seeds, help="override seeds, e.g. 1,2,3")
    p.add_argument("--exact-cap", type=int, default=None,
                   help="refuse exact enumeration beyond |X|^n > 2^CAP (default 16)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predclass", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("eval-kl", help="expected cumulative KL divergence"))
    _common(sub.add_parser("eval-tv", help="horizon-h total variation ladder"))
    p = sub.add_parser("build-cover", help="greedy covers and the resulting nu predictor")
    _common(p, "trace CSV path")
    p.add_argument("--nu-out", help="where to write the nu spec (default: <out>.nu.yaml)")
    p = sub.add_parser("verify-bounds", help="check declared bounds")
    _common(p)
    p.add_argument("--report", help="check this CSV report instead of running the experiments")
    p = sub.add_parser("run-suite", help="run every experiment in a suite file")
    _common(p)
    p.add_argument("--summary", help="bound summary CSV path")
    return parser


def _prepare(args, default_kind: str | None = None) -> list[ExperimentSpec]:
    data = config.load_yaml(args.spec)
    items = data.get("experiments", [data])
    specs = []
    for item in items:
        item = dict(item)
        if default_kind:
            item.setdefault("kind", default_kind)
        if args.seed:
            item["seeds"] = args.seed
        specs.append(ExperimentSpec.from_dict(item))
    return specs


def _emit(report: EvalReport, out: str | None) -> int:
    if out:
        report.write_csv(out)
        log.info("wrote %d rows to %s", len(report.rows), out)
    else:
        sys.stdout.write(report.to_csv())
    for b in report.summary:
        status = "PASS" if b.passed else "FAIL"
        print(f"[{status}] {b.name}: {b.detail}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_eval(args, kind: str) -> int:
    return _emit(run_suite(_prepare(args, kind), args.exact_cap, args.jobs), args.out)


def cmd_build_cover(args) -> int:
    data = config.load_yaml(args.spec)
    spec = data.get("cover", data)
    nu = NuPredictor(
        config.class_from_spec(spec["class"]),
        config.measure_from_spec(spec["rho"]),
        int(spec["n_max"]),
        config.scheme_from_spec(spec.get("scheme")),
        spec.get("regularizer", "gamma"),
        cap=args.exact_cap,
    )
    rows = nu.trace_rows()
    header = ["n", "k", "component_id", "m_k", "rho_cum_mass", "K_n"]
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(
            repr(r[h]) if isinstance(r[h], float) else str(r[h]) for h in header
        ))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        nu_path = args.nu_out or str(Path(args.out).with_suffix(".nu.yaml"))
    else:
        sys.stdout.write(text)
        nu_path = args.nu_out
    if nu_path:
        config.save_measure(nu, nu_path)
        log.info("wrote nu spec to %s", nu_path)
    return 0


def cmd_verify(args) -> int:
    specs = _prepare(args)
    if args.report:
        report = EvalReport.read_csv(args.report)
        for s in specs:
            report.summary += verify_bounds(report, s.bounds, experiment=s.name)
    else:
        report = run_suite(specs, args.exact_cap, args.jobs)
    return _emit(report, args.out) if args.out else _summarize(report)


def _summarize(report: EvalReport) -> int:
    for b in report.summary:
        print(f"[{'PASS' if b.passed else 'FAIL'}] {b.name}: {b.detail}")
    return 0 if report.passed else 1


def cmd_run_suite(args) -> int:
    report = run_suite(_prepare(args), args.exact_cap, args.jobs)
    if args.summary:
        Path(args.summary).write_text(report.summary_csv())
    return _emit(report, args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", BACKEND)
    try:
        if args.command == "eval-kl":
            return cmd_eval(args, "kl")
        if args.command == "eval-tv":
            return cmd_eval(args, "tv")
        if args.command == "build-cover":
            return cmd_build_cover(args)
        if args.command == "verify-bounds":
            return cmd_verify(args)
        return cmd_run_suite(args)
    except (PredclassError, OSError, KeyError) as exc:
        print(f"predclass: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
