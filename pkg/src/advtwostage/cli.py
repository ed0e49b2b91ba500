"""Command-line entry point.

``advtwostage <subcommand> [--config PATH] [--set KEY=VALUE ...] [--out DIR]
[--threads N] [--svg] [--exact-cv]``

Experiment subcommands write ``<name>.csv``, ``<name>_median.csv`` and the
resolved configuration ``<name>.cfg`` to the output directory, which
defaults to ``$ADVTWOSTAGE_OUT`` or ``./out``.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import format_config, parse_config
from .errors import AdvTwoStageError
from .selfcheck import run_checks
from .simlab import EXPERIMENTS, AggregateCurve, default_config, run_cv_table, run_experiment
from .svgplot import line_chart

OUT_ENV = "ADVTWOSTAGE_OUT"

_TITLES = {
    "fig-compare": "Excess adversarial risk vs gamma",
    "fig-theory": "Limiting excess adversarial risk vs gamma",
    "fig-ridge": "Ridgeless vs tuned penalty",
    "fig-lambda": "Two-stage excess risk vs lambda",
    "table-cv": "Population risk under CV-selected penalties",
}


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "out")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advtwostage", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=_TITLES[name])
        s.add_argument("--config", metavar="PATH")
        s.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides")
        s.add_argument("--out", metavar="DIR", default=None)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--svg", action="store_true", help="also write a line chart")
        s.add_argument("--exact-cv", action="store_true", help="add brute-force CV columns (table-cv)")
    g = sub.add_parser("gen-config", help="print or write the default config of an experiment")
    g.add_argument("experiment", choices=EXPERIMENTS)
    g.add_argument("--out", metavar="DIR", default=None)
    sub.add_parser("check", help="run the invariant suite")
    return p


def _svg(curve: AggregateCurve) -> str:
    series = []
    for method, eps in curve.keys():
        x, mean, _, _ = curve.series(method, eps)
        series.append((f"{method} eps={eps:g}", x, mean))
    pos = [r.mean for r in curve.rows if np.isfinite(r.mean)]
    logy = bool(pos) and min(pos) > 0 and max(pos) / min(pos) > 50
    logx = curve.x_label == "lambda"
    ylab = "population risk" if curve.experiment == "table-cv" else "excess adversarial risk"
    return line_chart(series, _TITLES[curve.experiment], curve.x_label, ylab, logx=logx, logy=logy)


def _print_table(curve: AggregateCurve) -> None:
    names = [m for m, _ in curve.keys()]
    methods = list(dict.fromkeys(names))
    eps_vals = list(dict.fromkeys(r.eps for r in curve.rows))
    print("row".ljust(22) + "".join(f"eps={e:<10g}" for e in eps_vals))
    for m in methods:
        cells = [f"{curve.value(e, m, e).mean:<14.4f}" for e in eps_vals]
        print(m.ljust(22) + "".join(cells))


def _run_experiment(args) -> int:
    cfg = parse_config(args.config, args.overrides, experiment=args.command)
    if args.exact_cv:
        cfg = replace(cfg, exact_cv=True)
    out = Path(args.out or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    stem = args.command
    (out / f"{stem}.cfg").write_text(format_config(cfg), encoding="utf-8")
    if cfg.experiment == "table-cv":
        curve = run_cv_table(cfg, threads=args.threads).to_curve()
    else:
        curve = run_experiment(cfg, threads=args.threads)
    curve.write_csv(out / f"{stem}.csv")
    if cfg.experiment != "table-cv":
        curve.write_csv(out / f"{stem}_median.csv", median=True)
    for x, method, why in curve.skipped:
        print(f"skipped x={x:g} {method}: {why}", file=sys.stderr)
    if args.svg:
        (out / f"{stem}.svg").write_text(_svg(curve), encoding="utf-8")
    if cfg.experiment == "table-cv":
        _print_table(curve)
    print(f"wrote {out / (stem + '.csv')}")
    return 0


def _gen_config(args) -> int:
    text = format_config(default_config(args.experiment))
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.experiment}.cfg").write_text(text, encoding="utf-8")
        print(f"wrote {out / (args.experiment + '.cfg')}")
    return 0


def _check(args) -> int:
    def report(r):
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail} ({r.seconds:.1f}s)", flush=True)

    results = run_checks(report)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-config":
            return _gen_config(args)
        if args.command == "check":
            return _check(args)
        return _run_experiment(args)
    except (AdvTwoStageError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error [{_origin(exc)}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


def _origin(exc: BaseException) -> str:
    """Stem of the innermost package module on the traceback."""
    here = Path(__file__).parent
    name = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        path = Path(frame.f_code.co_filename)
        if path.parent == here:
            name = path.stem
    return name


if __name__ == "__main__":
    sys.exit(main())
