"""Command-line driver: ``tracesmc run | placements | accept``.

Exit codes: 0 ok, 1 acceptance criteria failed, 2 usage, parse or placement error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import core as C
from . import smc
from .desugar import ScopeError, desugar
from .parser import ParseError, parse
from .report import build_report, to_csv, to_json

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def load_program(path_or_name: str):
    """Returns ``(model name, core term)``; bare names fall back to bundled models."""
    from .models import resolve
    try:
        path = resolve(path_or_name)
    except FileNotFoundError:
        raise UsageError(f"{path_or_name}: no such file or bundled model")
    text = path.read_text()
    try:
        return path.stem, desugar(parse(text))
    except ParseError as e:
        raise UsageError(f"{path}:{e}")
    except ScopeError as e:
        raise UsageError(f"{path}: {e}")


def _config(args) -> smc.SmcConfig:
    try:
        return smc.SmcConfig(particles=args.particles, seed=args.seed, resampling=args.resampling,
                             max_rounds=args.max_rounds, step_budget=args.step_budget,
                             kill_zero=not args.no_kill_zero, threads=args.threads,
                             record_traces=False)
    except ValueError as e:
        raise UsageError(str(e))


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    name, t = load_program(args.model)
    cfg = _config(args)
    t0 = time.perf_counter()
    result = smc.run(t, cfg)
    wall = (time.perf_counter() - t0) * 1000.0
    rep = build_report(name, result, wall)
    _emit(to_json(rep) if args.format == "json" else to_csv(rep), args.output)
    if result.termination == "all-dead":
        print("warning: every particle died; no posterior", file=sys.stderr)
    return EXIT_OK


def _placements_file(args, model_name):
    from .models import load_placements
    if args.placements is None:
        try:
            return load_placements(model_name)
        except FileNotFoundError:
            raise UsageError(f"no bundled placements for {model_name!r}; pass a placements file")
    try:
        with open(args.placements) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"{args.placements}: {e}")
    if not isinstance(data, dict) or not data:
        raise UsageError(f"{args.placements}: expected a non-empty object of named placements")
    return data


def cmd_placements(args) -> int:
    from .acceptance import placement_summary
    name, t = load_program(args.model)
    specs = _placements_file(args, name)
    bad = []
    for key, sel in specs.items():
        try:
            C.insert_resamples(t, C.resolve_placement(t, sel))
        except C.PlacementError as e:
            bad.append(f"  {key}: {e}")
    if bad:
        raise UsageError("invalid placements:\n" + "\n".join(bad))
    cfg = _config(args)
    summ = placement_summary(t, specs, cfg.particles, args.replicates, seed0=cfg.seed,
                             resampling=cfg.resampling, max_rounds=cfg.max_rounds,
                             step_budget=cfg.step_budget, kill_zero=cfg.kill_zero,
                             threads=cfg.threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["placement", "resamples", "replicates", "log_z_mean", "log_z_stderr",
                "posterior_mean", "median_wall_ms"])
    rows = {}
    for key, r in summ.items():
        z = np.array(r["log_z"])
        mean = float(z.mean())
        se = float(z.std(ddof=1) / math.sqrt(len(z))) if len(z) > 1 else math.nan
        rows[key] = (mean, se)
        post = float(np.nanmean(r["mean"])) if not all(map(math.isnan, r["mean"])) else math.nan
        w.writerow([key, r["resamples"], len(z), f"{mean:.6f}", f"{se:.6f}", f"{post:.6f}",
                    f"{1000 * float(np.median(r['seconds'])):.1f}"])
    if len(rows) > 1 and args.replicates > 1:
        worst = max(abs(a[0] - b[0]) / math.hypot(a[1], b[1])
                    for i, a in enumerate(rows.values()) for b in list(rows.values())[i + 1:])
        buf.write(f"# largest pairwise log_z difference: {worst:.2f} combined stderr\n")
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import SUITES, run_suite
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    results = run_suite(args.suite)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FAILED if failed else EXIT_OK


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-J", "--particles", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resampling", choices=sorted(smc.RESAMPLERS), default="multinomial")
    p.add_argument("--max-rounds", type=int, default=10_000)
    p.add_argument("--step-budget", type=int, default=smc.DEFAULT_BUDGET,
                   help="reduction steps allowed per particle per segment")
    p.add_argument("--no-kill-zero", action="store_true",
                   help="keep running particles whose weight has hit zero")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tracesmc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run SMC on a program")
    run.add_argument("model", help="a .ppl file or the name of a bundled model")
    _engine_flags(run)
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.set_defaults(fn=cmd_run)

    pl = sub.add_parser("placements", help="compare resample placements over replicates")
    pl.add_argument("model")
    pl.add_argument("placements", nargs="?", help="JSON file of named placements "
                    "(default: the bundled one for the model)")
    pl.add_argument("--replicates", type=int, default=20)
    _engine_flags(pl)
    pl.set_defaults(fn=cmd_placements)

    acc = sub.add_parser("accept", help="run an acceptance suite")
    acc.add_argument("suite", help="quick, full or unbiasedness")
    acc.set_defaults(fn=cmd_accept)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"tracesmc: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
