"""Command line entry point: ``complexnav run|analyze|replay|gen``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .scenario import ScenarioGenerationError, parse_condition, sample_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_INVARIANT = 3


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"  {done}/{total} scenario draws", file=sys.stderr, flush=True)


def cmd_run(args) -> int:
    cfg = bench.load_config(args.config)
    if args.paper:
        cfg = replace(cfg, trials_per_condition=bench.PAPER_TRIALS)
    if args.workers is not None:
        if args.workers < 1:
            raise bench.ConfigError("--workers must be >= 1")
        cfg = replace(cfg, workers=args.workers)
    out = bench.resolve_output_dir(cfg)
    n = len(cfg.conditions()) * len(cfg.methods) * cfg.trials_per_condition
    print(f"running {n} trials on {cfg.n_workers()} worker(s) into {out}", file=sys.stderr)
    bench.run_experiments(cfg, out, progress=None if args.quiet else _progress)
    corr = json.loads((out / "correlations.json").read_text())
    for r in corr["reports"]:
        if r["metric"] in ("success", "min_distance"):
            print(_report_line(r))
    return EXIT_OK


def _report_line(r: dict) -> str:
    if r["rho"] is None:
        state = "insufficient" if r["insufficient"] else "undefined"
        return f"{r['factor']:>15} {r['metric']:<18} {state} (n={r['n']})"
    return f"{r['factor']:>15} {r['metric']:<18} rho={r['rho']:+.3f} p={r['p_value']:.2g} n={r['n']}"


def cmd_analyze(args) -> int:
    corr = bench.analyze(args.dir)
    for r in corr["reports"]:
        print(_report_line(r))
    return EXIT_OK


def cmd_replay(args) -> int:
    text = bench.replay_csv(args.dir, args.condition, args.method, args.trial)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        cond = parse_condition(args.condition)
    except ValueError as e:
        raise bench.ConfigError(str(e)) from None
    sc = sample_scenario(cond, args.seed)
    text = json.dumps(sc.to_dict(), sort_keys=True, indent=2 if args.pretty else None)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="complexnav", description="Crowd-navigation complexity benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the sweeps described by a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--paper", action="store_true", help=f"use {bench.PAPER_TRIALS} trials per condition")
    r.add_argument("--workers", type=int)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(fn=cmd_run)

    a = sub.add_parser("analyze", help="recompute correlations.json from summary.json")
    a.add_argument("dir")
    a.set_defaults(fn=cmd_analyze)

    rp = sub.add_parser("replay", help="re-run one recorded trial and dump its trajectory CSV")
    rp.add_argument("dir")
    rp.add_argument("condition")
    rp.add_argument("method")
    rp.add_argument("trial", type=int)
    rp.add_argument("--out")
    rp.set_defaults(fn=cmd_replay)

    g = sub.add_parser("gen", help="emit one scenario as JSON")
    g.add_argument("--condition", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out")
    g.add_argument("--pretty", action="store_true")
    g.set_defaults(fn=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except bench.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except bench.InvariantError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except KeyError as e:
        print(f"not found: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioGenerationError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
