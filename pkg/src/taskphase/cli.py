"""Command-line entry point.

Subcommands::

    taskphase run --scenario drawer --executive linear --condition light --seed 1
    taskphase grid --n 10 --out results.csv
    taskphase validate my_scenario.json
    taskphase dump-scenario drawer --out drawer.json

Exit codes: 0 success, 1 runtime failure (I/O, invalid scenario file),
2 usage error. A failed *episode* is a result, not an error, so ``run``
exits 0 either way. Relative output paths land in ``$TASKPHASE_OUT_DIR``
when that is set, else in the working directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .experiment import EXECUTIVES, emit_report, run_episode, run_grid, write_trajectory
from .scenarios import BUILTINS, CONDITIONS, ConfigError, builtin_scenario, dumps, load_config, resolve_scenario

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
OUT_DIR_ENV = "TASKPHASE_OUT_DIR"

log = logging.getLogger("taskphase")


def _out_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _seeds(start: int, n: int) -> list[int]:
    return list(range(start, start + n))


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskphase", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    run = sub.add_parser("run", help="run one episode and print its result")
    run.add_argument("--scenario", default="drawer", help="builtin name (drawer, grasp) or scenario file")
    run.add_argument("--executive", required=True, choices=EXECUTIVES)
    run.add_argument("--condition", default="none", choices=CONDITIONS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", help="write the result as JSON here")
    run.add_argument("--log-trajectory", metavar="CSV", nargs="?", const="trajectory.csv",
                     help="write the per-tick trajectory to CSV (default trajectory.csv)")

    grid = sub.add_parser("grid", help="run tasks x executives x conditions and write the CSV")
    grid.add_argument("--scenario", action="append",
                      help="scenario to include (repeatable; default: both builtins)")
    grid.add_argument("--n", type=_positive, default=10, help="episodes per condition (default 10)")
    grid.add_argument("--seed", type=int, default=0, help="first seed; seeds are SEED..SEED+n-1")
    grid.add_argument("--out", default="results.csv", help="CSV output path (default results.csv)")
    grid.add_argument("--jobs", type=_positive, default=1, help="worker processes")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("path", nargs="?")
    val.add_argument("--scenario", dest="scenario_path", help="same as the positional path")

    dump = sub.add_parser("dump-scenario", help="write a builtin scenario to a file")
    dump.add_argument("name", choices=sorted(BUILTINS))
    dump.add_argument("--out", help="output path (default NAME.json)")
    return parser


def _cmd_run(args) -> int:
    cfg = resolve_scenario(args.scenario)
    res = run_episode(cfg, args.executive, args.condition, args.seed,
                      log_trajectory=args.log_trajectory is not None)
    summary = {
        "task": res.task, "executive": res.executive, "condition": res.condition, "seed": res.seed,
        "success": res.success, "balls_removed": res.balls_removed, "ticks_elapsed": res.ticks_elapsed,
        "degraded_ticks": res.degraded_ticks, "phase_segments": [list(s) for s in res.phase_segments],
    }
    status = "SUCCESS" if res.success else "FAILURE"
    balls = "" if res.balls_removed is None else f" balls_removed={res.balls_removed}"
    print(f"{status} task={res.task} executive={res.executive} condition={res.condition} "
          f"seed={res.seed} ticks={res.ticks_elapsed}{balls}")
    print("phases: " + " -> ".join(f"{name}@{tick}" for tick, name in res.phase_segments))
    if args.out:
        _out_path(args.out).write_text(json.dumps(summary, indent=2) + "\n")
    if args.log_trajectory is not None:
        write_trajectory(res, _out_path(args.log_trajectory))
    return EXIT_OK


def _cmd_grid(args) -> int:
    names = args.scenario or list(BUILTINS)
    cfgs = [resolve_scenario(s) for s in names]
    summaries = run_grid(cfgs, n=args.n, seeds=_seeds(args.seed, args.n), jobs=args.jobs)
    out = _out_path(args.out)
    _, table = emit_report(summaries, out)
    sys.stdout.write(table)
    return EXIT_OK


def _cmd_validate(args) -> int:
    path = args.path or args.scenario_path
    if path is None:
        raise _UsageError("validate needs a scenario file path")
    cfg = load_config(path)
    print(f"OK {path}: {cfg.name}, {cfg.k} phases")
    return EXIT_OK


def _cmd_dump(args) -> int:
    out = _out_path(args.out or f"{args.name}.json")
    out.write_text(dumps(builtin_scenario(args.name)))
    print(out)
    return EXIT_OK


class _UsageError(Exception):
    pass


_COMMANDS = {"run": _cmd_run, "grid": _cmd_grid, "validate": _cmd_validate, "dump-scenario": _cmd_dump}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"taskphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"taskphase: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"taskphase: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
