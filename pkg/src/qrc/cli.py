"""Command-line entry point.

Exit status: 0 success, 2 configuration error, 3 failed check,
4 numerical contract violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checks, circuits, harness, reservoir, tasks
from .errors import ConfigError, ContractError, DimensionError, InputDomainError, UndefinedMetricError

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_NUMERIC = 0, 2, 3, 4


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config, {"seed": args.seed, "out": args.out})
    report = harness.run_experiment(cfg)
    paths = harness.write_outputs(report, cfg.out)
    sys.stdout.write(harness.nmse_csv(report))
    print(f"wrote {len(paths)} files to {cfg.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_check(args) -> int:
    results = checks.run_checks(args.suite, seed=args.seed)
    for r in results:
        print(r.line())
    if args.json:
        Path(args.json).write_text(json.dumps(checks.as_dicts(results), indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def _cmd_task_gen(args) -> int:
    task = tasks.make_task(args.id, args.dim, args.seed)
    data = tasks.build_dataset(task, args.problem, args.seed)
    text = "".join(
        tasks.dataset_csv(s) if k == 0 else tasks.dataset_csv(s).split("\n", 1)[1]
        for k, s in enumerate(data.sequences)
    )
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_reservoir_dump(args) -> int:
    pair = circuits.preset_pair(args.preset, args.seed)
    text = f"# {args.preset} seed={args.seed}\n" + reservoir.dumps_reservoir([pair], args.eps)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrc", description="quantum reservoir computing experiments and checks")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="replaces every seed in the config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("check", help="run property check suites")
    c.add_argument("--suite", default="all", choices=("all",) + checks.SUITES)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--json", help="also write results to this file")
    c.set_defaults(func=_cmd_check)

    t = sub.add_parser("task", help="target tasks")
    tsub = t.add_subparsers(dest="task_command", required=True)
    g = tsub.add_parser("gen", help="write a task dataset as CSV (l,u,y,segment)")
    g.add_argument("--id", required=True, choices=tasks.TASK_IDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dim", type=int)
    g.add_argument("--problem", default="multi_step", choices=harness.PROBLEMS)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_task_gen)

    d = sub.add_parser("reservoir", help="reservoir presets")
    dsub = d.add_subparsers(dest="reservoir_command", required=True)
    dump = dsub.add_parser("dump", help="print a preset circuit pair in text form")
    dump.add_argument("--preset", required=True, choices=circuits.PRESETS)
    dump.add_argument("--seed", type=int, default=0)
    dump.add_argument("--eps", type=float, default=0.1)
    dump.add_argument("--out")
    dump.set_defaults(func=_cmd_reservoir_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, DimensionError, InputDomainError, UndefinedMetricError) as e:
        print(f"numeric contract violation: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
