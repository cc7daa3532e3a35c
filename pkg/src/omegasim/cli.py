"""Command-line front end: run one scenario, sweep a grid, validate
assumptions, or render a report.

Scenario and sweep configs are JSON whose keys mirror the Scenario and
SweepSpec fields; any flag given on the command line wins over the file.
The effective config is echoed into the output (JSON "config" key, CSV
comment header) so results stay self-describing. Exit codes: 0 success,
1 violated assumption or bad config, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .harness import (Scenario, SweepSpec, _build_graph, _execute, _validate,
                      sweep, write_csv)
from .netsim import export_json_lines


def _pid_at(text):
    """Parse 'pid@time' (e.g. --crash 3@120)."""
    try:
        pid, _, t = text.partition("@")
        return int(pid), int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected pid@time, got {text!r}") from None


def _scenario_flags(p):
    p.add_argument("--scenario", metavar="FILE",
                   help="scenario JSON; flags override its values")
    p.add_argument("--topology", choices=["ring", "regular", "single",
                                          "file", "edges"])
    p.add_argument("--n", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--edge-file", metavar="FILE",
                   help="edge list for --topology file")
    p.add_argument("--topology-seed", type=int,
                   help="graph seed for --topology regular")
    p.add_argument("--K", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--drop-rate", type=float, dest="drop")
    p.add_argument("--mode", choices=["iid", "strict", "script"])
    p.add_argument("--stabilization", type=int)
    p.add_argument("--pre-drop", type=float, dest="pre_drop")
    p.add_argument("--algorithm", choices=["known", "unknown"])
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--crash", type=_pid_at, action="append", metavar="PID@T",
                   help="crash a process (repeatable)")
    p.add_argument("--offset", type=_pid_at, action="append", metavar="PID@D",
                   help="shift a process's local clock (repeatable)")
    p.add_argument("--reelect", action="store_true", default=None,
                   help="after convergence, crash the leader and re-run")
    p.add_argument("--use-seq", action="store_true", default=None,
                   dest="use_seq")


def _build_scenario(args):
    cfg = {}
    if args.scenario:
        with open(args.scenario) as fh:
            cfg = json.load(fh)
    topo = dict(cfg.get("topology") or {})
    for flag, key in (("topology", "kind"), ("n", "n"), ("degree", "degree"),
                      ("edge_file", "path"), ("topology_seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            topo[key] = v
    if topo:
        cfg["topology"] = topo
    for field in ("K", "D", "T", "drop", "mode", "stabilization", "pre_drop",
                  "algorithm", "seed", "horizon", "reelect", "use_seq"):
        v = getattr(args, field)
        if v is not None:
            cfg[field] = v
    if args.crash is not None:
        cfg["crashes"] = args.crash
    if args.offset is not None:
        cfg["offsets"] = dict(args.offset)
    if "topology" not in cfg:
        raise ValueError("no topology given; use --topology or a scenario file")
    # JSON stores these as lists / string-keyed maps
    if cfg.get("crashes"):
        cfg["crashes"] = tuple((int(p), int(t)) for p, t in cfg["crashes"])
    if cfg.get("offsets"):
        cfg["offsets"] = {int(p): int(d) for p, d in cfg["offsets"].items()}
    try:
        return Scenario(**cfg)
    except TypeError as exc:
        raise ValueError(f"bad scenario config: {exc}") from None


def _config_echo(sc):
    d = dataclasses.asdict(sc)
    if d.get("offsets"):
        d["offsets"] = {str(k): v for k, v in d["offsets"].items()}
    return d


def _cmd_run(args):
    sc = _build_scenario(args)
    result, shown = _execute(sc, record=bool(args.log_events))
    if args.log_events:
        with open(args.log_events, "w") as fh:
            fh.write(export_json_lines(shown.engine.events))
    payload = {
        "config": _config_echo(sc),
        "result": dataclasses.asdict(result),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def _cmd_validate(args):
    sc = _build_scenario(args)
    _validate(sc, _build_graph(sc))
    print("ok: assumptions hold")
    return 0


def _load_sweep(path):
    with open(path) as fh:
        cfg = json.load(fh)
    for key in ("sizes", "T_values", "drop_rates", "seeds"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    try:
        return cfg, SweepSpec(**cfg)
    except TypeError as exc:
        raise ValueError(f"bad sweep config: {exc}") from None


def _sweep_to_csv(args):
    cfg, spec = _load_sweep(args.config)
    rows = sweep(spec)
    comments = ["config: " + json.dumps(cfg, sort_keys=True)]
    if spec.mode == "strict":
        comments.append("time-bound oracle: convergence - stabilization"
                        " <= 3 * diameter * delta")
    write_csv(rows, args.out, comments=comments)
    return rows


def _cmd_sweep(args):
    _sweep_to_csv(args)
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args):
    from .figures import render_report
    rows = _sweep_to_csv(args)
    out_dir = args.figures_dir or os.path.dirname(args.out) or "."
    stem = os.path.splitext(os.path.basename(args.out))[0]
    paths = render_report(rows, out_dir, stem=stem)
    for p in [args.out] + paths:
        print(f"wrote {p}")
    return 0


def main(argv=None):
    top = argparse.ArgumentParser(
        prog="omegasim",
        description="simulate eventual leader election over lossy channels")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario, print JSON result")
    _scenario_flags(p)
    p.add_argument("--log-events", metavar="FILE",
                   help="also write the full event log, one JSON per line")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate",
                       help="check a scenario's assumptions, no simulation")
    _scenario_flags(p)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("sweep", help="run a grid, write CSV")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("report", help="sweep plus figures next to the CSV")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="CSV")
    p.add_argument("--figures-dir", metavar="DIR",
                   help="where figures go (default: the CSV's directory)")
    p.set_defaults(fn=_cmd_report)

    args = top.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
