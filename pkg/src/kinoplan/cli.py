"""Command-line entry point.

Subcommands: gen-library, plan, simulate, bench-sampling, export-plots.
Every subcommand honors --seed and is bitwise reproducible; the resolved
configuration and seed are printed before any work happens.  Defaults can be
overridden through environment variables prefixed KINOPLAN_ (for example
KINOPLAN_SEED=7 sets --seed); explicit flags always win.

Exit codes: 0 success, 1 bad input or I/O failure, 2 planning failure,
3 scenario run failure (time limit).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import fields, replace

import numpy as np

from .geometry import CurveLibrary, LibraryConfig, Pose, build_curve_library
from .rrt import PlannerConfig, plan_path
from .scenarios import (Scenario, builtin_scenarios, get_scenario,
                        load_scenario, random_disk_world)
from .simulator import TraceLog, export_artifacts, metrics, run_scenario
from .svg import SvgCanvas, plot_errorbars

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_PATH = 2
EXIT_SCENARIO_FAILED = 3


def _env_default(name: str, fallback, cast=str):
    raw = os.environ.get("KINOPLAN_" + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


def _parse_pose(text: str) -> Pose:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("pose must be 'x,y,theta' (theta in radians)")
    try:
        x, y, th = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return Pose(x, y, th)


def _load_library_config(path) -> LibraryConfig:
    kwargs = {}
    names = {f.name: f for f in fields(LibraryConfig)}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in names:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key in ("n_r", "n_beta"):
                kwargs[key] = int(val)
            elif key == "dtheta_factors":
                kwargs[key] = tuple(float(v) for v in val.split())
            else:
                kwargs[key] = float(val)
    return LibraryConfig(**kwargs)


def _resolve_scenario(name_or_path: str) -> Scenario:
    if os.path.exists(name_or_path):
        return load_scenario(name_or_path)
    return get_scenario(name_or_path)


def _print_config(args, extra: dict | None = None) -> None:
    shown = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if extra:
        shown.update(extra)
    for key, val in sorted(shown.items()):
        print(f"{key} = {val}")


def cmd_gen_library(args) -> int:
    config = _load_library_config(args.config) if args.config else LibraryConfig()
    _print_config(args, {"library_config": config})
    library = build_curve_library(config)
    total = config.n_r * config.n_beta
    library.save_csv(args.out)
    print(f"entries {len(library.entries)}  rejected {total - len(library.entries)}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    _print_config(args)
    if args.scenario:
        scenario = _resolve_scenario(args.scenario)
        obstacles = scenario.static_obstacles
        bounds = scenario.bounds
        start = args.start or scenario.start
        goal = args.goal or scenario.goal
        footprint = scenario.robot
    else:
        if args.start is None or args.goal is None:
            print("plan: --start and --goal are required without --scenario",
                  file=sys.stderr)
            return EXIT_ERROR
        from .collision import default_robot_footprint
        obstacles = []
        start, goal = args.start, args.goal
        pad = 10.0
        bounds = (min(start.x, goal.x) - pad, min(start.y, goal.y) - pad,
                  max(start.x, goal.x) + pad, max(start.y, goal.y) + pad)
        footprint = default_robot_footprint()
    library = CurveLibrary.load_csv(args.library) if args.library else build_curve_library()
    pcfg = PlannerConfig.from_file(args.config) if args.config else PlannerConfig()
    pcfg = replace(pcfg, rng_seed=args.seed, world_bounds=bounds)
    try:
        result = plan_path(start, goal, obstacles, pcfg, library, footprint)
    except ValueError as exc:
        print(f"plan: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    if result is None:
        print("plan: no path found within the iteration budget", file=sys.stderr)
        return EXIT_NO_PATH
    os.makedirs(args.out, exist_ok=True)
    result.path.to_csv(os.path.join(args.out, "path.csv"))
    _plot_path(result.path, obstacles, bounds, os.path.join(args.out, "path.svg"))
    print(f"path nodes {len(result.path.poses)}  length {result.path.total_length:.3f}  "
          f"iterations {result.iterations}")
    return EXIT_OK


def _plot_path(path, obstacles, bounds, out) -> None:
    cv = SvgCanvas(bounds)
    for obs in obstacles:
        if obs.kind == "disk":
            cv.circle(obs.center[0], obs.center[1], obs.radius, fill="#888888")
        elif obs.kind == "polygon":
            cv.polygon(obs.vertices, fill="#888888")
    grid, dense = path.dense_samples()
    cv.polyline([(p[0], p[1]) for p in dense], stroke="#1f4fd0")
    for pose in path.poses:
        cv.circle(pose.x, pose.y, 0.25, fill="#000000", stroke="none")
    cv.write(out)


def cmd_simulate(args) -> int:
    try:
        scenario = _resolve_scenario(args.scenario)
    except (KeyError, ValueError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _print_config(args)
    pcfg = PlannerConfig.from_file(args.config) if args.config else None
    library = CurveLibrary.load_csv(args.library) if args.library else None
    trace = run_scenario(scenario, planner_config=pcfg, seed=args.seed,
                         library=library,
                         ground_truth_tracks=args.ground_truth_tracks,
                         replan_timeout=args.replan_timeout)
    if args.out:
        export_artifacts(trace, args.out, scenario)
    m = metrics(trace)
    lat = [e.latency for e in trace.events]
    print("metrics success=%s total_time=%.2f total_length=%.3f min_clearance=%.3f"
          % (m["success"], m["total_time"], m["total_length"], m["min_clearance"]))
    if lat:
        print("planning wall time: events=%d mean=%.3fs max=%.3fs (not part of "
              "any pass/fail)" % (len(lat), sum(lat) / len(lat), max(lat)))
    return EXIT_OK if m["success"] else EXIT_SCENARIO_FAILED


def cmd_bench_sampling(args) -> int:
    _print_config(args)
    library = CurveLibrary.load_csv(args.library) if args.library else build_curve_library()
    from .collision import default_robot_footprint
    footprint = default_robot_footprint()
    headings = list(range(0, 91, 10))
    modes = ["gmm", "random"] if args.mode == "both" else [args.mode]
    rows = []
    for heading in headings:
        per_mode = {m: {"nodes": [], "time": [], "length": []} for m in modes}
        for run in range(args.runs):
            world_seed = args.seed * 100003 + heading * 101 + run
            disks, start, goal, bounds = random_disk_world(world_seed,
                                                          math.radians(heading))
            for mode in modes:
                # A run that exhausts the iteration budget is retried with a
                # fresh planner seed and a growing budget on the same world,
                # so both modes are compared over identical obstacle sets.
                result = None
                for attempt in range(5):
                    pcfg = PlannerConfig(rng_seed=world_seed + 17 + 1009 * attempt,
                                         world_bounds=bounds,
                                         p_th=0.5 if mode == "gmm" else 0.0,
                                         goal_bias=0.0)
                    pcfg = replace(pcfg, max_iterations=pcfg.max_iterations
                                   * (attempt + 1))
                    t0 = time.perf_counter()
                    result = plan_path(start, goal, disks, pcfg, library, footprint)
                    elapsed = time.perf_counter() - t0
                    if result is not None:
                        break
                if result is None:
                    continue
                per_mode[mode]["nodes"].append(result.node_count)
                per_mode[mode]["time"].append(elapsed)
                per_mode[mode]["length"].append(result.path.total_length)
        for mode in modes:
            stats = per_mode[mode]
            row = {"heading": heading, "mode": mode, "runs": len(stats["nodes"])}
            for key in ("nodes", "time", "length"):
                vals = np.asarray(stats[key])
                mean = float(vals.mean()) if len(vals) else float("nan")
                ci = 1.96 * float(vals.std(ddof=1)) / math.sqrt(len(vals)) \
                    if len(vals) > 1 else 0.0
                row[key + "_mean"] = mean
                row[key + "_ci95"] = ci
            rows.append(row)
    os.makedirs(args.out, exist_ok=True)
    cols = ["heading", "mode", "runs", "nodes_mean", "nodes_ci95", "time_mean",
            "time_ci95", "length_mean", "length_ci95"]
    rows.sort(key=lambda r: (r["heading"], r["mode"]))
    with open(os.path.join(args.out, "stats.csv"), "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(
                str(row[c]) if c in ("heading", "mode", "runs") else "%.17g" % row[c]
                for c in cols) + "\n")
    for key, title in (("length", "mean path length vs heading"),
                       ("nodes", "mean node count vs heading")):
        series = {}
        for mode in modes:
            series[mode] = [(r["heading"], r[key + "_mean"], r[key + "_ci95"])
                            for r in rows if r["mode"] == mode]
        plot_errorbars(series, "heading (deg)",
                       os.path.join(args.out, "bench_%s.svg" % key), title)
    for row in rows:
        print("heading %3d  %-6s runs %d  nodes %.1f  time %.3fs  length %.2f"
              % (row["heading"], row["mode"], row["runs"], row["nodes_mean"],
                 row["time_mean"], row["length_mean"]))
    print("note: wall times are hardware-dependent and informational only")
    return EXIT_OK


def cmd_export_plots(args) -> int:
    _print_config(args)
    scenario = _resolve_scenario(args.scenario) if args.scenario else None
    try:
        trace = TraceLog.from_csv(args.trace)
    except (OSError, ValueError) as exc:
        print(f"export-plots: {exc}", file=sys.stderr)
        return EXIT_ERROR
    export_artifacts(trace, args.out, scenario)
    print(f"wrote plots to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinoplan",
        description="Kinodynamic planning toolkit: curve-library bi-RRT plus "
                    "safe-interval temporal optimization.",
        epilog="Environment overrides: KINOPLAN_<FLAG> (e.g. KINOPLAN_SEED) "
               "supplies a default for the matching flag.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_library=True):
        p.add_argument("--seed", type=int,
                       default=_env_default("seed", 0, int),
                       help="RNG seed (default 0)")
        p.add_argument("--out", default=_env_default("out", "out"),
                       help="output directory (default ./out)")
        if with_library:
            p.add_argument("--library",
                           default=_env_default("library", None),
                           help="curve library CSV; regenerated in-process when omitted")

    p = sub.add_parser("gen-library", help="fit the offline curve library")
    p.add_argument("--config", default=_env_default("config", None),
                   help="library config file (key = value lines)")
    p.add_argument("--out", default=_env_default("out", "library.csv"),
                   help="output CSV path (default library.csv)")
    p.add_argument("--seed", type=int, default=_env_default("seed", 0, int),
                   help="unused; accepted for interface uniformity")
    p.set_defaults(func=cmd_gen_library)

    p = sub.add_parser("plan", help="run one geometric planning query")
    add_common(p)
    p.add_argument("--scenario", default=_env_default("scenario", None),
                   help="builtin scenario name or scenario file for the world")
    p.add_argument("--start", type=_parse_pose, default=None,
                   help="start pose 'x,y,theta' (radians)")
    p.add_argument("--goal", type=_parse_pose, default=None,
                   help="goal pose 'x,y,theta' (radians)")
    p.add_argument("--config", default=_env_default("config", None),
                   help="planner config file (key = value lines)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="execute a scenario with the full loop")
    add_common(p)
    p.add_argument("--scenario", required=False,
                   default=_env_default("scenario", None),
                   help="builtin name (%s) or scenario file"
                        % "/".join(s.name for s in builtin_scenarios()))
    p.add_argument("--config", default=_env_default("config", None),
                   help="planner config file")
    p.add_argument("--ground-truth-tracks", action="store_true",
                   help="feed the tracker noise-free observations")
    p.add_argument("--replan-timeout", type=float,
                   default=_env_default("replan_timeout", 3.0, float),
                   help="seconds to wait before replanning the path (default 3)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench-sampling",
                       help="GMM vs random sampling benchmark over start headings")
    add_common(p)
    p.add_argument("--runs", type=int, default=_env_default("runs", 30, int),
                   help="runs per heading (default 30)")
    p.add_argument("--mode", choices=["gmm", "random", "both"],
                   default=_env_default("mode", "both"),
                   help="sampling mode(s) to benchmark (default both)")
    p.set_defaults(func=cmd_bench_sampling)

    p = sub.add_parser("export-plots", help="re-render plots from a trace CSV")
    p.add_argument("--trace", required=True, help="trace CSV from simulate")
    p.add_argument("--scenario", default=_env_default("scenario", None),
                   help="scenario name or file, for world geometry in the plot")
    p.add_argument("--out", default=_env_default("out", "out"))
    p.add_argument("--seed", type=int, default=_env_default("seed", 0, int),
                   help="unused; accepted for interface uniformity")
    p.set_defaults(func=cmd_export_plots)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not args.scenario:
        parser.error("simulate requires --scenario")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
