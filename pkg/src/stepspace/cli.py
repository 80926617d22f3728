"""Command-line front end.

Subcommands: build, query, plan, replan, bench, verify. Exit codes:

* 0 — success
* 1 — input / validation error
* 2 — node budget exhausted during a build
* 3 — no solution (point off-tree, or replanning found no valid chain)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import bench as bench_mod
from .footstep import PlanPreconditionError, assemble_problem, solve
from .planner import (DEFAULT_NODE_BUDGET, NODE_BUDGET_ENV,
                      NodeBudgetExceeded, build_tree, load_tree, save_tree)
from .query import (NoValidChainError, build_index, extract_plan, find_nodes,
                    invalidate_surface, replan)
from .scene import (Effector, SceneFormatError, SceneValidationError,
                    load_instance)
from .verification import run_all

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BUDGET = 2
EXIT_NO_SOLUTION = 3


def _stats_line(tree, build_ms):
    stats = tree.stats
    return (f"h={tree.total_nodes} layers={json.dumps(stats.layer_counts)} "
            f"build_ms={build_ms:.3f}")


def cmd_build(args):
    instance = load_instance(args.instance)
    if args.n is not None:
        instance = dataclasses.replace(instance, max_steps=args.n)
    if args.yaw is not None:
        yaw = [np.deg2rad(a) for a in args.yaw] or None
        instance = dataclasses.replace(instance, yaw_options=yaw)
    t0 = time.perf_counter()
    try:
        tree = build_tree(instance, merge=args.merge,
                          node_budget=args.node_budget)
    except NodeBudgetExceeded as exc:
        build_ms = (time.perf_counter() - t0) * 1e3
        print(_stats_line(exc.tree, build_ms) + " status=budget")
        if args.out:
            save_tree(exc.tree, args.out)
        return EXIT_BUDGET
    build_ms = (time.perf_counter() - t0) * 1e3
    print(_stats_line(tree, build_ms) + " status=ok")
    if args.out:
        save_tree(tree, args.out)
    return EXIT_OK


def _print_plan(plan):
    effectors = plan.effectors()
    for i, entry in enumerate(plan.entries):
        role = "start" if i == 0 else (
            "goal" if i == len(plan.entries) - 1 else f"step {i}")
        print(f"  {role}: {effectors[i].label} on surface "
              f"{entry.surface_id} (node {entry.node_id})")


def cmd_query(args):
    tree = load_tree(args.tree)
    index = build_index(tree)
    p = np.array(args.point)
    effector = Effector.parse(args.effector)
    times = []
    ids = []
    for _ in range(max(1, args.repeat)):
        t0 = time.perf_counter()
        ids = find_nodes(index, p, effector)
        times.append(time.perf_counter() - t0)
    if not ids:
        print("no-solution: point is outside every feasible region")
        return EXIT_NO_SOLUTION
    plan = extract_plan(tree, ids[0])
    print(f"containing nodes: {ids}")
    print(f"plan ({plan.length} steps):")
    _print_plan(plan)
    ms = np.array(times) * 1e3
    print(f"latency_ms p50={np.percentile(ms, 50):.3f} "
          f"p99={np.percentile(ms, 99):.3f} over {len(ms)} repeats")
    return EXIT_OK


def cmd_plan(args):
    tree = load_tree(args.tree)
    index = build_index(tree)
    p = np.array(args.point)
    effector = Effector.parse(args.effector)
    t0 = time.perf_counter()
    ids = find_nodes(index, p, effector)
    if not ids:
        print("no-solution: point is outside every feasible region")
        return EXIT_NO_SOLUTION
    plan = extract_plan(tree, ids[0])
    horizon = plan.length if args.horizon is None else args.horizon
    if horizon < 1:
        print("plan has horizon 0: already in the goal region")
        print(f"positions: {p.tolist()}")
        return EXIT_OK
    problem = assemble_problem(plan, p, horizon, args.objective,
                               tree.instance.kinematics)
    result = solve(problem)
    total_ms = (time.perf_counter() - t0) * 1e3
    print(f"status={result.status} horizon={horizon} "
          f"objective={result.objective_value:.6g} "
          f"max_violation={result.max_violation:.3e} "
          f"total_ms={total_ms:.3f}")
    for i, pos in enumerate(result.positions):
        print(f"  p{i}: [{pos[0]:.4f}, {pos[1]:.4f}, {pos[2]:.4f}]")
    if args.fig:
        from .viz import render_tree_figure
        render_tree_figure(tree, args.fig, plan_positions=result.positions,
                           start=p, title=f"{horizon}-step plan")
        print(f"figure written to {args.fig}")
    if result.status == "infeasible":
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_replan(args):
    tree = load_tree(args.tree)
    index = build_index(tree)
    for sid in args.invalidate:
        n = invalidate_surface(tree, index, sid)
        print(f"invalidated surface {sid}: {n} nodes")
    p = np.array(args.point)
    effector = Effector.parse(args.effector)
    plan = replan(tree, index, p, effector)
    if plan is None:
        print("no-solution: no valid chain avoids the invalidated surfaces")
        return EXIT_NO_SOLUTION
    print(f"plan ({plan.length} steps):")
    _print_plan(plan)
    return EXIT_OK


def cmd_bench(args):
    records = []

    def progress(rec):
        print(rec.line(), file=sys.stderr)

    if args.suite in ("growth", "all"):
        records += bench_mod.growth_suite(
            ms=tuple(args.ms), ns=tuple(args.ns),
            include_no_merge=not args.merge_only,
            no_merge_budget=args.no_merge_budget, progress=progress)
    if args.suite in ("timing", "all"):
        records += bench_mod.timing_suite(
            query_points=args.query_points, plan_points=args.plan_points,
            progress=progress)
    bench_mod.write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    if args.figs:
        paths = []
        growth = [r for r in records if r.scene.startswith("stones")
                  and np.isnan(r.q_p50_ms)]
        timing = [r for r in records if not np.isnan(r.q_p50_ms)]
        if growth:
            paths += bench_mod.render_growth_figures(growth, args.figs)
        if timing:
            paths += bench_mod.render_timing_figure(timing, args.figs)
        for p in paths:
            print(f"figure written to {p}")
    return EXIT_OK


def cmd_verify(args):
    if args.tree:
        tree = load_tree(args.tree)
    else:
        instance = load_instance(args.instance)
        tree = build_tree(instance)
    results = run_all(tree, rollouts=args.rollouts, seed=args.seed)
    ok = True
    for res in results:
        print(res.line())
        ok = ok and res.passed
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_INVALID


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stepspace",
        description="Feasible-space contact planning: build, query, plan.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a feasibility tree")
    p.add_argument("instance", help="problem instance JSON")
    p.add_argument("-n", type=int, default=None,
                   help="override the step budget")
    p.add_argument("--merge", dest="merge", action="store_true", default=True)
    p.add_argument("--no-merge", dest="merge", action="store_false")
    p.add_argument("--yaw", type=float, nargs="*", default=None,
                   help="discrete yaw angles in degrees")
    p.add_argument("--out", default=None, help="tree output path")
    p.add_argument("--node-budget", type=int, default=None,
                   help=f"node cap (default {DEFAULT_NODE_BUDGET}, "
                        f"env {NODE_BUDGET_ENV})")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="find the feasible nodes for a point")
    p.add_argument("tree", help="serialized tree path")
    p.add_argument("--point", type=float, nargs=3, required=True,
                   metavar=("X", "Y", "Z"))
    p.add_argument("--effector", choices=("left", "right"), required=True)
    p.add_argument("--repeat", type=int, default=1000,
                   help="latency measurement repeats")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("plan", help="query + footstep optimization")
    p.add_argument("tree")
    p.add_argument("--point", type=float, nargs=3, required=True,
                   metavar=("X", "Y", "Z"))
    p.add_argument("--effector", choices=("left", "right"), required=True)
    p.add_argument("--horizon", type=int, default=None,
                   help="steps to optimize (default: full plan length)")
    p.add_argument("--objective", choices=("feasibility", "minsq"),
                   default="feasibility")
    p.add_argument("--fig", default=None,
                   help="write an SVG/PNG top view of the plan")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("replan", help="replan around invalidated surfaces")
    p.add_argument("tree")
    p.add_argument("--invalidate", type=int, nargs="+", required=True,
                   metavar="SURFACE_ID")
    p.add_argument("--point", type=float, nargs=3, required=True,
                   metavar=("X", "Y", "Z"))
    p.add_argument("--effector", choices=("left", "right"), required=True)
    p.set_defaults(func=cmd_replan)

    p = sub.add_parser("bench", help="run the benchmark suites")
    p.add_argument("--suite", choices=("growth", "timing", "all"),
                   default="all")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--figs", default=None,
                   help="directory for rendered figures")
    p.add_argument("--ms", type=int, nargs="+",
                   default=list(bench_mod.GROWTH_MS),
                   help="surface counts for the growth sweep")
    p.add_argument("--ns", type=int, nargs="+",
                   default=list(bench_mod.GROWTH_NS),
                   help="step budgets for the growth sweep")
    p.add_argument("--merge-only", action="store_true",
                   help="skip the un-merged growth rows")
    p.add_argument("--no-merge-budget", type=int,
                   default=bench_mod.NO_MERGE_BUDGET)
    p.add_argument("--query-points", type=int, default=1000)
    p.add_argument("--plan-points", type=int, default=100)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the property-check suite")
    p.add_argument("tree", nargs="?", default=None,
                   help="serialized tree (or use --instance)")
    p.add_argument("--instance", default=None,
                   help="instance JSON to build and verify")
    p.add_argument("--rollouts", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and not (args.tree or args.instance):
        parser.error("verify needs a tree path or --instance")
    try:
        return args.func(args)
    except (SceneFormatError, SceneValidationError, PlanPreconditionError,
            NoValidChainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NodeBudgetExceeded as exc:
        print(f"error: node budget {exc.budget} exhausted", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
