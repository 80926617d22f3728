"""Benchmark harness: growth and timing suites.

The growth suite sweeps stepping-stone scenes with m in {4, 10, 22, 43}
surfaces (the 43-surface scene is built by duplicating the 22-surface
one) and step budgets n in {10, 25, 50, 100}, with and without node
merging. The timing suite measures query and footstep-program latencies
on the largest tree and on a long corridor (plan depth 61).

Results go to a CSV with a stable schema; when a figures directory is
given, matplotlib plots of node growth and latencies are rendered next
to the CSV. Everything is deterministic given the seeds, so two runs
produce byte-identical CSVs up to the time columns.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from . import scene as sc
from .footstep import assemble_problem, solve
from .geometry import chebyshev_center
from .planner import NodeBudgetExceeded, build_tree
from .query import build_index, extract_plan, find_nodes

CSV_COLUMNS = ["scene", "m", "n", "merge", "yaw", "h", "layers",
               "build_ms", "q_p50_ms", "q_p99_ms", "qp_ms", "status"]

GROWTH_MS = (4, 10, 22, 43)
GROWTH_NS = (10, 25, 50, 100)
NO_MERGE_BUDGET = 20_000


@dataclass
class BenchRecord:
    scene: str
    m: int
    n: int
    merge: bool
    yaw: int
    h: int
    layers: list[int]
    build_ms: float
    q_p50_ms: float = float("nan")
    q_p99_ms: float = float("nan")
    qp_ms: float = float("nan")
    status: str = "ok"

    def row(self):
        def fmt(x):
            return "" if isinstance(x, float) and np.isnan(x) else f"{x:.3f}"
        return [self.scene, self.m, self.n, int(self.merge), self.yaw,
                self.h, json.dumps(self.layers), fmt(self.build_ms),
                fmt(self.q_p50_ms), fmt(self.q_p99_ms), fmt(self.qp_ms),
                self.status]

    def line(self):
        return ",".join(str(x) for x in self.row())


# ---------------------------------------------------------------------------
# Bench scene factories (generator analogues of the evaluation scenes;
# the original geometries are not published, so m is matched instead).

def stones_instance(m, n, kinematics=None):
    """Compact stepping-stone instance with exactly m surfaces."""
    kin = kinematics or sc.default_kinematics()
    if m == 43:
        base = sc.stepping_stones(5, 5, keep=22)
        scene = sc.duplicate(base, 2, (0.0, 0.28, 0.0))
        scene = sc.Scene(scene.surfaces[:-1])  # 2x22 minus one -> 43
    else:
        shapes = {4: (2, 2), 6: (2, 3), 10: (2, 5), 22: (5, 5)}
        rows, cols = shapes.get(m, (1, m))
        scene = sc.stepping_stones(rows, cols, keep=m)
    scene = sc.inset_scene(scene, kin)
    mid = np.mean([s.polygon.centroid() for s in scene.surfaces], axis=0)
    goal_surface = min(scene.surfaces,
                       key=lambda s: np.linalg.norm(s.polygon.centroid() - mid))
    goal = goal_surface.polygon.centroid()
    return sc.make_instance(scene, kin, [goal.tolist()], n)


def corridor_instance(length=64, n=61, kinematics=None):
    """Single-file corridor of stones; plans reach depth ~length."""
    kin = kinematics or sc.default_kinematics()
    scene = sc.inset_scene(sc.stepping_stones(1, length), kin)
    goal = scene.surfaces[0].polygon.centroid()
    return sc.make_instance(scene, kin, [goal.tolist()], n)


def staircase_instance(steps=6, n=8, kinematics=None):
    kin = kinematics or sc.default_kinematics()
    scene = sc.inset_scene(
        sc.staircase(steps=steps, rise=0.12, run=0.3, width=1.2), kin)
    goal = scene.surfaces[-1].polygon.centroid()
    return sc.make_instance(scene, kin, [goal.tolist()], n)


# ---------------------------------------------------------------------------
# Measurement helpers

def _build_record(name, instance, merge, node_budget=None):
    status = "ok"
    t0 = time.perf_counter()
    try:
        tree = build_tree(instance, merge=merge, node_budget=node_budget)
    except NodeBudgetExceeded as exc:
        tree = exc.tree
        status = "budget"
    build_ms = (time.perf_counter() - t0) * 1e3
    rec = BenchRecord(
        scene=name, m=instance.scene.m, n=instance.max_steps, merge=merge,
        yaw=len(instance.yaw_options) if instance.yaw_options else 0,
        h=tree.total_nodes, layers=tree.stats.layer_counts,
        build_ms=build_ms, status=status,
    )
    return rec, tree


def sample_query_points(tree, count, seed):
    """Random points drawn from node regions (always in some region)."""
    rng = np.random.default_rng(seed)
    nodes = [n for n in tree.nodes.values()
             if n.valid and len(n.region) >= 3]
    picks = rng.choice(len(nodes), size=count)
    out = []
    for i in picks:
        node = nodes[i]
        out.append((node.region.sample(rng), node.effector))
    return out

def measure_query_latency(tree, index, count=1000, seed=1):
    points = sample_query_points(tree, count, seed)
    times = np.empty(len(points))
    for i, (p, eff) in enumerate(points):
        t0 = time.perf_counter()
        find_nodes(index, p, eff)
        times[i] = time.perf_counter() - t0
    return (float(np.percentile(times, 50) * 1e3),
            float(np.percentile(times, 99) * 1e3))


def measure_plan_latency(tree, index, count=100, seed=2):
    """End-to-end query + full-horizon feasibility program, p99 ms."""
    points = sample_query_points(tree, count, seed)
    kin = tree.instance.kinematics
    times = []
    for p, eff in points:
        t0 = time.perf_counter()
        ids = find_nodes(index, p, eff)
        if not ids:
            continue
        plan = extract_plan(tree, ids[0])
        if plan.length >= 1:
            problem = assemble_problem(plan, p, plan.length, "feasibility",
                                       kin)
            solve(problem)
        times.append(time.perf_counter() - t0)
    if not times:
        return float("nan")
    return float(np.percentile(times, 99) * 1e3)


# ---------------------------------------------------------------------------
# Suites

def growth_suite(ms=GROWTH_MS, ns=GROWTH_NS, include_no_merge=True,
                 no_merge_budget=NO_MERGE_BUDGET, progress=None):
    records = []
    for m in ms:
        for n in ns:
            rec, _ = _build_record(f"stones{m}", stones_instance(m, n),
                                   merge=True)
            records.append(rec)
            if progress:
                progress(rec)
            if include_no_merge:
                rec, _ = _build_record(f"stones{m}", stones_instance(m, n),
                                       merge=False,
                                       node_budget=no_merge_budget)
                records.append(rec)
                if progress:
                    progress(rec)
    return records


def timing_suite(query_points=1000, plan_points=100, progress=None):
    records = []

    # Largest growth tree: query latency at scale.
    inst = stones_instance(43, 100)
    rec, tree = _build_record("stones43", inst, merge=True)
    index = build_index(tree)
    rec.q_p50_ms, rec.q_p99_ms = measure_query_latency(tree, index,
                                                       query_points, seed=1)
    rec.qp_ms = measure_plan_latency(tree, index, plan_points, seed=2)
    records.append(rec)
    if progress:
        progress(rec)

    # Mid-size tree below the 10^4-node regime.
    inst = stones_instance(22, 100)
    rec, tree = _build_record("stones22", inst, merge=True)
    index = build_index(tree)
    rec.q_p50_ms, rec.q_p99_ms = measure_query_latency(tree, index,
                                                       query_points, seed=3)
    rec.qp_ms = measure_plan_latency(tree, index, plan_points, seed=4)
    records.append(rec)
    if progress:
        progress(rec)

    # Deep corridor: the footstep program dominates (horizon up to 61).
    inst = corridor_instance(length=64, n=61)
    rec, tree = _build_record("corridor64", inst, merge=True)
    index = build_index(tree)
    rec.q_p50_ms, rec.q_p99_ms = measure_query_latency(tree, index,
                                                       query_points, seed=5)
    rec.qp_ms = measure_plan_latency(tree, index, plan_points, seed=6)
    records.append(rec)
    if progress:
        progress(rec)
    return records


# ---------------------------------------------------------------------------
# Output

def write_csv(records, path_or_file):
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file,
                                                         "__fspath__"):
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _write_csv(records, fh)
    else:
        _write_csv(records, path_or_file)


def _write_csv(records, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in sorted(records, key=lambda r: (r.scene, r.m, r.n, r.merge)):
        writer.writerow(rec.row())


def csv_text(records):
    buf = io.StringIO()
    _write_csv(records, buf)
    return buf.getvalue()


def render_growth_figures(records, directory):
    """Node-growth plots rendered next to the CSV output."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    merged = [r for r in records if r.merge]
    unmerged = [r for r in records if not r.merge]
    out = []

    if merged:
        fig, ax = plt.subplots(figsize=(6, 4))
        for m in sorted({r.m for r in merged}):
            rows = sorted([r for r in merged if r.m == m], key=lambda r: r.n)
            ax.plot([r.n for r in rows], [r.h for r in rows],
                    marker="o", label=f"m={m}")
        ax.set_xlabel("step budget n")
        ax.set_ylabel("tree size h")
        ax.set_title("Merged tree growth")
        ax.legend()
        fig.tight_layout()
        path = directory / "growth_merged.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        out.append(path)

    if unmerged:
        fig, ax = plt.subplots(figsize=(6, 4))
        deepest = max(unmerged, key=lambda r: len(r.layers))
        ax.semilogy(range(len(deepest.layers)), deepest.layers, marker="o",
                    label=f"m={deepest.m} (no merge)")
        ax.set_xlabel("depth")
        ax.set_ylabel("layer node count")
        ax.set_title("Un-merged layer growth")
        ax.legend()
        fig.tight_layout()
        path = directory / "growth_unmerged.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        out.append(path)
    return out


def render_timing_figure(records, directory):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r.scene for r in records]
    x = np.arange(len(records))
    ax.bar(x - 0.2, [r.q_p99_ms for r in records], width=0.4,
           label="query p99 (ms)")
    ax.bar(x + 0.2, [r.qp_ms for r in records], width=0.4,
           label="query+QP p99 (ms)")
    ax.set_xticks(x, labels)
    ax.set_ylabel("latency (ms)")
    ax.set_title("Query and footstep-program latency")
    ax.legend()
    fig.tight_layout()
    path = directory / "timing.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def fit_bilinear(records):
    """Least-squares a for h ~ a*m*n and per-row relative residuals."""
    rows = [r for r in records if r.merge and r.status == "ok"]
    mn = np.array([r.m * r.n for r in rows], dtype=float)
    h = np.array([r.h for r in rows], dtype=float)
    a = float(mn @ h / (mn @ mn))
    residuals = np.abs(h - a * mn) / (a * mn)
    return a, residuals
