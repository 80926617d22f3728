"""Acceptance gate: the ten headline claims, each at its stated tolerance.

The growth sweep (m in {4, 10, 22, 43} x n in {10, 25, 50, 100}) is built
once per session and shared across the growth, build-time, and latency
criteria.
"""

import time

import numpy as np
import pytest
from scipy.optimize import linprog

from stepspace import bench
from stepspace.footstep import EPS_QP, assemble_problem, solve
from stepspace.geometry import chebyshev_center, convex_hull, minkowski_sum
from stepspace.planner import NodeBudgetExceeded, build_tree
from stepspace.query import (build_index, extract_plan, find_nodes,
                             find_nodes_linear, invalidate_surface, replan,
                             replan_oracle)
from stepspace.scene import Effector
from stepspace.verification import (check_completeness,
                                    check_merge_neutrality, check_soundness)

GROWTH_MS = (4, 10, 22, 43)
GROWTH_NS = (10, 25, 50, 100)


@pytest.fixture(scope="session")
def growth_trees():
    """Merged trees for the full sweep, with build wall-times."""
    out = {}
    for m in GROWTH_MS:
        for n in GROWTH_NS:
            inst = bench.stones_instance(m, n)
            t0 = time.perf_counter()
            tree = build_tree(inst)
            out[(m, n)] = (tree, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def corridor_tree():
    return build_tree(bench.corridor_instance(length=64, n=61))


# ---------------------------------------------------------------------------
# 1. Bilinear growth of the merged tree

def test_criterion_1_bilinear_growth(growth_trees):
    mn = np.array([m * n for (m, n) in growth_trees], dtype=float)
    h = np.array([t.total_nodes for t, _ in growth_trees.values()],
                 dtype=float)
    a = mn @ h / (mn @ mn)
    residuals = np.abs(h - a * mn) / (a * mn)
    assert residuals.max() <= 0.25, f"worst fit residual {residuals.max():.3f}"
    # after saturation the per-layer count is constant within +- m
    for (m, n), (tree, _) in growth_trees.items():
        layers = tree.stats.layer_counts
        sat = max(range(len(layers)), key=lambda i: layers[i])
        tail = layers[sat:]
        assert max(tail) - min(tail) <= m, (m, n, layers)


# ---------------------------------------------------------------------------
# 2. Exponential growth without merging

def test_criterion_2_exponential_without_merge():
    inst = bench.stones_instance(10, 100)
    with pytest.raises(NodeBudgetExceeded) as info:
        build_tree(inst, merge=False, node_budget=20_000)
    layers = info.value.tree.stats.layer_counts
    ratios = [layers[i + 1] / layers[i] for i in range(len(layers) - 1)]
    streak = best = 0
    for r in ratios:
        streak = streak + 1 if r >= 1.3 else 0
        best = max(best, streak)
    assert best >= 5, f"ratios {ratios}"


# ---------------------------------------------------------------------------
# 3. Build-time ceiling for the largest scene

def test_criterion_3_build_time_ceiling(growth_trees):
    _, seconds = growth_trees[(43, 100)]
    print(f"\n  m=43 n=100 merged build: {seconds:.2f} s")
    assert seconds < 300, f"build took {seconds:.1f} s (target < 5 min)"


# ---------------------------------------------------------------------------
# 4. Query latency

def _p99_query_ms(tree, points=1000, seed=1):
    index = build_index(tree)
    return bench.measure_query_latency(tree, index, points, seed)[1]


def test_criterion_4_query_latency(growth_trees):
    mid, _ = growth_trees[(22, 100)]
    assert mid.total_nodes <= 10_000
    p99 = _p99_query_ms(mid)
    print(f"\n  h={mid.total_nodes} query p99 = {p99:.2f} ms")
    assert p99 <= 25.0
    largest, _ = growth_trees[(43, 100)]
    p99 = _p99_query_ms(largest)
    print(f"  h={largest.total_nodes} query p99 = {p99:.2f} ms")
    assert p99 <= 100.0


# ---------------------------------------------------------------------------
# 5. Query + footstep program within the real-time budget

def test_criterion_5_query_plus_qp_budget(corridor_tree):
    assert len(corridor_tree.layers) - 1 >= 55  # deep horizon, up to n=61
    index = build_index(corridor_tree)
    p99 = bench.measure_plan_latency(corridor_tree, index, count=100, seed=2)
    print(f"\n  corridor query+QP p99 = {p99:.2f} ms")
    assert p99 <= 100.0


# ---------------------------------------------------------------------------
# 6. Completeness rollouts

def test_criterion_6_completeness(demo_tree, stones10_tree, staircase_tree):
    t0 = time.perf_counter()
    for tree in (demo_tree, stones10_tree, staircase_tree):
        result = check_completeness(tree, rollouts=500, seed=0)
        assert result.passed, result.failures[:3]
        assert result.checked >= 500
    assert time.perf_counter() - t0 < 60


# ---------------------------------------------------------------------------
# 7. Soundness sweep

def test_criterion_7_soundness(demo_tree, stones10_tree, staircase_tree,
                               growth_trees):
    trees = [demo_tree, stones10_tree, staircase_tree,
             growth_trees[(22, 100)][0]]
    t0 = time.perf_counter()
    for tree in trees:
        assert tree.total_nodes <= 10_000
        result = check_soundness(tree, max_violation=EPS_QP)
        assert result.passed, result.failures[:3]
    assert time.perf_counter() - t0 < 300


# ---------------------------------------------------------------------------
# 8. Oracle equivalences

def test_criterion_8_find_nodes_oracle(stones10_tree):
    index = build_index(stones10_tree)
    rng = np.random.default_rng(8)
    verts = np.vstack([s.polygon.vertices
                       for s in stones10_tree.instance.scene.surfaces])
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    for _ in range(1000):
        p = rng.uniform(lo - 0.05, hi + 0.05)
        p[2] = 0.0
        for eff in (Effector.LEFT, Effector.RIGHT):
            assert find_nodes(index, p, eff) == \
                find_nodes_linear(stones10_tree, p, eff)


def _extreme_points_lp(points):
    """Extreme points via LP only (independent of the hull library)."""
    points = np.asarray(points, dtype=float)
    out = []
    for i, p in enumerate(points):
        others = np.delete(points, i, axis=0)
        # feasible lambda >= 0, sum = 1, others' combination = p?
        a_eq = np.vstack([others.T, np.ones(len(others))])
        b_eq = np.append(p, 1.0)
        res = linprog(np.zeros(len(others)), A_eq=a_eq, b_eq=b_eq,
                      bounds=(0, None), method="highs")
        if not res.success:
            out.append(p)
    return np.array(out)


def test_criterion_8_minkowski_oracle():
    rng = np.random.default_rng(88)
    for _ in range(100):
        a = convex_hull(rng.normal(size=(rng.integers(4, 9), 3)))
        b = convex_hull(rng.normal(size=(rng.integers(4, 9), 3)))
        s = minkowski_sum(a, b)
        sums = (a.vertices[:, None, :] + b.vertices[None, :, :]).reshape(-1, 3)
        # deduplicate before the O(n^2) LP sweep
        sums = np.unique(np.round(sums, 12), axis=0)
        oracle = _extreme_points_lp(sums)
        got = np.array(sorted(map(tuple, np.round(s.vertices, 9))))
        want = np.array(sorted(map(tuple, np.round(oracle, 9))))
        assert got.shape == want.shape
        assert np.allclose(got, want, atol=1e-9)


def test_criterion_8_merge_neutrality(stones10_instance):
    result = check_merge_neutrality(stones10_instance,
                                    samples_per_layer=1000, seed=0,
                                    node_budget=200_000, max_depth=6)
    assert result.passed, result.failures[:3]
    assert result.checked > 0


# ---------------------------------------------------------------------------
# 9. Replanning safety

def test_criterion_9_replanning_safety(stones10_instance, staircase_instance):
    rng = np.random.default_rng(9)
    for instance in (stones10_instance, staircase_instance):
        surface_ids = [s.id for s in instance.scene.surfaces]
        for _ in range(100):
            tree = build_tree(instance)
            index = build_index(tree)
            kill = rng.choice(surface_ids,
                              size=rng.integers(1, max(2, len(surface_ids) // 3)),
                              replace=False)
            for sid in kill:
                invalidate_surface(tree, index, int(sid))
            candidates = [n for n in tree.nodes.values()
                          if n.valid and n.depth >= 1]
            if not candidates:
                continue
            node = candidates[rng.integers(len(candidates))]
            p = node.region.sample(rng)
            plan = replan(tree, index, p, node.effector)
            oracle_depth = replan_oracle(tree, p, node.effector)
            if plan is None:
                assert oracle_depth is None
            else:
                assert plan.length == oracle_depth
                for entry in plan.entries:
                    assert tree.nodes[entry.node_id].valid


# ---------------------------------------------------------------------------
# 10. Benchmark determinism

def test_criterion_10_bench_determinism():
    import csv
    import io

    def run():
        records = bench.growth_suite(ms=(4, 10), ns=(10,),
                                     include_no_merge=True,
                                     no_merge_budget=3000)
        rows = list(csv.reader(io.StringIO(bench.csv_text(records))))
        # keep everything except the time columns (build_ms..qp_ms)
        return [tuple(cols[:7] + [cols[11]]) for cols in rows[1:]]

    assert run() == run()
