"""Property checks over built trees.

Three independent oracles back the planner's guarantees:

- completeness: random backward rollouts from the goal must always land
  inside some tree node of matching depth bound and effector;
- soundness: from every node's Chebyshev center, the footstep program
  over the full parent chain must be feasible;
- merge neutrality: merged and un-merged trees must cover identical
  regions per (depth, effector, surface), tested by sampled membership.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .footstep import EPS_QP, assemble_problem, solve
from .geometry import chebyshev_center, clip_polygon_by_polytope
from .planner import build_tree, reach_polytope, Node, GOAL_SURFACE
from .query import extract_plan


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    failures: list = field(default_factory=list)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        extra = f" ({len(self.failures)} failures)" if self.failures else ""
        return f"[{mark}] {self.name}: {self.checked} checks{extra}"


def _rollout_once(instance, rng, max_depth):
    """One backward rollout; returns (endpoint, effector, steps taken)."""
    goal = instance.goal_region()
    weights = rng.dirichlet(np.ones(len(goal.vertices)))
    point = weights @ goal.vertices
    effector = instance.goal_effector
    surface_id = GOAL_SURFACE

    steps = int(rng.integers(1, max_depth + 1))
    taken = 0
    for _ in range(steps):
        probe = Node(id=0, effector=effector, surface_id=surface_id,
                     region=_point_region(instance, point, surface_id),
                     parents=[], depth=0)
        reach = reach_polytope(probe, instance)
        options = []
        for surface in instance.scene.surfaces:
            clipped = clip_polygon_by_polytope(surface.polygon, reach)
            if clipped is not None:
                options.append((surface.id, clipped))
        if not options:
            break
        areas = np.array([c.area() for _, c in options])
        pick = rng.choice(len(options), p=areas / areas.sum())
        surface_id, region = options[pick]
        point = region.sample(rng)
        effector = effector.other
        taken += 1
    return point, effector, taken


def _point_region(instance, point, surface_id):
    from .geometry import PlanarPolygon

    if surface_id == GOAL_SURFACE:
        normal = instance.goal_surface.normal
    else:
        normal = instance.scene.by_id[surface_id].normal
    return PlanarPolygon(point[None, :], normal=normal)


def check_completeness(tree, rollouts=500, seed=0):
    """Backward rollouts must always be covered by a node of depth <= j."""
    instance = tree.instance
    rng = np.random.default_rng(seed)
    failures = []
    for trial in range(rollouts):
        point, effector, taken = _rollout_once(instance, rng,
                                               instance.max_steps)
        if taken == 0:
            continue
        hit = any(
            node.valid and node.depth <= taken
            and node.effector == effector and node.region.contains(point)
            for layer in tree.layers[:taken + 1] for node in layer
        )
        if not hit:
            failures.append((trial, taken, point.tolist()))
    return CheckResult("completeness rollouts", not failures, rollouts,
                       failures)


def check_soundness(tree, max_violation=EPS_QP, limit=None):
    """Full-horizon feasibility program from every node's center."""
    failures = []
    checked = 0
    for node in tree.nodes.values():
        if node.depth == 0 or not node.valid:
            continue
        if limit is not None and checked >= limit:
            break
        checked += 1
        plan = extract_plan(tree, node.id)
        p0 = chebyshev_center(node.region)
        problem = assemble_problem(plan, p0, node.depth, "feasibility",
                                   tree.instance.kinematics)
        result = solve(problem)
        if result.max_violation > max_violation:
            failures.append((node.id, node.depth, result.max_violation))
    return CheckResult("soundness sweep", not failures, checked, failures)


def _bucketize(tree):
    buckets = {}
    for layer in tree.layers:
        for node in layer:
            key = (node.depth, int(node.effector), node.surface_id)
            buckets.setdefault(key, []).append(node.region)
    return buckets


def check_merge_neutrality(instance, samples_per_layer=1000, seed=0,
                           node_budget=200_000, max_depth=None):
    """Merged and un-merged trees cover the same regions per bucket.

    ``max_depth`` caps the compared depth so the un-merged twin stays
    tractable on scenes where it grows exponentially.
    """
    if max_depth is not None and max_depth < instance.max_steps:
        instance = dataclasses.replace(instance, max_steps=max_depth)
    merged = build_tree(instance, merge=True)
    unmerged = build_tree(instance, merge=False, node_budget=node_budget)
    rng = np.random.default_rng(seed)
    a, b = _bucketize(merged), _bucketize(unmerged)
    failures = []
    checked = 0
    if set(a) != set(b):
        failures.append(("bucket keys differ", sorted(set(a) ^ set(b))))
    per_region = max(1, samples_per_layer // max(1, len(a)))
    for key in sorted(set(a) & set(b)):
        for src, dst in ((a[key], b[key]), (b[key], a[key])):
            for region in src:
                if len(region) < 3:
                    continue
                pts = np.atleast_2d(region.sample(rng, per_region))
                for p in pts:
                    checked += 1
                    if not any(r.contains(p, 1e-9) for r in dst):
                        failures.append((key, p.tolist()))
    return CheckResult("merge neutrality", not failures, checked, failures)


def check_alternation(tree):
    """Effectors strictly alternate along every parent edge."""
    failures = []
    checked = 0
    for node in tree.nodes.values():
        for pid in node.parents:
            checked += 1
            if tree.nodes[pid].effector == node.effector:
                failures.append((node.id, pid))
            if tree.nodes[pid].depth != node.depth - 1:
                failures.append((node.id, pid, "depth"))
    return CheckResult("effector alternation", not failures, checked,
                       failures)


def run_all(tree, rollouts=500, seed=0, merge_check_budget=200_000):
    """The full verification suite; merge neutrality is skipped when the
    un-merged twin would exceed the given budget."""
    results = [
        check_completeness(tree, rollouts=rollouts, seed=seed),
        check_soundness(tree),
        check_alternation(tree),
    ]
    from .planner import NodeBudgetExceeded

    try:
        results.append(check_merge_neutrality(
            tree.instance, seed=seed, node_budget=merge_check_budget))
    except NodeBudgetExceeded:
        results.append(CheckResult(
            "merge neutrality (skipped: un-merged twin exceeds budget)",
            True, 0))
    return results
