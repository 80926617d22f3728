"""Backward dynamic program over contact surfaces.

Starting from the goal set, each layer k holds the convex polygons of
foot positions from which the goal is reachable in exactly k steps.
Expansion of a node Minkowski-sums its region with the (surface-aligned)
antecedent reach set of its effector and clips the result against every
contact surface. Same-depth nodes with identical (effector, surface,
yaw, region) are merged into one multi-parent node, which is what keeps
growth bilinear in practice.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    PlanarPolygon,
    Polytope,
    clip_polygon_by_polytope,
    minkowski_sum,
    rotate,
    rotate_z,
    rotation_to_normal,
)
from .scene import Effector

GOAL_SURFACE = -1  # sentinel surface id of the root node

DEFAULT_NODE_BUDGET = 5_000_000
NODE_BUDGET_ENV = "NAS_NODE_BUDGET"


@dataclass
class Node:
    id: int
    effector: Effector
    surface_id: int
    region: PlanarPolygon
    parents: list[int]
    depth: int
    yaw: int | None = None
    valid: bool = True

    def merge_key(self):
        return (int(self.effector), self.surface_id, self.yaw,
                self.region.canonical_key())


@dataclass
class BuildStats:
    layer_counts: list[int] = field(default_factory=list)
    layer_times_s: list[float] = field(default_factory=list)
    total_time_s: float = 0.0
    budget_hit: bool = False
    stopped_at_depth: int | None = None

    @property
    def total_nodes(self):
        return sum(self.layer_counts)

    @property
    def mean_branching(self):
        ratios = [b / a for a, b in zip(self.layer_counts,
                                        self.layer_counts[1:]) if a]
        return float(np.mean(ratios)) if ratios else 0.0


class NodeBudgetExceeded(RuntimeError):
    """Expansion aborted; carries the partially built tree and stats."""

    def __init__(self, tree, budget):
        super().__init__(
            f"node budget of {budget} exceeded at depth "
            f"{len(tree.layers) - 1} ({tree.stats.total_nodes} nodes)")
        self.tree = tree
        self.budget = budget


class FeasibilityTree:
    """Depth-indexed layers of nodes rooted at the goal set."""

    def __init__(self, instance):
        self.instance = instance
        self.layers: list[list[Node]] = []
        self.nodes: dict[int, Node] = {}
        self.stats = BuildStats()

    @property
    def root(self):
        return self.layers[0][0]

    @property
    def total_nodes(self):
        return len(self.nodes)

    def add_layer(self, nodes):
        for node in nodes:
            self.nodes[node.id] = node
        self.layers.append(nodes)

    def surface_normal(self, node):
        if node.surface_id == GOAL_SURFACE:
            return self.instance.goal_surface.normal
        return self.instance.scene.by_id[node.surface_id].normal

    def valid_nodes(self):
        return (n for n in self.nodes.values() if n.valid)


def _region_polytope(region):
    dim = 2 if len(region) >= 3 else (1 if len(region) == 2 else 0)
    return Polytope(region.vertices, dim)


class _Expander:
    """Per-build expansion state: reach-polytope cache and id counter."""

    def __init__(self, instance):
        self.instance = instance
        self.next_id = 0
        self._reach_cache = {}
        yaw = instance.yaw_options
        self._yaw_count = len(yaw) if yaw else 0

    def take_id(self):
        nid = self.next_id
        self.next_id += 1
        return nid

    def reach_polytope(self, node, tree, theta=0.0):
        """Volume from which the node's region is reachable in one step."""
        key = (int(node.effector), node.surface_id, theta,
               node.region.canonical_key())
        cached = self._reach_cache.get(key)
        if cached is not None:
            return cached
        antecedent = self.instance.kinematics.antecedent(node.effector)
        if theta:
            antecedent = rotate_z(antecedent, theta)
        normal = tree.surface_normal(node)
        if normal[2] < 1.0 - 1e-12:
            antecedent = rotate(antecedent, rotation_to_normal(normal))
        reach = minkowski_sum(antecedent, _region_polytope(node.region))
        self._reach_cache[key] = reach
        return reach

    def feasible_nodes(self, node, tree):
        if self.instance.yaw_options:
            return self.feasible_nodes_yaw(node, tree)
        reach = self.reach_polytope(node, tree)
        return self._clip_children(node, reach, None)

    def feasible_nodes_yaw(self, node, tree):
        children = []
        for k, theta in enumerate(self.instance.yaw_options):
            reach = self.reach_polytope(node, tree, theta)
            gamma = ((node.yaw or 0) + k) % self._yaw_count
            children.extend(self._clip_children(node, reach, gamma))
        return children

    def _clip_children(self, node, reach, yaw):
        scene = self.instance.scene
        lo, hi = reach.bbox
        children = []
        for idx in scene.candidates_in_box(lo, hi):
            surface = scene.surfaces[idx]
            region = clip_polygon_by_polytope(surface.polygon, reach)
            if region is None:
                continue
            children.append(Node(
                id=self.take_id(),
                effector=node.effector.other,
                surface_id=surface.id,
                region=region,
                parents=[node.id],
                depth=node.depth + 1,
                yaw=yaw,
            ))
        return children


def reach_polytope(node, instance, tree=None):
    """Stand-alone reach-volume computation (uncached)."""
    antecedent = instance.kinematics.antecedent(node.effector)
    if node.surface_id == GOAL_SURFACE:
        normal = instance.goal_surface.normal
    else:
        normal = instance.scene.by_id[node.surface_id].normal
    if normal[2] < 1.0 - 1e-12:
        antecedent = rotate(antecedent, rotation_to_normal(normal))
    return minkowski_sum(antecedent, _region_polytope(node.region))


def feasible_nodes(node, instance):
    """One-step antecedent nodes of ``node`` (un-merged, fresh ids from 0)."""
    tree = FeasibilityTree(instance)
    tree.add_layer([node])
    exp = _Expander(instance)
    exp.next_id = node.id + 1
    return exp.feasible_nodes(node, tree)


def merge_layer(layer):
    """Coalesce same-depth nodes with identical regions.

    Node ids are preserved from the first constituent of each group;
    output order is deterministic.
    """
    groups: dict[tuple, Node] = {}
    for node in layer:
        key = node.merge_key()
        kept = groups.get(key)
        if kept is None:
            groups[key] = node
        else:
            kept.parents = sorted(set(kept.parents) | set(node.parents))
    merged = list(groups.values())
    merged.sort(key=lambda n: (n.surface_id, n.yaw if n.yaw is not None else -1,
                               n.region.canonical_key()))
    return merged


def _resolve_budget(node_budget):
    if node_budget is not None:
        return int(node_budget)
    env = os.environ.get(NODE_BUDGET_ENV)
    if env:
        return int(env)
    return DEFAULT_NODE_BUDGET


def build_tree(instance, merge=True, stop_at=None, node_budget=None):
    """Breadth-first expansion of the feasibility tree.

    ``stop_at`` is an optional (point, effector) pair: expansion halts at
    the first layer containing that state. Exceeding the node budget
    raises :class:`NodeBudgetExceeded` carrying the partial tree.
    """
    budget = _resolve_budget(node_budget)
    t_start = time.perf_counter()
    tree = FeasibilityTree(instance)
    exp = _Expander(instance)

    root = Node(
        id=exp.take_id(),
        effector=instance.goal_effector,
        surface_id=GOAL_SURFACE,
        region=instance.goal_region(),
        parents=[],
        depth=0,
        yaw=0 if instance.yaw_options else None,
    )
    tree.add_layer([root])
    tree.stats.layer_counts.append(1)
    tree.stats.layer_times_s.append(0.0)

    stop_point = stop_eff = None
    if stop_at is not None:
        stop_point = np.asarray(stop_at[0], dtype=float)
        stop_eff = Effector(stop_at[1])
        if _layer_contains(tree.layers[0], stop_point, stop_eff):
            tree.stats.stopped_at_depth = 0
            tree.stats.total_time_s = time.perf_counter() - t_start
            return tree

    for depth in range(1, instance.max_steps + 1):
        t_layer = time.perf_counter()
        children = []
        for node in tree.layers[depth - 1]:
            children.extend(exp.feasible_nodes(node, tree))
        if merge:
            children = merge_layer(children)
        tree.add_layer(children)
        tree.stats.layer_counts.append(len(children))
        tree.stats.layer_times_s.append(time.perf_counter() - t_layer)
        if not children:
            break
        if tree.total_nodes > budget:
            tree.stats.budget_hit = True
            tree.stats.total_time_s = time.perf_counter() - t_start
            raise NodeBudgetExceeded(tree, budget)
        if stop_point is not None and _layer_contains(children, stop_point,
                                                      stop_eff):
            tree.stats.stopped_at_depth = depth
            break

    tree.stats.total_time_s = time.perf_counter() - t_start
    return tree


def _layer_contains(layer, point, effector):
    return any(n.effector == effector and n.region.contains(point)
               for n in layer)


# ---------------------------------------------------------------------------
# Diagnostics dump (line-delimited JSON records)

def dump_tree(tree, fh):
    import json

    for layer in tree.layers:
        for node in layer:
            fh.write(json.dumps({
                "id": node.id,
                "depth": node.depth,
                "effector": node.effector.label,
                "surface_id": node.surface_id,
                "yaw": node.yaw,
                "parents": node.parents,
                "valid": node.valid,
                "region": node.region.vertices.tolist(),
                "region_normal": node.region.normal.tolist(),
            }) + "\n")


def save_tree(tree, path):
    """Serialize a tree (with its instance) to a JSON-lines file."""
    import json

    from .scene import instance_to_dict

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "format": "feasibility-tree-v1",
            "instance": instance_to_dict(tree.instance),
            "stats": {
                "layer_counts": tree.stats.layer_counts,
                "layer_times_s": tree.stats.layer_times_s,
                "total_time_s": tree.stats.total_time_s,
                "budget_hit": tree.stats.budget_hit,
            },
        }) + "\n")
        dump_tree(tree, fh)


def load_tree(path):
    import json

    from .scene import instance_from_dict

    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "feasibility-tree-v1":
            raise ValueError(f"{path}: not a feasibility tree file")
        instance = instance_from_dict(header["instance"], str(path))
        tree = FeasibilityTree(instance)
        stats = header.get("stats", {})
        tree.stats.layer_counts = list(stats.get("layer_counts", []))
        tree.stats.layer_times_s = list(stats.get("layer_times_s", []))
        tree.stats.total_time_s = stats.get("total_time_s", 0.0)
        tree.stats.budget_hit = stats.get("budget_hit", False)

        layers: dict[int, list[Node]] = {}
        for line in fh:
            rec = json.loads(line)
            node = Node(
                id=rec["id"],
                effector=Effector.parse(rec["effector"]),
                surface_id=rec["surface_id"],
                region=PlanarPolygon(np.asarray(rec["region"]),
                                     normal=rec["region_normal"]),
                parents=list(rec["parents"]),
                depth=rec["depth"],
                yaw=rec["yaw"],
                valid=rec.get("valid", True),
            )
            layers.setdefault(node.depth, []).append(node)
    for depth in sorted(layers):
        tree.add_layer(layers[depth])
    return tree
