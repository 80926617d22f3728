"""Real-time exploitation of a feasibility tree.

Nodes are indexed per effector in a kd-tree keyed on the Chebyshev
center of each region. A containment query does a ball search of radius
max-circumradius (which cannot miss a containing node), then refines by
bounding box and exact region containment. Surface invalidation masks
index entries in place so replanning stays cheap.

Read queries may run concurrently; invalidation requires exclusive
access (single-writer, multi-reader).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import chebyshev_center
from .scene import Effector


@dataclass(frozen=True)
class PlanEntry:
    node_id: int
    surface_id: int
    region: object  # PlanarPolygon


@dataclass(frozen=True)
class SurfacePlan:
    """Parent chain from a queried node (depth k) down to the goal."""

    entries: tuple[PlanEntry, ...]
    start_effector: Effector

    @property
    def length(self):
        return len(self.entries) - 1

    def effectors(self):
        eff = self.start_effector
        out = []
        for _ in self.entries:
            out.append(eff)
            eff = eff.other
        return out


class NoValidChainError(RuntimeError):
    """Every parent chain from the node crosses an invalid node."""


class _EffectorIndex:
    def __init__(self, nodes):
        self.ids = np.array([n.id for n in nodes], dtype=int)
        self.depths = np.array([n.depth for n in nodes], dtype=int)
        centers = np.array([chebyshev_center(n.region) for n in nodes])
        self.centers = centers
        self.bbox_min = np.array([n.region.bbox[0] for n in nodes])
        self.bbox_max = np.array([n.region.bbox[1] for n in nodes])
        radii = np.array([n.region.circumradius(c)
                          for n, c in zip(nodes, centers)])
        self.max_radius = float(radii.max()) if len(radii) else 0.0
        self.valid = np.ones(len(nodes), dtype=bool)
        self.nodes = list(nodes)
        self.tree = cKDTree(centers) if len(nodes) else None
        self.pos_by_id = {n.id: i for i, n in enumerate(nodes)}

    def query(self, p, eps=1e-9):
        if self.tree is None:
            return []
        hits = self.tree.query_ball_point(p, self.max_radius + 1e-6)
        out = []
        for i in hits:
            if not self.valid[i]:
                continue
            if np.any(p < self.bbox_min[i] - eps) or \
               np.any(p > self.bbox_max[i] + eps):
                continue
            if self.nodes[i].region.contains(p, eps):
                out.append((int(self.depths[i]), int(self.ids[i])))
        out.sort()
        return [nid for _, nid in out]


class SpatialIndex:
    def __init__(self, per_effector):
        self.per_effector = per_effector

    def mask_node(self, node):
        idx = self.per_effector.get(node.effector)
        if idx is None:
            return
        pos = idx.pos_by_id.get(node.id)
        if pos is not None:
            idx.valid[pos] = False

    def rebuild(self, tree):
        """Maintenance: drop invalidated entries entirely."""
        return build_index(tree)


def build_index(tree):
    """Index every valid node of the tree, one kd-tree per effector."""
    buckets = {Effector.LEFT: [], Effector.RIGHT: []}
    for layer in tree.layers:
        for node in layer:
            if node.valid:
                buckets[node.effector].append(node)
    return SpatialIndex({eff: _EffectorIndex(nodes)
                         for eff, nodes in buckets.items()})


def find_nodes(index, p, effector, eps=1e-9):
    """Ids of valid nodes of ``effector`` containing p, shallowest first.

    Equal-depth ties are broken by ascending node id.
    """
    p = np.asarray(p, dtype=float)
    return index.per_effector[Effector(effector)].query(p, eps)


def find_nodes_linear(tree, p, effector, eps=1e-9):
    """Brute-force scan over all nodes; oracle for :func:`find_nodes`."""
    p = np.asarray(p, dtype=float)
    effector = Effector(effector)
    out = []
    for node in tree.nodes.values():
        if node.valid and node.effector == effector \
                and node.region.contains(p, eps):
            out.append((node.depth, node.id))
    out.sort()
    return [nid for _, nid in out]


def extract_plan(tree, node_id):
    """Greedy parent-chain extraction (lowest-id valid parent each level).

    Raises :class:`NoValidChainError` when the greedy choice dead-ends;
    :func:`replan` is the backtracking fallback.
    """
    node = tree.nodes[node_id]
    if not node.valid:
        raise NoValidChainError(f"node {node_id} is invalid")
    chain = [node]
    while chain[-1].depth > 0:
        parent = None
        for pid in sorted(chain[-1].parents):
            cand = tree.nodes[pid]
            if cand.valid:
                parent = cand
                break
        if parent is None:
            raise NoValidChainError(
                f"all parents of node {chain[-1].id} are invalid")
        chain.append(parent)
    return _plan_from_chain(chain)


def _plan_from_chain(chain):
    entries = tuple(PlanEntry(n.id, n.surface_id, n.region) for n in chain)
    return SurfacePlan(entries, chain[0].effector)


def invalidate_surface(tree, index, surface_id):
    """Mark every node on a surface invalid; returns the count."""
    if surface_id not in tree.instance.scene.by_id:
        raise ValueError(f"unknown surface id {surface_id}")
    count = 0
    for node in tree.nodes.values():
        if node.surface_id == surface_id and node.valid:
            node.valid = False
            index.mask_node(node)
            count += 1
    return count


def _valid_chain(tree, node, dead):
    """DFS for a chain of valid nodes to the root, lowest ids first."""
    if node.depth == 0:
        return [node]
    if node.id in dead:
        return None
    for pid in sorted(node.parents):
        parent = tree.nodes[pid]
        if not parent.valid:
            continue
        chain = _valid_chain(tree, parent, dead)
        if chain is not None:
            return [node] + chain
    dead.add(node.id)
    return None


def replan(tree, index, p, effector):
    """First all-valid plan over the containing nodes, shallowest first.

    Returns ``None`` when no valid chain exists from any containing node.
    """
    dead = set()
    for nid in find_nodes(index, p, effector):
        chain = _valid_chain(tree, tree.nodes[nid], dead)
        if chain is not None:
            return _plan_from_chain(chain)
    return None


def replan_oracle(tree, p, effector):
    """Exhaustive replanning oracle: linear scan + unbounded DFS.

    Returns the minimum depth of a node containing p from which a fully
    valid chain exists, or ``None``.
    """
    dead = set()
    for nid in find_nodes_linear(tree, p, effector):
        chain = _valid_chain(tree, tree.nodes[nid], dead)
        if chain is not None:
            return tree.nodes[nid].depth
    return None
