"""Backward dynamic program: reach sets, expansion, merging, budgets."""

import numpy as np
import pytest

from stepspace import scene as sc
from stepspace.geometry import (PlanarPolygon, contains, convex_hull,
                                minkowski_sum)
from stepspace.planner import (GOAL_SURFACE, Node, NodeBudgetExceeded,
                               build_tree, feasible_nodes, load_tree,
                               merge_layer, reach_polytope, save_tree)
from stepspace.scene import Effector, demo_two_surface_instance


def point_goal_node(instance):
    region = instance.goal_region()
    return Node(id=0, effector=instance.goal_effector,
                surface_id=GOAL_SURFACE, region=region, parents=(),
                depth=0, yaw=None)


# ---------------------------------------------------------------------------
# reach_polytope

def test_reach_point_goal_is_translated_antecedent(demo_instance):
    node = point_goal_node(demo_instance)
    r = reach_polytope(node, demo_instance)
    goal = demo_instance.goal.vertices[0]
    ant = demo_instance.kinematics.antecedent(Effector.LEFT)
    expect = np.sort(ant.vertices + goal, axis=0)
    assert np.allclose(np.sort(r.vertices, axis=0), expect, atol=1e-12)


def test_reach_square_region_matches_vertex_sum_oracle(demo_instance):
    region = PlanarPolygon([(0, 0, 0), (0.1, 0, 0),
                            (0.1, 0.1, 0), (0, 0.1, 0)])
    node = Node(id=0, effector=Effector.RIGHT, surface_id=GOAL_SURFACE,
                region=region, parents=(), depth=0, yaw=None)
    r = reach_polytope(node, demo_instance)
    ant = demo_instance.kinematics.antecedent(Effector.RIGHT)
    sums = (ant.vertices[:, None, :] + region.vertices[None, :, :])
    oracle = convex_hull(sums.reshape(-1, 3))
    assert np.allclose(np.sort(r.vertices, axis=0),
                       np.sort(oracle.vertices, axis=0), atol=1e-12)


# ---------------------------------------------------------------------------
# feasible_nodes

def test_demo_first_expansion_single_child(demo_instance):
    node = point_goal_node(demo_instance)
    children = feasible_nodes(node, demo_instance)
    assert len(children) == 1
    child = children[0]
    assert child.effector is Effector.RIGHT
    assert child.depth == 1
    surface = demo_instance.scene.by_id[child.surface_id]
    for v in child.region.vertices:
        assert surface.polygon.contains(v, 1e-7)


def test_reach_below_surfaces_gives_no_children(demo_instance):
    region = PlanarPolygon([(0, 0, -50.0)], normal=(0, 0, 1))
    node = Node(id=0, effector=Effector.LEFT, surface_id=GOAL_SURFACE,
                region=region, parents=(), depth=0, yaw=None)
    assert feasible_nodes(node, demo_instance) == []


def test_saturated_surface_child_equals_surface():
    # a single small surface entirely inside the reach volume
    kin = sc.default_kinematics()
    sq = [(-0.05, -0.3, 0), (0.05, -0.3, 0), (0.05, -0.2, 0),
          (-0.05, -0.2, 0)]
    scene = sc.Scene([sc.Surface(0, PlanarPolygon(sq))])
    inst = sc.ProblemInstance(scene, kin, convex_hull([(0.0, -0.25, 0.0)]),
                              Effector.LEFT, 1)
    node = point_goal_node(inst)
    children = feasible_nodes(node, inst)
    assert len(children) == 1
    assert np.allclose(np.sort(children[0].region.vertices, axis=0),
                       np.sort(np.array(sq, dtype=float), axis=0), atol=1e-9)


# ---------------------------------------------------------------------------
# merge_layer

def _node(nid, region, parents, surface=0, eff=Effector.LEFT, depth=1):
    return Node(id=nid, effector=eff, surface_id=surface,
                region=region, parents=tuple(parents), depth=depth, yaw=None)


def test_merge_identical_regions():
    sq = PlanarPolygon([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
    merged = merge_layer([_node(10, sq, [1]), _node(11, sq, [2]),
                          _node(12, sq, [3])])
    assert len(merged) == 1
    assert list(merged[0].parents) == [1, 2, 3]


def test_merge_keeps_distinct_regions():
    a = PlanarPolygon([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
    b = PlanarPolygon([(2, 0, 0), (3, 0, 0), (3, 1, 0), (2, 1, 0)])
    merged = merge_layer([_node(10, a, [1]), _node(11, b, [2])])
    assert len(merged) == 2


def test_merge_respects_effector_and_surface():
    sq = PlanarPolygon([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
    merged = merge_layer([
        _node(10, sq, [1], eff=Effector.LEFT),
        _node(11, sq, [2], eff=Effector.LEFT, surface=1),
    ])
    assert len(merged) == 2


# ---------------------------------------------------------------------------
# build_tree

def test_demo_layer_counts(demo_tree):
    assert demo_tree.stats.layer_counts == [1, 1, 2]
    assert demo_tree.total_nodes == 4


def test_n0_single_node_tree(demo_instance):
    import dataclasses
    inst = dataclasses.replace(demo_instance, max_steps=0)
    tree = build_tree(inst)
    assert tree.stats.layer_counts == [1]
    assert tree.root.surface_id == GOAL_SURFACE


def test_parent_links_and_alternation(stones10_tree):
    for node in stones10_tree.nodes.values():
        for pid in node.parents:
            parent = stones10_tree.nodes[pid]
            assert parent.depth == node.depth - 1
            assert parent.effector is node.effector.other


def test_region_within_surface(stones10_tree):
    inst = stones10_tree.instance
    for node in stones10_tree.nodes.values():
        if node.surface_id == GOAL_SURFACE:
            continue
        surface = inst.scene.by_id[node.surface_id]
        for v in node.region.vertices:
            assert surface.polygon.contains(v, 1e-7)


def test_merge_invariant_no_duplicate_regions(stones10_tree):
    for layer in stones10_tree.layers:
        keys = [n.merge_key() for n in layer]
        assert len(keys) == len(set(keys))


def test_stop_at_halts_early(stones10_instance):
    goal = stones10_instance.goal.vertices[0]
    tree = build_tree(stones10_instance,
                      stop_at=(goal, stones10_instance.goal_effector))
    assert len(tree.layers) <= 1 + 1  # goal node contains the point


def test_node_budget_abort():
    inst = sc.demo_two_surface_instance(max_steps=50)
    with pytest.raises(NodeBudgetExceeded) as info:
        build_tree(inst, merge=False, node_budget=100)
    partial = info.value.tree
    assert partial.total_nodes >= 100
    assert partial.stats.budget_hit


def test_node_budget_env_override(monkeypatch):
    inst = sc.demo_two_surface_instance(max_steps=50)
    monkeypatch.setenv("NAS_NODE_BUDGET", "100")
    with pytest.raises(NodeBudgetExceeded):
        build_tree(inst, merge=False)


def test_determinism(stones10_instance):
    t1 = build_tree(stones10_instance)
    t2 = build_tree(stones10_instance)
    assert t1.stats.layer_counts == t2.stats.layer_counts
    for n1, n2 in zip(t1.nodes.values(), t2.nodes.values()):
        assert n1.id == n2.id
        assert n1.parents == n2.parents
        assert np.array_equal(n1.region.vertices, n2.region.vertices)


def test_yaw_zero_matches_plain_expansion(demo_instance):
    import dataclasses
    inst = dataclasses.replace(demo_instance, yaw_options=[0.0])
    plain = build_tree(demo_instance)
    yawed = build_tree(inst)
    assert plain.stats.layer_counts == yawed.stats.layer_counts
    for n1, n2 in zip(plain.nodes.values(), yawed.nodes.values()):
        assert np.allclose(np.sort(n1.region.vertices, axis=0),
                           np.sort(n2.region.vertices, axis=0), atol=1e-9)


def test_yaw_symmetric_antecedent_pi_merges():
    # with a centrally symmetric reach set, theta=0 and theta=pi coincide
    import dataclasses
    kin = sc.KinematicModel(
        convex_hull(sc._box_corners((-0.4, -0.6, -0.3), (0.4, 0.6, 0.3))),
        convex_hull(sc._box_corners((-0.4, -0.6, -0.3), (0.4, 0.6, 0.3))),
        (0.05, 0.05))
    base = sc.demo_two_surface_instance()
    inst = sc.ProblemInstance(base.scene, kin, base.goal, base.goal_effector,
                              2, yaw_options=None)
    inst_yaw = dataclasses.replace(inst, yaw_options=[0.0, np.pi])
    plain = build_tree(inst)
    yawed = build_tree(inst_yaw)
    # each (region) appears once per yaw index, never more
    for layer_p, layer_y in zip(plain.layers[1:], yawed.layers[1:]):
        regions_p = {n.region.canonical_key() for n in layer_p}
        regions_y = {n.region.canonical_key() for n in layer_y}
        assert regions_p == regions_y
        assert len(layer_y) <= 2 * len(layer_p)


def test_tree_roundtrip(tmp_path, stones10_tree):
    path = tmp_path / "tree.jsonl"
    save_tree(stones10_tree, path)
    again = load_tree(path)
    assert again.total_nodes == stones10_tree.total_nodes
    assert again.stats.layer_counts == stones10_tree.stats.layer_counts
    for nid, node in stones10_tree.nodes.items():
        other = again.nodes[nid]
        assert other.surface_id == node.surface_id
        assert other.parents == node.parents
        assert other.effector is node.effector
        assert np.allclose(other.region.vertices, node.region.vertices,
                           atol=1e-12)
