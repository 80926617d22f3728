"""Scene model: serialization, generators, validation."""

import json

import numpy as np
import pytest

from stepspace import scene as sc
from stepspace.scene import (Effector, SceneFormatError, SceneValidationError,
                             Scene, Surface, instance_from_dict,
                             instance_to_dict, load_instance, save_instance,
                             validate_scene)


def test_effector_parse_and_other():
    assert Effector.parse("left") is Effector.LEFT
    assert Effector.parse("right") is Effector.RIGHT
    assert Effector.LEFT.other is Effector.RIGHT
    assert Effector.RIGHT.other is Effector.LEFT
    with pytest.raises(ValueError):
        Effector.parse("both")


def test_demo_instance_shape():
    inst = sc.demo_two_surface_instance()
    assert inst.scene.m == 2
    assert inst.goal_effector is Effector.LEFT
    assert inst.max_steps == 2
    assert inst.goal_surface_id in inst.scene.by_id


def test_round_trip(tmp_path):
    inst = sc.demo_two_surface_instance()
    path = tmp_path / "demo.json"
    save_instance(inst, path)
    again = load_instance(path)
    assert again.scene.m == inst.scene.m
    assert again.max_steps == inst.max_steps
    assert again.goal_effector is inst.goal_effector
    for s1, s2 in zip(inst.scene.surfaces, again.scene.surfaces):
        assert s1.id == s2.id
        assert np.allclose(np.sort(s1.polygon.vertices, axis=0),
                           np.sort(s2.polygon.vertices, axis=0), atol=1e-12)
    assert np.allclose(np.sort(inst.goal.vertices, axis=0),
                       np.sort(again.goal.vertices, axis=0))


def test_goal_outside_surfaces_rejected():
    data = instance_to_dict(sc.demo_two_surface_instance())
    data["goal"] = {"vertices": [[50.0, 50.0, 0.0]]}
    with pytest.raises(SceneValidationError):
        instance_from_dict(data)


def test_missing_field_diagnostics():
    data = instance_to_dict(sc.demo_two_surface_instance())
    del data["kinematics"]
    with pytest.raises(SceneFormatError):
        instance_from_dict(data)


def test_parse_error_reports_location(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    with pytest.raises(SceneFormatError, match="line"):
        load_instance(path)


def test_inset_applied_unless_preinset():
    inst = sc.demo_two_surface_instance()
    data = instance_to_dict(inst)
    assert data["preinset"] is True
    pre = instance_from_dict(data)
    s0 = pre.scene.surfaces[0].polygon
    assert np.allclose(np.sort(s0.vertices, axis=0),
                       np.sort(inst.scene.surfaces[0].polygon.vertices,
                               axis=0))
    data["preinset"] = False
    data["goal"] = {"vertices": [[0.0, 0.75, 0.0]]}  # clear of the inset
    shrunk = instance_from_dict(data)
    margin = inst.kinematics.inset_margin
    a0 = inst.scene.surfaces[0].polygon.area()
    a1 = shrunk.scene.surfaces[0].polygon.area()
    assert a1 < a0
    assert margin > 0


def test_staircase_generator():
    scene = sc.staircase(steps=4, rise=0.1, run=0.3, width=0.6)
    assert scene.m == 4
    zs = [s.polygon.vertices[0, 2] for s in scene.surfaces]
    assert zs == sorted(zs)
    assert not validate_scene(scene).overlaps


def test_stepping_stones_deterministic():
    a = sc.stepping_stones(3, 4, jitter=0.02, seed=11)
    b = sc.stepping_stones(3, 4, jitter=0.02, seed=11)
    assert a.m == b.m == 12
    for s1, s2 in zip(a.surfaces, b.surfaces):
        assert np.array_equal(s1.polygon.vertices, s2.polygon.vertices)


def test_stepping_stones_keep():
    scene = sc.stepping_stones(5, 5, keep=22)
    assert scene.m == 22


def test_duplicate():
    base = sc.stepping_stones(2, 3)
    scene = sc.duplicate(base, 2, (0.0, 5.0, 0.0))
    assert scene.m == 12
    assert len({s.id for s in scene.surfaces}) == 12
    # cloning a 22-stone scene reproduces the 43/44-surface stress case
    big = sc.duplicate(sc.stepping_stones(5, 5, keep=22), 2, (0.0, 9.0, 0.0))
    assert big.m == 44


def test_generate_scene_dispatch():
    scene = sc.generate_scene("flat_grid", rows=2, cols=2)
    assert scene.m == 4
    with pytest.raises(ValueError):
        sc.generate_scene("escalator")


def test_validate_scene_overlap_and_winding():
    sq = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    s1 = Surface(0, sc.PlanarPolygon(sq))
    s2 = Surface(1, sc.PlanarPolygon(sq))
    report = validate_scene(Scene([s1, s2]))
    assert (0, 1) in report.overlaps
    flipped = Surface(2, sc.PlanarPolygon(sq[::-1]))
    report = validate_scene(Scene([flipped]))
    assert 2 in report.normal_issues


def test_kinematics_antecedent_symmetry():
    kin = sc.default_kinematics()
    for eff in (Effector.LEFT, Effector.RIGHT):
        a = kin.antecedent(eff)
        k = kin.step_reach(eff)
        assert np.allclose(np.sort(a.vertices, axis=0),
                           np.sort(-k.vertices, axis=0))


def test_scene_ids_unique_enforced():
    sq = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    with pytest.raises(SceneValidationError):
        Scene([Surface(0, sc.PlanarPolygon(sq)),
               Surface(0, sc.PlanarPolygon(sq))])


def test_tree_dump_is_line_delimited_json(tmp_path):
    # serialization format check lives here with the other file formats
    from stepspace import build_tree, save_tree
    inst = sc.demo_two_surface_instance()
    tree = build_tree(inst)
    path = tmp_path / "demo.tree"
    save_tree(tree, path)
    lines = path.read_text().strip().splitlines()
    header = json.loads(lines[0])
    assert header["format"] == "feasibility-tree-v1"
    records = [json.loads(line) for line in lines[1:]]
    assert len(records) == tree.total_nodes
    for rec in records:
        for key in ("id", "depth", "effector", "surface_id", "parents",
                    "region"):
            assert key in rec
