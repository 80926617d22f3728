"""Environment, robot constraints, and problem-instance model.

A problem instance bundles the contact surfaces, the (linearised)
kinematic reach polytopes of the two feet, a goal set on one of the
surfaces, and a step budget. Instances round-trip through a JSON file
whose field names are normative (see ``save_instance``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    PlanarPolygon,
    Polytope,
    central_symmetry,
    clip_polygon_by_polytope,
    convex_hull,
    inset_polygon,
)


class Effector(enum.IntEnum):
    LEFT = 0
    RIGHT = 1

    @property
    def other(self):
        return Effector.RIGHT if self is Effector.LEFT else Effector.LEFT

    @property
    def label(self):
        return "left" if self is Effector.LEFT else "right"

    @classmethod
    def parse(cls, text):
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise ValueError(f"unknown effector {text!r}") from None


class SceneFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


class SceneValidationError(ValueError):
    """Raised when a parsed instance violates a model invariant."""


@dataclass(frozen=True)
class Surface:
    """One planar convex contact surface of the environment."""

    id: int
    polygon: PlanarPolygon

    @property
    def normal(self):
        return self.polygon.normal

    def translated(self, t):
        return Surface(self.id, self.polygon.translated(t))


class Scene:
    """Union of disjoint convex contact surfaces."""

    def __init__(self, surfaces):
        ids = [s.id for s in surfaces]
        if len(set(ids)) != len(ids):
            raise SceneValidationError("surface ids are not unique")
        self.surfaces = list(surfaces)
        self.by_id = {s.id: s for s in surfaces}
        if surfaces:
            self._bbox_min = np.array([s.polygon.bbox[0] for s in surfaces])
            self._bbox_max = np.array([s.polygon.bbox[1] for s in surfaces])
        else:
            self._bbox_min = np.zeros((0, 3))
            self._bbox_max = np.zeros((0, 3))

    @property
    def m(self):
        return len(self.surfaces)

    def candidates_in_box(self, lo, hi, pad=1e-9):
        """Surface indices whose bounding box meets [lo, hi]."""
        hit = np.all(self._bbox_min <= hi + pad, axis=1) \
            & np.all(self._bbox_max >= lo - pad, axis=1)
        return np.flatnonzero(hit)

    def surface_containing(self, p, eps=1e-9):
        for s in self.surfaces:
            if s.polygon.contains(p, eps):
                return s
        return None


class KinematicModel:
    """Linearised foot-reach constraints of the robot.

    ``reach_left_given_right`` is the polytope of reachable left-foot
    positions with the right foot at the origin (and symmetrically for
    ``reach_right_given_left``). Antecedent sets are the central-symmetric
    images: the antecedent of effector e is the set of positions of the
    other foot from which e can step onto the origin.
    """

    def __init__(self, reach_left_given_right, reach_right_given_left,
                 foot_half_extents=(0.05, 0.05)):
        self.reach_left_given_right = reach_left_given_right
        self.reach_right_given_left = reach_right_given_left
        self.foot_half_extents = tuple(float(x) for x in foot_half_extents)
        for name, poly in (("reach_left_given_right", reach_left_given_right),
                           ("reach_right_given_left", reach_right_given_left)):
            if poly.dim != 3:
                raise SceneValidationError(
                    f"{name} must be full-dimensional (dim 3), got {poly.dim}")
        self._antecedent = {
            Effector.LEFT: central_symmetry(reach_left_given_right),
            Effector.RIGHT: central_symmetry(reach_right_given_left),
        }
        # Self-consistency: antecedents are the symmetric images of the
        # reach sets (vertex-set equality).
        for eff, src in ((Effector.LEFT, reach_left_given_right),
                         (Effector.RIGHT, reach_right_given_left)):
            ant = self._antecedent[eff]
            if central_symmetry(ant).canonical_key() != src.canonical_key():
                raise SceneValidationError("antecedent symmetry check failed")

    def antecedent(self, effector):
        """Positions of the other foot from which ``effector`` reaches 0."""
        return self._antecedent[Effector(effector)]

    def step_reach(self, moving_effector):
        """Reach polytope of the moving foot relative to the stance foot."""
        if Effector(moving_effector) is Effector.LEFT:
            return self.reach_left_given_right
        return self.reach_right_given_left

    @property
    def inset_margin(self):
        return max(self.foot_half_extents)


@dataclass
class ProblemInstance:
    scene: Scene
    kinematics: KinematicModel
    goal: Polytope
    goal_effector: Effector
    max_steps: int
    yaw_options: list[float] | None = None
    goal_surface_id: int = field(default=-1)

    def __post_init__(self):
        if self.max_steps < 0:
            raise SceneValidationError("max_steps must be >= 0")
        sid = _find_goal_surface(self.scene, self.goal)
        if sid is None:
            raise SceneValidationError(
                "goal is not contained in any contact surface")
        object.__setattr__(self, "goal_surface_id", sid)

    @property
    def goal_surface(self):
        return self.scene.by_id[self.goal_surface_id]

    def goal_region(self):
        """The goal set as a planar polygon on its surface's plane."""
        return PlanarPolygon(self.goal.vertices,
                             normal=self.goal_surface.normal)


def _find_goal_surface(scene, goal):
    for s in scene.surfaces:
        if all(s.polygon.contains(v, 1e-7) for v in goal.vertices):
            return s.id
    return None


# ---------------------------------------------------------------------------
# Serialization

def _polygon_from_vertices(verts, where):
    verts = np.asarray(verts, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 3:
        raise SceneFormatError(f"{where}: expected >= 3 vertices of [x, y, z]")
    try:
        return PlanarPolygon(verts)
    except ValueError as exc:
        raise SceneValidationError(f"{where}: {exc}") from exc


def instance_from_dict(data, path="<dict>"):
    try:
        raw_surfaces = data["surfaces"]
        kin = data["kinematics"]
        goal_verts = data["goal"]["vertices"]
        goal_eff = data["goal_effector"]
        max_steps = int(data["max_steps"])
    except (KeyError, TypeError) as exc:
        raise SceneFormatError(f"{path}: missing field {exc}") from exc

    kinematics = KinematicModel(
        convex_hull(kin["reach_left_given_right"]),
        convex_hull(kin["reach_right_given_left"]),
        tuple(kin.get("foot_half_extents", (0.05, 0.05))),
    )

    surfaces = []
    preinset = bool(data.get("preinset", False))
    margin = 0.0 if preinset else kinematics.inset_margin
    for i, s in enumerate(raw_surfaces):
        where = f"{path}: surfaces[{i}]"
        try:
            sid = int(s["id"])
        except (KeyError, TypeError) as exc:
            raise SceneFormatError(f"{where}: missing id") from exc
        polygon = _polygon_from_vertices(s["vertices"], where)
        if margin > 0:
            polygon = inset_polygon(polygon, margin)
            if polygon is None:
                continue  # fully consumed by the safety inset
        surfaces.append(Surface(sid, polygon))
    scene = Scene(surfaces)

    goal = convex_hull(goal_verts)
    yaw = None
    if data.get("yaw_angles_deg") is not None:
        yaw = [np.deg2rad(float(a)) for a in data["yaw_angles_deg"]]
    return ProblemInstance(scene, kinematics, goal, Effector.parse(goal_eff),
                           max_steps, yaw)


def instance_to_dict(instance):
    kin = instance.kinematics
    data = {
        "surfaces": [
            {"id": s.id, "vertices": s.polygon.vertices.tolist()}
            for s in instance.scene.surfaces
        ],
        "kinematics": {
            "reach_left_given_right":
                kin.reach_left_given_right.vertices.tolist(),
            "reach_right_given_left":
                kin.reach_right_given_left.vertices.tolist(),
            "foot_half_extents": list(kin.foot_half_extents),
        },
        "goal": {"vertices": instance.goal.vertices.tolist()},
        "goal_effector": instance.goal_effector.label,
        "max_steps": instance.max_steps,
        "preinset": True,  # stored surfaces already carry the safety inset
    }
    if instance.yaw_options is not None:
        data["yaw_angles_deg"] = [float(np.rad2deg(a))
                                  for a in instance.yaw_options]
    return data


def load_instance(path):
    """Load and validate a problem instance from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(
                f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}"
            ) from exc
    return instance_from_dict(data, str(path))


def save_instance(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Scene validation report

@dataclass
class SceneReport:
    overlaps: list[tuple[int, int]] = field(default_factory=list)
    degenerate: list[int] = field(default_factory=list)
    normal_issues: list[int] = field(default_factory=list)

    @property
    def clean(self):
        return not (self.overlaps or self.degenerate or self.normal_issues)

    def summary(self):
        if self.clean:
            return "scene OK"
        parts = []
        if self.overlaps:
            parts.append(f"overlapping pairs: {self.overlaps}")
        if self.degenerate:
            parts.append(f"degenerate surfaces: {self.degenerate}")
        if self.normal_issues:
            parts.append(f"normal/winding issues: {self.normal_issues}")
        return "; ".join(parts)


def validate_scene(scene):
    """Report-only check of scene invariants (never raises)."""
    report = SceneReport()
    for s in scene.surfaces:
        if s.polygon.area() <= 1e-10:
            report.degenerate.append(s.id)
        # Contact surfaces must face upward; a downward normal indicates
        # a reversed vertex winding in the input.
        if s.normal[2] <= 0:
            report.normal_issues.append(s.id)
    for i, a in enumerate(scene.surfaces):
        for b in scene.surfaces[i + 1:]:
            lo_a, hi_a = a.polygon.bbox
            lo_b, hi_b = b.polygon.bbox
            if np.any(lo_a > hi_b + 1e-9) or np.any(lo_b > hi_a + 1e-9):
                continue
            coplanar = (abs(abs(a.normal @ b.normal) - 1.0) <= 1e-9
                        and abs(a.polygon.offset - b.polygon.offset) <= 1e-9)
            if not coplanar:
                continue
            poly_b = Polytope(b.polygon.vertices, 2)
            hit = clip_polygon_by_polytope(a.polygon, poly_b)
            if hit is not None and hit.area() > 1e-10:
                report.overlaps.append((a.id, b.id))
    return report


# ---------------------------------------------------------------------------
# Procedural generators

def _rect(cx, cy, z, hx, hy, sid):
    verts = np.array([
        [cx - hx, cy - hy, z],
        [cx + hx, cy - hy, z],
        [cx + hx, cy + hy, z],
        [cx - hx, cy + hy, z],
    ])
    return Surface(sid, PlanarPolygon(verts, normal=[0.0, 0.0, 1.0]))


def staircase(steps=4, rise=0.1, run=0.3, width=0.6, gap=0.02):
    """Disjoint rectangular steps climbing along +x."""
    if steps < 1 or run <= gap or width <= 0:
        raise ValueError("invalid staircase parameters")
    surfaces = []
    for i in range(steps):
        cx = i * run + (run - gap) / 2.0
        surfaces.append(_rect(cx, 0.0, i * rise,
                              (run - gap) / 2.0, width / 2.0, i))
    return Scene(surfaces)


def flat_grid(rows=3, cols=3, tile=0.3, gap=0.1):
    """Flat grid of square tiles separated by gaps."""
    if rows < 1 or cols < 1 or tile <= 0 or gap < 0:
        raise ValueError("invalid flat_grid parameters")
    pitch = tile + gap
    surfaces = []
    for r in range(rows):
        for c in range(cols):
            surfaces.append(_rect(c * pitch, r * pitch, 0.0,
                                  tile / 2.0, tile / 2.0, r * cols + c))
    return Scene(surfaces)


def stepping_stones(rows=3, cols=3, pitch=0.56, size=0.28, jitter=0.0,
                    seed=0, keep=None):
    """Grid of square stones with optional deterministic jitter.

    ``keep`` limits the scene to that many stones, dropping the ones
    farthest from the grid center.
    """
    if rows < 1 or cols < 1 or size <= 0 or pitch <= 0:
        raise ValueError("invalid stepping_stones parameters")
    rng = np.random.default_rng(seed)
    centers = []
    for r in range(rows):
        for c in range(cols):
            dx, dy = (rng.uniform(-jitter, jitter, size=2) if jitter > 0
                      else (0.0, 0.0))
            centers.append((c * pitch + dx, r * pitch + dy))
    if keep is not None and keep < len(centers):
        mid = np.mean(centers, axis=0)
        order = np.argsort([np.hypot(x - mid[0], y - mid[1])
                            for x, y in centers], kind="stable")
        centers = [centers[i] for i in sorted(order[:keep])]
    return Scene([_rect(x, y, 0.0, size / 2.0, size / 2.0, i)
                  for i, (x, y) in enumerate(centers)])


def duplicate(scene, copies, offset):
    """Tile ``copies`` translated copies of a scene (the original included)."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    offset = np.asarray(offset, dtype=float)
    surfaces = list(scene.surfaces)
    next_id = max(s.id for s in surfaces) + 1 if surfaces else 0
    for k in range(1, copies):
        for s in scene.surfaces:
            surfaces.append(Surface(next_id, s.polygon.translated(k * offset)))
            next_id += 1
    return Scene(surfaces)


def generate_scene(kind, **params):
    """Dispatch procedural scene generation by kind name."""
    generators = {
        "staircase": staircase,
        "stepping_stones": stepping_stones,
        "flat_grid": flat_grid,
    }
    if kind == "duplicate":
        return duplicate(**params)
    if kind not in generators:
        raise ValueError(f"unknown scene kind {kind!r}")
    return generators[kind](**params)


# ---------------------------------------------------------------------------
# Ready-made models

def default_kinematics():
    """Synthetic biped reach model used by the generated scenes.

    These are plausible desk-scale boxes, not measured robot data. The
    left-foot box is shifted slightly toward +y and the right-foot box
    toward -y.
    """
    left = convex_hull(_box_corners([-0.65, -0.58, -0.35],
                                    [0.65, 0.66, 0.35]))
    right = convex_hull(_box_corners([-0.65, -0.66, -0.35],
                                     [0.65, 0.58, 0.35]))
    return KinematicModel(left, right, foot_half_extents=(0.06, 0.06))


def narrow_kinematics():
    """Stricter reach model where feet cannot cross: left stays on +y."""
    left = convex_hull(_box_corners([-0.35, 0.1, -0.3], [0.35, 0.5, 0.3]))
    right = convex_hull(_box_corners([-0.35, -0.5, -0.3], [0.35, -0.1, 0.3]))
    return KinematicModel(left, right, foot_half_extents=(0.05, 0.05))


def _box_corners(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    corners = []
    for i in range(8):
        corners.append([hi[0] if i & 1 else lo[0],
                        hi[1] if i & 2 else lo[1],
                        hi[2] if i & 4 else lo[2]])
    return np.array(corners)


def inset_scene(scene, kinematics):
    """Apply the foot-safety inset to every surface of a raw scene."""
    margin = kinematics.inset_margin
    out = []
    for s in scene.surfaces:
        polygon = inset_polygon(s.polygon, margin)
        if polygon is not None:
            out.append(Surface(s.id, polygon))
    return Scene(out)


def make_instance(scene, kinematics, goal_vertices, max_steps,
                  goal_effector=Effector.LEFT, yaw_options=None):
    """Assemble an instance from an already-inset scene."""
    return ProblemInstance(scene, kinematics, convex_hull(goal_vertices),
                           goal_effector, max_steps, yaw_options)


def demo_two_surface_instance(max_steps=2):
    """Tiny two-surface scenario with a point goal for the left foot.

    Geometry is arranged so that the one-step feasible set lives on the
    lower surface only and the two-step set splits across both surfaces.
    """
    kin = narrow_kinematics()
    s0 = PlanarPolygon(np.array([
        [-0.55, -0.45, 0.0], [0.55, -0.45, 0.0],
        [0.55, 0.25, 0.0], [-0.55, 0.25, 0.0]]), normal=[0, 0, 1])
    s1 = PlanarPolygon(np.array([
        [-0.55, 0.55, 0.0], [0.55, 0.55, 0.0],
        [0.55, 0.95, 0.0], [-0.55, 0.95, 0.0]]), normal=[0, 0, 1])
    scene = Scene([Surface(0, s0), Surface(1, s1)])
    return make_instance(scene, kin, [[0.0, 0.57, 0.0]], max_steps)
