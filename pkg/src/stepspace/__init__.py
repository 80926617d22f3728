"""Feasible-space contact planning over convex surface polygons.

The toolkit builds, for an n-step bipedal contact-planning problem, the
complete tree of convex feasible regions reachable from a goal stance,
then answers real-time queries against it: which regions contain a
candidate foot position, what surface sequence leads to the goal, and
where exactly to step (a convex footstep program over the sequence).
"""

from .footstep import (FootstepPlan, FootstepProblem, Objective,
                       PlanPreconditionError, assemble_problem, solve)
from .geometry import (PlanarPolygon, Polytope, central_symmetry,
                       chebyshev_center, clip_polygon_by_polytope,
                       contains, convex_hull, inset_polygon, minkowski_sum,
                       rotation_to_normal, translate)
from .planner import (FeasibilityTree, Node, NodeBudgetExceeded, build_tree,
                      load_tree, reach_polytope, save_tree)
from .query import (NoValidChainError, SurfacePlan, build_index,
                    extract_plan, find_nodes, invalidate_surface, replan)
from .scene import (Effector, KinematicModel, ProblemInstance, Scene,
                    SceneFormatError, SceneValidationError, Surface,
                    default_kinematics, demo_two_surface_instance,
                    generate_scene, inset_scene, load_instance,
                    make_instance, save_instance, validate_scene)

__version__ = "0.1.0"

__all__ = [
    "Effector", "FeasibilityTree", "FootstepPlan", "FootstepProblem",
    "KinematicModel", "NoValidChainError", "Node", "NodeBudgetExceeded",
    "Objective", "PlanPreconditionError", "PlanarPolygon", "Polytope",
    "ProblemInstance", "Scene", "SceneFormatError", "SceneValidationError",
    "Surface", "SurfacePlan", "assemble_problem", "build_index",
    "build_tree", "central_symmetry", "chebyshev_center",
    "clip_polygon_by_polytope", "contains", "convex_hull",
    "default_kinematics", "demo_two_surface_instance", "extract_plan",
    "find_nodes", "generate_scene", "inset_polygon", "inset_scene",
    "invalidate_surface", "load_instance", "load_tree", "make_instance",
    "minkowski_sum", "reach_polytope", "replan", "rotation_to_normal",
    "save_instance", "save_tree", "solve", "translate", "validate_scene",
]
