"""Exact footstep placement along a surface plan.

Builds the convex program over X = [p_1 .. p_nhor]: each step position
must lie on its plan region (plane equality + edge half-spaces) and be
reachable from the previous position (relative H-rep constraint on
p_i - p_{i-1}, rotated to the target surface's normal). Plane equalities
are eliminated by reparametrizing each p_i in its region's 2D frame, so
the solver only sees inequalities.
"""

from __future__ import annotations

import time
import enum
from dataclasses import dataclass

import numpy as np

from .geometry import chebyshev_center, rotation_to_normal
from .qp import phase1, solve_qp

EPS_QP = 1e-8
MARGINAL_VIOLATION = 1e-6


class Objective(enum.Enum):
    FEASIBILITY = "feasibility"
    MIN_SUM_SQUARED_STEP_LENGTHS = "minsq"

    @classmethod
    def parse(cls, text):
        for obj in cls:
            if text in (obj.value, obj.name.lower()):
                return obj
        raise ValueError(f"unknown objective {text!r}")


@dataclass
class FootstepProblem:
    p0: np.ndarray
    n_hor: int
    objective: Objective
    # Reduced variables z (concatenated per-step frame coordinates).
    var_slices: list[slice]
    frames: list[tuple]          # (origin, axes or None) per step
    A_in: np.ndarray             # inequality rows over z
    b_in: np.ndarray
    anchors: np.ndarray          # per-step anchor points (Chebyshev centers)

    @property
    def num_vars(self):
        return self.A_in.shape[1]

    def positions_from(self, z):
        out = np.empty((self.n_hor, 3))
        for i, (sl, (origin, axes)) in enumerate(zip(self.var_slices,
                                                     self.frames)):
            if axes is None:
                out[i] = origin
            else:
                out[i] = origin + axes @ z[sl]
        return out

    def anchor_vars(self):
        z = np.zeros(self.num_vars)
        for i, (sl, (origin, axes)) in enumerate(zip(self.var_slices,
                                                     self.frames)):
            if axes is not None:
                z[sl] = axes.T @ (self.anchors[i] - origin)
        return z

    def max_violation(self, positions):
        """Constraint check independent of the solver path."""
        worst = 0.0
        prev = self.p0
        for i, (p, (origin, axes)) in enumerate(zip(positions, self.frames)):
            rows, rhs, plane = self._step_raw[i]
            worst = max(worst, float(np.abs(plane[0] @ p - plane[1]).max()))
            if len(rows[0]):
                worst = max(worst, float(np.max(rows[0] @ p - rhs[0])))
            reach_a, reach_b = self._reach_raw[i]
            worst = max(worst,
                        float(np.max(reach_a @ (p - prev) - reach_b)))
            prev = p
        return worst


class PlanPreconditionError(ValueError):
    """Raised when p0 or the horizon violates the problem preconditions."""


def _region_step_data(region):
    """Frame, in-frame edge inequalities, and raw 3D constraint data."""
    v = region.vertices
    if len(v) == 1:
        # Point region: the position is pinned outright; the "plane"
        # rows of the violation check pin all three coordinates.
        raw = ((np.zeros((0, 3)),), (np.zeros(0),))
        plane = (np.eye(3), v[0].copy())
        return v[0], None, np.zeros((0, 0)), np.zeros(0), raw, plane
    if len(v) == 2:
        d = v[1] - v[0]
        length = np.linalg.norm(d)
        axes = (d / length)[:, None]
        rows2 = np.array([[-1.0], [1.0]])
        rhs2 = np.array([0.0, length])
        a3 = np.vstack([-axes.T, axes.T])
        b3 = np.array([-(axes[:, 0] @ v[0]), axes[:, 0] @ v[1]])
        s = np.cross(region.normal, axes[:, 0])
        plane_rows = np.vstack([region.normal, s])
        plane_rhs = np.array([region.offset, s @ v[0]])
        return v[0], axes, rows2, rhs2, ((a3,), (b3,)), (plane_rows, plane_rhs)
    a3, b3 = region.edge_halfspaces()
    origin = region.origin
    axes = region.axes
    rows2 = a3 @ axes
    rhs2 = b3 - a3 @ origin
    plane = (region.normal[None, :], np.array([region.offset]))
    return origin, axes, rows2, rhs2, ((a3,), (b3,)), plane


def assemble_problem(plan, p0, n_hor, objective, kinematics):
    """Build the footstep program for the first ``n_hor`` steps of a plan."""
    k = plan.length
    if not 1 <= n_hor <= k:
        raise PlanPreconditionError(f"horizon {n_hor} outside [1, {k}]")
    p0 = np.asarray(p0, dtype=float)
    if not plan.entries[0].region.contains(p0, 1e-7):
        raise PlanPreconditionError("start position outside the plan's "
                                    "top node region")
    objective = (objective if isinstance(objective, Objective)
                 else Objective.parse(objective))
    effectors = plan.effectors()

    var_slices = []
    frames = []
    anchors = []
    step_raw = []
    reach_raw = []
    blocks = []   # (rows over z, rhs)
    offset = 0
    for i in range(1, n_hor + 1):
        region = plan.entries[i].region
        origin, axes, rows2, rhs2, raw, plane = _region_step_data(region)
        width = 0 if axes is None else axes.shape[1]
        var_slices.append(slice(offset, offset + width))
        offset += width
        frames.append((origin, axes))
        anchors.append(chebyshev_center(region))
        step_raw.append((raw[0], raw[1], plane))

        # Reachability of the moving foot from the previous stance,
        # rotated to the target region's surface normal.
        reach = kinematics.step_reach(effectors[i])
        a_k, b_k = reach.facets()
        rot = rotation_to_normal(region.normal)
        a_rot = a_k @ rot.T
        reach_raw.append((a_rot, b_k))
        blocks.append((i, rows2, rhs2, a_rot, b_k))

    num_vars = offset
    rows_out = []
    rhs_out = []
    for (i, rows2, rhs2, a_rot, b_k) in blocks:
        sl_i = var_slices[i - 1]
        o_i, ax_i = frames[i - 1]
        # Region edge constraints (in the step's own frame).
        if len(rows2) and rows2.shape[1] > 0:
            block = np.zeros((len(rows2), num_vars))
            block[:, sl_i] = rows2
            rows_out.append(block)
            rhs_out.append(rhs2)
        # Reach constraint a . (p_i - p_{i-1}) <= b.
        block = np.zeros((len(b_k), num_vars))
        rhs = b_k.copy()
        if ax_i is not None:
            block[:, sl_i] = a_rot @ ax_i
        rhs -= a_rot @ o_i
        if i == 1:
            rhs += a_rot @ p0
        else:
            o_p, ax_p = frames[i - 2]
            sl_p = var_slices[i - 2]
            if ax_p is not None:
                block[:, sl_p] -= a_rot @ ax_p
            rhs += a_rot @ o_p
        rows_out.append(block)
        rhs_out.append(rhs)

    A_in = (np.vstack(rows_out) if rows_out
            else np.zeros((0, num_vars)))
    b_in = (np.concatenate(rhs_out) if rhs_out else np.zeros(0))
    # Normalize rows for conditioning and meaningful violation magnitudes.
    norms = np.linalg.norm(A_in, axis=1)
    keep = norms > 1e-14
    scale = np.where(keep, norms, 1.0)
    A_in = A_in / scale[:, None]
    b_in = b_in / scale

    problem = FootstepProblem(
        p0=p0, n_hor=n_hor, objective=objective,
        var_slices=var_slices, frames=frames,
        A_in=A_in, b_in=b_in, anchors=np.array(anchors),
    )
    problem._step_raw = step_raw
    problem._reach_raw = reach_raw
    return problem


@dataclass
class FootstepPlan:
    positions: np.ndarray
    objective_value: float
    status: str                 # feasible | marginal | infeasible
    max_violation: float
    solve_time_s: float
    iterations: int = 0

    @property
    def feasible(self):
        return self.status == "feasible"


def solve(problem):
    """Solve a footstep program; deterministic for a given problem."""
    t0 = time.perf_counter()
    z0 = problem.anchor_vars()
    z_f, _ = phase1(problem.A_in, problem.b_in, z0)
    iterations = 0

    if problem.objective is Objective.MIN_SUM_SQUARED_STEP_LENGTHS:
        z_f, iterations = _solve_quadratic(problem, z_f)

    positions = problem.positions_from(z_f)
    violation = problem.max_violation(positions)
    if violation <= EPS_QP:
        status = "feasible"
    elif violation <= MARGINAL_VIOLATION:
        status = "marginal"
    else:
        status = "infeasible"

    prev = np.vstack([problem.p0[None, :], positions[:-1]])
    obj = float(np.sum((positions - prev) ** 2))
    return FootstepPlan(
        positions=positions,
        objective_value=obj,
        status=status,
        max_violation=violation,
        solve_time_s=time.perf_counter() - t0,
        iterations=iterations,
    )


def _solve_quadratic(problem, z_feasible):
    """Minimize the sum of squared step lengths from a feasible point."""
    n = problem.num_vars
    # positions = M z + c (affine); build the difference operator.
    M = np.zeros((3 * problem.n_hor, n))
    c = np.zeros(3 * problem.n_hor)
    for i, (sl, (origin, axes)) in enumerate(zip(problem.var_slices,
                                                 problem.frames)):
        c[3 * i:3 * i + 3] = origin
        if axes is not None:
            M[3 * i:3 * i + 3, sl] = axes
    D = np.eye(3 * problem.n_hor)
    for i in range(1, problem.n_hor):
        D[3 * i:3 * i + 3, 3 * (i - 1):3 * (i - 1) + 3] = -np.eye(3)
    r = np.zeros(3 * problem.n_hor)
    r[:3] = problem.p0

    DM = D @ M
    H = 2.0 * DM.T @ DM
    g = 2.0 * DM.T @ (D @ c - r)
    # Tiny ridge keeps H PD when a step region pins coordinates.
    H += 1e-12 * np.eye(n)
    z, _, iters = solve_qp(H, g, problem.A_in, problem.b_in, z_feasible)
    return z, iters
