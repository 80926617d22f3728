"""Top-view rendering of scenes, feasible regions, and footstep plans.

All figures are drawn as orthographic projections onto the x-y plane
with matplotlib's Agg backend, so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon as MplPolygon  # noqa: E402
import numpy as np  # noqa: E402


def _add_polygon(ax, vertices, **kwargs):
    pts = np.asarray(vertices, dtype=float)[:, :2]
    if len(pts) >= 3:
        ax.add_patch(MplPolygon(pts, closed=True, **kwargs))
    elif len(pts) == 2:
        ax.plot(pts[:, 0], pts[:, 1], color=kwargs.get("edgecolor", "k"),
                lw=kwargs.get("linewidth", 1.5))
    else:
        ax.plot(pts[:, 0], pts[:, 1], marker=".", ms=6,
                color=kwargs.get("edgecolor", "k"))


def draw_scene(ax, scene, facecolor="0.85", edgecolor="0.4"):
    for surface in scene.surfaces:
        _add_polygon(ax, surface.polygon.vertices, facecolor=facecolor,
                     edgecolor=edgecolor, linewidth=0.8, zorder=1)


def draw_tree(ax, tree, max_depth=None, alpha=0.35):
    """Feasible regions colored by depth (near the goal = dark)."""
    depths = list(range(len(tree.layers)))
    if max_depth is not None:
        depths = [d for d in depths if d <= max_depth]
    if not depths:
        return
    cmap = plt.get_cmap("viridis")
    top = max(depths) or 1
    for depth in reversed(depths):
        color = cmap(1.0 - depth / top)
        for node in tree.layers[depth]:
            if not node.valid:
                continue
            _add_polygon(ax, node.region.vertices, facecolor=color,
                         edgecolor="none", alpha=alpha, zorder=2)


def draw_plan(ax, positions, start=None):
    pts = np.asarray(positions, dtype=float)
    ax.plot(pts[:, 0], pts[:, 1], "-", color="k", lw=1.0, zorder=4)
    for i, p in enumerate(pts):
        marker = "o" if i % 2 == 0 else "s"
        ax.plot(p[0], p[1], marker, color="crimson", ms=6, zorder=5)
    if start is not None:
        ax.plot(start[0], start[1], "*", color="navy", ms=12, zorder=6)


def render_tree_figure(tree, path, plan_positions=None, start=None,
                       title=None):
    """Scene + tree (+ optional footstep sequence) saved to `path`."""
    fig, ax = plt.subplots(figsize=(7, 7))
    draw_scene(ax, tree.instance.scene)
    draw_tree(ax, tree)
    goal = tree.instance.goal_region()
    _add_polygon(ax, goal.vertices, facecolor="none", edgecolor="crimson",
                 linewidth=1.6, zorder=3)
    if plan_positions is not None and len(plan_positions):
        draw_plan(ax, plan_positions, start=start)
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
