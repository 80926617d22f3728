"""Convex polytope and planar polygon primitives.

Everything here operates on plain numpy arrays of 3D points (meters).
The two central types are:

- ``Polytope``: an unordered set of extreme vertices (V-rep) with a
  lazily derived half-space form (H-rep) when full-dimensional.
- ``PlanarPolygon``: a convex 2D polygon embedded in a 3D plane, with a
  cached in-plane frame used for clipping.

All values are immutable after construction; every operation is a pure
function, so concurrent use is safe.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull as _QhullConvexHull
from scipy.spatial import QhullError
from scipy.optimize import linprog

# Coplanarity / containment tolerance (meters). Double precision at meter
# scale leaves ~7 orders of margin below this.
EPS_GEO = 1e-9
# Clipped polygons with area below this (m^2) are treated as empty.
EPS_AREA = 1e-12
# Vertices are rounded to this many decimals for canonical equality keys.
CANONICAL_DECIMALS = 9

_Z = np.array([0.0, 0.0, 1.0])


def _check_finite(points):
    if not np.all(np.isfinite(points)):
        raise ValueError("non-finite coordinates in input points")


def _affine_frame(points, tol=1e-9):
    """Affine dimension of a point cloud plus an orthonormal basis.

    Returns (origin, basis, dim) where basis has shape (3, dim).
    """
    origin = points.mean(axis=0)
    centered = points - origin
    if len(points) == 1:
        return origin, np.zeros((3, 0)), 0
    # Singular values measure extent along principal directions.
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(1.0, s[0]) if len(s) else 1.0
    dim = int(np.sum(s > tol * scale))
    return origin, vt[:dim].T, dim


class Polytope:
    """Convex set given by its extreme vertices.

    Use :func:`convex_hull` to build one from an arbitrary point set; the
    constructor trusts its input (vertices must already be extreme).
    """

    __slots__ = ("vertices", "dim", "_facets", "_plane", "_ring")

    def __init__(self, vertices, dim):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.vertices.setflags(write=False)
        self.dim = int(dim)
        self._facets = None
        self._plane = None
        self._ring = None

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"Polytope(dim={self.dim}, vertices={len(self.vertices)})"

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def facets(self):
        """H-rep as (A, b) with A @ x <= b, unit row normals.

        Only defined for full-dimensional (dim == 3) polytopes.
        """
        if self.dim != 3:
            raise ValueError(f"H-rep requires affine dimension 3, got {self.dim}")
        if self._facets is None:
            hull = _hull_3d(self.vertices)
            eqs = hull.equations  # rows: (a, c) with a.x + c <= 0
            # Coplanar simplices produce duplicate equations; merge them.
            eqs = np.unique(np.round(eqs, 8), axis=0)
            self._facets = (eqs[:, :3].copy(), -eqs[:, 3].copy())
        return self._facets

    def plane(self):
        """(unit normal, offset) of the supporting plane for dim == 2."""
        if self.dim != 2:
            raise ValueError("plane() requires affine dimension 2")
        if self._plane is None:
            origin, basis, _ = _affine_frame(self.vertices)
            n = np.cross(basis[:, 0], basis[:, 1])
            n /= np.linalg.norm(n)
            if n[2] < 0:
                n = -n
            self._plane = (n, float(n @ origin))
        return self._plane

    def ring(self):
        """Vertices ordered CCW around the plane normal (dim == 2 only)."""
        if self.dim != 2:
            raise ValueError("ring() requires affine dimension 2")
        if self._ring is None:
            n, _ = self.plane()
            origin, basis, _ = _affine_frame(self.vertices)
            u = basis[:, 0]
            v = np.cross(n, u)
            rel = self.vertices - origin
            ang = np.arctan2(rel @ v, rel @ u)
            self._ring = self.vertices[np.argsort(ang)]
        return self._ring

    def contains(self, p, eps=EPS_GEO):
        return contains(self, p, eps)

    def canonical_key(self):
        return _canonical_vertices(self.vertices)


def _canonical_vertices(vertices):
    rounded = np.round(vertices, CANONICAL_DECIMALS) + 0.0
    return tuple(sorted(map(tuple, rounded)))


def _hull_3d(points):
    try:
        return _QhullConvexHull(points)
    except QhullError:
        # Nearly-degenerate inputs: joggle to recover a usable hull.
        return _QhullConvexHull(points, qhull_options="QJ")


def _hull_2d_indices(coords2):
    """Indices of the CCW hull ring of 2D coordinates."""
    try:
        hull = _QhullConvexHull(coords2)
        return hull.vertices
    except QhullError:
        # Collinear-ish cloud that slipped past the rank test.
        order = np.lexsort((coords2[:, 1], coords2[:, 0]))
        return np.array([order[0], order[-1]])


def convex_hull(points):
    """Convex hull of a 3D point set, handling affine dimension 0-3.

    The returned polytope's vertices are exactly the extreme points of
    the input set.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 1:
        raise ValueError("expected a non-empty (N, 3) array of points")
    _check_finite(pts)

    origin, basis, dim = _affine_frame(pts)
    if dim == 0:
        return Polytope(pts[:1], 0)
    if dim == 1:
        t = (pts - origin) @ basis[:, 0]
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        return Polytope(pts[[lo, hi]], 1)
    if dim == 2:
        coords = (pts - origin) @ basis
        idx = _hull_2d_indices(coords)
        return Polytope(pts[idx], 2)
    hull = _hull_3d(pts)
    return Polytope(pts[hull.vertices], 3)


def translate(poly, t):
    """Shift every vertex of a polytope by t."""
    t = np.asarray(t, dtype=float)
    out = Polytope(poly.vertices + t, poly.dim)
    if poly._facets is not None:
        a, b = poly._facets
        out._facets = (a, b + a @ t)
    return out


def central_symmetry(poly):
    """Map every vertex v to -v (antecedent-polytope construction)."""
    return Polytope(-poly.vertices, poly.dim)


def rotation_to_normal(n):
    """Minimal rotation R with R @ z = n, for a unit vector n.

    The rotation axis is z x n. The antipodal case n ~ -z is handled by
    a fixed 180-degree rotation about the x axis.
    """
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ValueError("normal must be a unit vector")
    c = float(n[2])
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross(_Z, n)
    s = np.linalg.norm(axis)
    axis = axis / s
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate(poly, r):
    """Apply a 3x3 rotation matrix to all vertices."""
    return Polytope(poly.vertices @ np.asarray(r, dtype=float).T, poly.dim)


def rotate_z(poly, theta):
    """Rotate a polytope about the world z axis by theta radians."""
    return rotate(poly, rot_z(theta))


def minkowski_sum(a, b):
    """Minkowski sum of two polytopes.

    Computed as the hull of all pairwise vertex sums, i.e. the hull of
    copies of one operand translated by each vertex of the other.
    """
    sums = (a.vertices[:, None, :] + b.vertices[None, :, :]).reshape(-1, 3)
    return convex_hull(sums)


def contains(poly, p, eps=EPS_GEO):
    """Closed-set membership of a point in a polytope, within eps."""
    p = np.asarray(p, dtype=float)
    v = poly.vertices
    if poly.dim == 0:
        return bool(np.linalg.norm(p - v[0]) <= eps)
    if poly.dim == 1:
        d = v[1] - v[0]
        length = np.linalg.norm(d)
        d = d / length
        t = (p - v[0]) @ d
        off = np.linalg.norm(p - v[0] - t * d)
        return bool(off <= eps and -eps <= t <= length + eps)
    if poly.dim == 2:
        n, c = poly.plane()
        if abs(n @ p - c) > eps:
            return False
        ring = poly.ring()
        return _ring_contains_3d(ring, n, p, eps)
    a, b = poly.facets()
    return bool(np.all(a @ p <= b + eps))


def _ring_contains_3d(ring, normal, p, eps):
    edges = np.roll(ring, -1, axis=0) - ring
    outward = np.cross(edges, normal)
    d = np.einsum("ij,ij->i", outward, p - ring)
    norms = np.linalg.norm(outward, axis=1)
    norms[norms == 0] = 1.0
    return bool(np.all(d / norms <= eps))


class PlanarPolygon:
    """Convex polygon embedded in a 3D plane.

    Vertices are stored CCW with respect to the plane normal. Degenerate
    polygons (a single point, a segment) are allowed so that point goals
    can flow through the same code paths.
    """

    __slots__ = ("vertices", "normal", "offset", "origin", "axes",
                 "_coords2", "_key")

    def __init__(self, vertices, normal=None):
        verts = np.atleast_2d(np.asarray(vertices, dtype=float))
        _check_finite(verts)
        if normal is None:
            normal = _newell_normal(verts)
        normal = np.asarray(normal, dtype=float)
        normal = normal / np.linalg.norm(normal)

        self.normal = normal
        self.offset = float(normal @ verts[0])
        res = np.abs(verts @ normal - self.offset)
        if res.max() > 1e-7:
            raise ValueError(f"vertices deviate from plane by {res.max():.2e}")

        self.origin = verts[0].copy()
        u = _in_plane_axis(normal, verts)
        v = np.cross(normal, u)
        self.axes = np.column_stack([u, v])
        coords = (verts - self.origin) @ self.axes
        if len(verts) >= 3:
            if _signed_area(coords) < 0:
                verts = verts[::-1]
                coords = (verts - self.origin) @ self.axes
            _check_convex(coords)
        self.vertices = np.ascontiguousarray(verts)
        self.vertices.setflags(write=False)
        self._coords2 = coords
        self._key = None

    @classmethod
    def from_frame(cls, coords2, origin, axes, normal, offset):
        """Rebuild a polygon from 2D coordinates in an existing frame."""
        verts = origin + coords2 @ axes.T
        poly = cls.__new__(cls)
        poly.normal = normal
        poly.offset = offset
        poly.origin = origin
        poly.axes = axes
        if len(coords2) >= 3 and _signed_area(coords2) < 0:
            coords2 = coords2[::-1]
            verts = verts[::-1]
        poly.vertices = np.ascontiguousarray(verts)
        poly.vertices.setflags(write=False)
        poly._coords2 = np.asarray(coords2, dtype=float)
        poly._key = None
        return poly

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"PlanarPolygon(n={len(self.vertices)}, area={self.area():.4g})"

    def to_2d(self, points):
        return (np.asarray(points, dtype=float) - self.origin) @ self.axes

    def to_3d(self, coords2):
        return self.origin + np.asarray(coords2, dtype=float) @ self.axes.T

    def area(self):
        if len(self.vertices) < 3:
            return 0.0
        return float(_signed_area(self._coords2))

    def centroid(self):
        return self.vertices.mean(axis=0)

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, p, eps=EPS_GEO):
        p = np.asarray(p, dtype=float)
        if abs(self.normal @ p - self.offset) > eps:
            return False
        v = self.vertices
        if len(v) == 1:
            return bool(np.linalg.norm(p - v[0]) <= eps)
        if len(v) == 2:
            d = v[1] - v[0]
            length = np.linalg.norm(d)
            d = d / length
            t = (p - v[0]) @ d
            off = np.linalg.norm(p - v[0] - t * d)
            return bool(off <= eps and -eps <= t <= length + eps)
        return _ring_contains_3d(v, self.normal, p, eps)

    def edge_halfspaces(self):
        """3D outward edge half-spaces (A, b) with A @ p <= b, unit rows.

        Together with the plane equality these describe the polygon.
        """
        v = self.vertices
        if len(v) < 3:
            raise ValueError("edge half-spaces require at least 3 vertices")
        edges = np.roll(v, -1, axis=0) - v
        outward = np.cross(edges, self.normal)
        norms = np.linalg.norm(outward, axis=1, keepdims=True)
        outward = outward / norms
        b = np.einsum("ij,ij->i", outward, v)
        return outward, b

    def canonical_key(self):
        """Order-free vertex-set key used for region equality tests."""
        if self._key is None:
            self._key = _canonical_vertices(self.vertices)
        return self._key

    def translated(self, t):
        t = np.asarray(t, dtype=float)
        poly = PlanarPolygon.__new__(PlanarPolygon)
        poly.normal = self.normal
        poly.offset = float(self.offset + self.normal @ t)
        poly.origin = self.origin + t
        poly.axes = self.axes
        verts = self.vertices + t
        poly.vertices = np.ascontiguousarray(verts)
        poly.vertices.setflags(write=False)
        poly._coords2 = self._coords2
        poly._key = None
        return poly

    def circumradius(self, center=None):
        if center is None:
            center = self.centroid()
        return float(np.linalg.norm(self.vertices - center, axis=1).max())

    def sample(self, rng, count=1):
        """Uniform samples from the polygon (fan triangulation)."""
        v = self._coords2
        if len(v) == 1:
            out2 = np.repeat(v, count, axis=0)
        elif len(v) == 2:
            t = rng.random(count)[:, None]
            out2 = v[0] + t * (v[1] - v[0])
        else:
            tri = np.stack([np.zeros(len(v) - 2, dtype=int),
                            np.arange(1, len(v) - 1),
                            np.arange(2, len(v))], axis=1)
            a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
            ab, ac = b - a, c - a
            areas = 0.5 * np.abs(ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
            total = areas.sum()
            if total <= 0:
                out2 = np.repeat(v[:1], count, axis=0)
            else:
                which = rng.choice(len(tri), size=count, p=areas / total)
                r1 = np.sqrt(rng.random(count))[:, None]
                r2 = rng.random(count)[:, None]
                out2 = (1 - r1) * a[which] + r1 * (1 - r2) * b[which] \
                    + r1 * r2 * c[which]
        out = self.to_3d(out2)
        return out[0] if count == 1 else out


def _newell_normal(verts):
    if len(verts) < 3:
        raise ValueError("cannot derive a plane from fewer than 3 vertices")
    nxt = np.roll(verts, -1, axis=0)
    n = np.array([
        np.sum((verts[:, 1] - nxt[:, 1]) * (verts[:, 2] + nxt[:, 2])),
        np.sum((verts[:, 2] - nxt[:, 2]) * (verts[:, 0] + nxt[:, 0])),
        np.sum((verts[:, 0] - nxt[:, 0]) * (verts[:, 1] + nxt[:, 1])),
    ])
    norm = np.linalg.norm(n)
    if norm < 1e-14:
        raise ValueError("degenerate polygon: vertices are collinear")
    return n / norm


def _in_plane_axis(normal, verts):
    if len(verts) >= 2:
        d = verts[1] - verts[0]
        d = d - (d @ normal) * normal
        norm = np.linalg.norm(d)
        if norm > 1e-12:
            return d / norm
    # Single point: any in-plane direction will do.
    ref = _Z if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    d = np.cross(normal, ref)
    return d / np.linalg.norm(d)


def _signed_area(coords2):
    x, y = coords2[:, 0], coords2[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _check_convex(coords2, tol=1e-9):
    n = len(coords2)
    e = np.roll(coords2, -1, axis=0) - coords2
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] \
        - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    scale = max(1.0, float(np.abs(e).max()) ** 2)
    if np.any(cross < -tol * scale) and np.any(cross > tol * scale):
        raise ValueError("polygon is not convex")


def _clip_ring(coords2, a, b, eps=EPS_GEO):
    """Sutherland-Hodgman clip of a 2D ring against a . y <= b."""
    d = coords2 @ a - b
    inside = d <= eps
    if inside.all():
        return coords2
    if not inside.any():
        return None
    out = []
    n = len(coords2)
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            out.append(coords2[i])
        if inside[i] != inside[j]:
            t = d[i] / (d[i] - d[j])
            out.append(coords2[i] + t * (coords2[j] - coords2[i]))
    if len(out) < 1:
        return None
    ring = np.array(out)
    # Drop near-duplicate consecutive points introduced by the clip.
    keep = np.linalg.norm(ring - np.roll(ring, 1, axis=0), axis=1) > 1e-12
    if keep.sum() == 0:
        keep[0] = True
    return ring[keep]


def clip_polygon_by_polytope(region, poly, eps=EPS_GEO):
    """Intersection of a planar polygon with a polytope.

    Returns the intersection as a polygon on the region's plane, or
    ``None`` when the intersection has (near-)zero area. Full-dimensional
    polytopes are clipped half-space by half-space in the region's 2D
    frame; a coplanar dim-2 polytope is clipped edge by edge; any other
    degenerate operand yields a zero-area intersection, hence ``None``.
    """
    if len(region.vertices) < 3:
        raise ValueError("clip region must have positive area")

    if poly.dim == 3:
        a3, b3 = poly.facets()
    elif poly.dim == 2:
        n, c = poly.plane()
        same = (abs(abs(n @ region.normal) - 1.0) <= 1e-9
                and abs(c * np.sign(n @ region.normal) - region.offset) <= eps)
        if not same:
            return None
        ring = poly.ring()
        edges = np.roll(ring, -1, axis=0) - ring
        a3 = np.cross(edges, n if n @ region.normal > 0 else -n)
        a3 /= np.linalg.norm(a3, axis=1, keepdims=True)
        b3 = np.einsum("ij,ij->i", a3, ring)
    else:
        return None

    # Project each half-space into the region's 2D frame.
    a2 = a3 @ region.axes
    b2 = b3 - a3 @ region.origin
    coords = region._coords2

    # Fast paths: planes the whole ring already satisfies need no clip,
    # and a plane violated by every vertex empties a convex polygon.
    d = coords @ a2.T - b2
    max_d = d.max(axis=0)
    norms = np.linalg.norm(a2, axis=1)
    degenerate = norms <= 1e-12
    if np.any(degenerate & (b2 < -eps)):
        return None  # facet parallel to the plane, plane fully outside
    active = np.flatnonzero((max_d > eps) & ~degenerate)

    for i in active:
        coords = _clip_ring(coords, a2[i], b2[i], eps)
        if coords is None or len(coords) < 3:
            return None
    if abs(_signed_area(coords)) <= EPS_AREA:
        return None
    return PlanarPolygon.from_frame(coords, region.origin, region.axes,
                                    region.normal, region.offset)


def inset_polygon(region, margin):
    """Move every edge's supporting line inward by ``margin`` meters.

    Returns ``None`` when the inset annihilates the polygon.
    """
    if margin < 0:
        raise ValueError("inset margin must be non-negative")
    if margin == 0:
        return region
    if len(region.vertices) < 3:
        return None
    coords = region._coords2
    n = len(coords)
    ring = coords
    for i in range(n):
        e = coords[(i + 1) % n] - coords[i]
        # Outward normal of a CCW ring edge.
        a = np.array([e[1], -e[0]])
        a /= np.linalg.norm(a)
        b = a @ coords[i] - margin
        ring = _clip_ring(ring, a, b)
        if ring is None or len(ring) < 3:
            return None
    if abs(_signed_area(ring)) <= EPS_AREA:
        return None
    return PlanarPolygon.from_frame(ring, region.origin, region.axes,
                                    region.normal, region.offset)


def chebyshev_center(region):
    """Center of the largest inscribed circle, as a 3D point."""
    v = region.vertices
    if len(v) == 1:
        return v[0].copy()
    if len(v) == 2:
        return 0.5 * (v[0] + v[1])
    coords = region._coords2
    n = len(coords)
    rows = np.zeros((n, 3))
    rhs = np.zeros(n)
    for i in range(n):
        e = coords[(i + 1) % n] - coords[i]
        a = np.array([e[1], -e[0]])
        a /= np.linalg.norm(a)
        rows[i, :2] = a
        rows[i, 2] = 1.0
        rhs[i] = a @ coords[i]
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=rows, b_ub=rhs,
                  bounds=[(None, None), (None, None), (0, None)],
                  method="highs")
    if not res.success:
        # Should not happen for a valid convex polygon; fall back.
        return region.centroid()
    return region.to_3d(res.x[:2][None, :])[0]
