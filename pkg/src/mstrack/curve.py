"""Polygonal interfaces and their discrete geometry.

A :class:`Curve` is a shared vertex array plus a list of closed index loops.
Element ``j`` runs from ``edges[j, 0]`` to ``edges[j, 1]`` and its normal is
the anticlockwise quarter turn of that edge vector, so loops bounding the
inner phase run clockwise and loops bounding a hole run anticlockwise.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GeometryError


def perp(v):
    """Anticlockwise rotation by a right angle, ``(x, y) -> (-y, x)``."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class Curve:
    """Closed polygonal curve with one or more components.

    Parameters
    ----------
    points : (K, 2) array
        Vertex positions; loop ``c`` owns ``points[starts[c]:starts[c+1]]``.
    starts : tuple of int
        Loop offsets, ``starts[0] == 0`` and ``starts[-1] == K``.

    Use :meth:`from_loops` to build a validated, correctly oriented curve.
    """

    points: np.ndarray
    starts: tuple

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("points must have shape (K, 2)")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite vertex coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        starts = tuple(int(s) for s in self.starts)
        if starts[0] != 0 or starts[-1] != len(pts) or len(starts) < 2:
            raise GeometryError("loop offsets do not cover the vertex array")
        if any(b - a < 3 for a, b in zip(starts[:-1], starts[1:])):
            raise GeometryError("every loop needs at least 3 vertices")
        object.__setattr__(self, "starts", starts)

    @classmethod
    def from_loops(cls, loops, orient=True):
        """Build a curve from a list of ``(n_c, 2)`` vertex loops.

        With ``orient`` set, each loop is reversed if needed so that element
        normals point out of the enclosed phase: loops nested inside an odd
        number of other loops are treated as holes.
        """
        loops = [np.asarray(lp, dtype=float) for lp in loops]
        if orient:
            loops = _orient_loops(loops)
        starts = np.concatenate([[0], np.cumsum([len(lp) for lp in loops])])
        curve = cls(np.concatenate(loops, axis=0), tuple(starts))
        if np.any(curve.lengths <= 0.0):
            raise GeometryError("consecutive vertices coincide (zero-length element)")
        return curve

    def with_points(self, points):
        """Same connectivity, new vertex positions (``X^{m+1}(Gamma^m)``)."""
        points = np.asarray(points, dtype=float)
        if points.shape != self.points.shape:
            raise GeometryError("new positions do not match the vertex count")
        return Curve(points, self.starts)

    @property
    def n_vertices(self):
        return self.points.shape[0]

    @property
    def n_elements(self):
        return self.points.shape[0]

    @property
    def n_loops(self):
        return len(self.starts) - 1

    def loop(self, c):
        return self.points[self.starts[c]:self.starts[c + 1]]

    @cached_property
    def edges(self):
        """(J, 2) vertex indices of every element."""
        idx = np.arange(self.n_vertices)
        nxt = idx + 1
        for a, b in zip(self.starts[:-1], self.starts[1:]):
            nxt[b - 1] = a
        e = np.stack([idx, nxt], axis=1)
        e.setflags(write=False)
        return e

    @cached_property
    def prev_element(self):
        """Index of the element ending at each vertex."""
        prev = np.empty(self.n_vertices, dtype=np.int64)
        prev[self.edges[:, 1]] = np.arange(self.n_elements)
        return prev

    @cached_property
    def edge_vectors(self):
        e = self.edges
        return self.points[e[:, 1]] - self.points[e[:, 0]]

    @cached_property
    def lengths(self):
        return np.hypot(self.edge_vectors[:, 0], self.edge_vectors[:, 1])

    @cached_property
    def vertex_weights(self):
        """Lumped mass ``m_k``: half the length of the two adjacent elements."""
        return 0.5 * (self.lengths + self.lengths[self.prev_element])

    @property
    def length(self):
        return float(self.lengths.sum())

    def _require_nondegenerate(self):
        if np.any(self.lengths <= 0.0):
            j = int(np.argmin(self.lengths))
            raise GeometryError(f"element {j} has zero length")


def element_normals(curve):
    """Unit outer normals of all elements, shape (J, 2)."""
    curve._require_nondegenerate()
    return perp(curve.edge_vectors) / curve.lengths[:, None]


def element_normal(curve, j):
    length = curve.lengths[j]
    if length <= 0.0:
        raise GeometryError(f"element {j} has zero length")
    return perp(curve.edge_vectors[j]) / length


def _element_values(curve, u, limits):
    u = np.asarray(u, dtype=float)
    if limits:
        if u.shape[:2] != (curve.n_elements, 2):
            raise GeometryError("element limits must have shape (J, 2, ...)")
        return u
    if u.shape[0] != curve.n_vertices:
        raise GeometryError("field length does not match the curve")
    return u[curve.edges]


def lumped_inner_product(curve, u, v, limits=False):
    """Mass-lumped inner product on the curve.

    ``u`` and ``v`` are vertex fields of shape ``(K,)`` or ``(K, d)``. With
    ``limits=True`` they are instead one-sided element limits of shape
    ``(J, 2)`` or ``(J, 2, d)``, which admits fields that jump between
    elements. Vector fields are contracted componentwise.
    """
    ue = _element_values(curve, u, limits)
    ve = _element_values(curve, v, limits)
    prod = ue * ve
    if prod.ndim == 3:
        prod = prod.sum(axis=2)
    return float(0.5 * np.dot(curve.lengths, prod.sum(axis=1)))


def _lump_to_vertices(curve, element_vectors_times_length):
    """Sum half of each element's quantity onto its two vertices."""
    out = np.zeros((curve.n_vertices,) + element_vectors_times_length.shape[1:])
    half = 0.5 * element_vectors_times_length
    np.add.at(out, curve.edges[:, 0], half)
    np.add.at(out, curve.edges[:, 1], half)
    return out


def vertex_normal(curve):
    """Lumped projection of the element normals onto vertex vector fields.

    In two dimensions the projection is diagonal and reduces to the
    length-weighted mean of the two adjacent element normals.
    """
    return averaged_vertex_normal(curve, curve)


def averaged_element_normals(old, new):
    """Time-averaged element normals of the linear interpolation old -> new.

    Returns ``0.5 * (e_old + e_new)^perp / |e_old|`` per element; not unit
    length unless ``new`` is a rigid translation of ``old``.
    """
    check_pair(old, new)
    old._require_nondegenerate()
    return 0.5 * perp(old.edge_vectors + new.edge_vectors) / old.lengths[:, None]


def averaged_element_normal_2d(old, new, j):
    return averaged_element_normals(old, new)[j]


def averaged_element_normal_3d(old_triangle, new_triangle):
    """Averaged normal of a triangle moving linearly between two positions.

    Parameters
    ----------
    old_triangle, new_triangle : (3, 3) array
        Matched vertex triples (rows).
    """
    p = np.asarray(old_triangle, dtype=float)
    q = np.asarray(new_triangle, dtype=float)
    a0, b0 = p[1] - p[0], p[2] - p[0]
    a1, b1 = q[1] - q[0], q[2] - q[0]
    n0 = np.cross(a0, b0)
    area2 = np.linalg.norm(n0)
    if area2 <= 0.0:
        raise GeometryError("degenerate old triangle")
    return (n0 + np.cross(a1, b1) + np.cross(a0 + a1, b0 + b1)) / (6.0 * area2)


def averaged_vertex_normal(old, new):
    """Vertex normal from the averaged element normals on the old curve."""
    nu = averaged_element_normals(old, new)
    w = old.vertex_weights
    return _lump_to_vertices(old, nu * old.lengths[:, None]) / w[:, None]


def enclosed_volume(curve):
    """Area of the inner phase, ``(1/2) * sum_j |s_j| mid_j . nu_j``."""
    e = curve.edges
    mid = 0.5 * (curve.points[e[:, 0]] + curve.points[e[:, 1]])
    return float(0.5 * np.einsum("ij,ij->", mid, perp(curve.edge_vectors)))


def loop_volumes(curve):
    e = curve.edges
    mid = 0.5 * (curve.points[e[:, 0]] + curve.points[e[:, 1]])
    per_element = 0.5 * np.einsum("ij,ij->i", mid, perp(curve.edge_vectors))
    return np.add.reduceat(per_element, np.asarray(curve.starts[:-1]))


def pairing_with_averaged_normal(old, new):
    """Exact ``<X - id, nu^{m+1/2}>`` on the old curve.

    The displacement is linear and the normal constant per element, so the
    element integral is length times the midpoint value.
    """
    nu = averaged_element_normals(old, new)
    d = new.points - old.points
    dmid = 0.5 * (d[old.edges[:, 0]] + d[old.edges[:, 1]])
    return float(np.einsum("j,ji,ji->", old.lengths, dmid, nu))


def volume_difference_identity(old, new):
    """Both sides of the discrete volume identity: ``(vol(new) - vol(old), pairing)``."""
    lhs = enclosed_volume(new) - enclosed_volume(old)
    return lhs, pairing_with_averaged_normal(old, new)


def stiffness_apply(curve, x):
    """Apply the P1 arclength stiffness of ``curve`` to a vertex field ``x``.

    Element ``j`` contributes ``(x_2 - x_1) / |s_j|`` to ``x_2``'s row and
    its negative to ``x_1``'s row.
    """
    x = np.asarray(x, dtype=float)
    e = curve.edges
    flux = (x[e[:, 1]] - x[e[:, 0]]) / curve.lengths.reshape((-1,) + (1,) * (x.ndim - 1))
    out = np.zeros_like(x)
    np.add.at(out, e[:, 1], flux)
    np.add.at(out, e[:, 0], -flux)
    return out


def conformal_curvature(curve):
    """Least-squares curvature for the conformality side condition."""
    omega = vertex_normal(curve)
    rhs = -stiffness_apply(curve, curve.points)
    m = curve.vertex_weights
    return np.einsum("ij,ij->i", rhs, omega) / (m * np.einsum("ij,ij->i", omega, omega))


def conformality_residual(curve, kappa):
    """Max-norm residual of the lumped curvature identity over all basis fields."""
    omega = vertex_normal(curve)
    r = curve.vertex_weights[:, None] * np.asarray(kappa, dtype=float)[:, None] * omega
    r += stiffness_apply(curve, curve.points)
    return float(np.abs(r).max())


def equidistribution_ratio(curve):
    return float(curve.lengths.max() / curve.lengths.min())


def reflex_vertices(curve, tol=1e-12):
    """Boolean mask of vertices where the inner phase has a reflex corner."""
    e_in = curve.edge_vectors[curve.prev_element]
    e_out = curve.edge_vectors
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    scale = curve.lengths[curve.prev_element] * curve.lengths
    return cross > tol * scale


def is_simple(curve):
    """True if no two non-adjacent elements of the curve intersect."""
    from shapely.geometry import LinearRing, MultiLineString

    rings = [LinearRing(curve.loop(c)) for c in range(curve.n_loops)]
    if not all(r.is_simple for r in rings):
        return False
    for i in range(len(rings)):
        for k in range(i + 1, len(rings)):
            if rings[i].intersects(rings[k]):
                return False
    return MultiLineString([list(r.coords) for r in rings]).is_valid


def check_pair(old, new):
    if old.starts != new.starts:
        raise GeometryError("curves do not share connectivity")


def _shoelace(loop):
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _point_in_loop(p, loop):
    x, y = loop[:, 0], loop[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    crosses = (y > p[1]) != (y2 > p[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x + (p[1] - y) * (x2 - x) / (y2 - y)
    return bool(np.count_nonzero(crosses & (p[0] < xint)) % 2)


def _orient_loops(loops):
    out = []
    for i, lp in enumerate(loops):
        depth = sum(_point_in_loop(lp[0], other) for k, other in enumerate(loops) if k != i)
        # shoelace is positive for anticlockwise loops
        want_clockwise = depth % 2 == 0
        ccw = _shoelace(lp) > 0
        out.append(lp[::-1].copy() if ccw == want_clockwise else lp)
    return out
