"""Adaptive P1 triangulations of the square ``(-H, H)^2``.

Meshes are produced by newest-vertex bisection from a macro mesh of
``N_c x N_c`` squares, each cut into two triangles along its diagonal.
Every triangle is stored as ``[a, b, c]`` (anticlockwise) with ``a-b`` its
refinement edge, so all triangles are isosceles right triangles whose
diameter is the refinement edge.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _accel
from . import _kernels as kern
from .errors import ConfigError, LocationError

#: slack on the fine-element diameter bound
EPS_GEOM = 0.05


@dataclass(frozen=True, eq=False)
class BulkMesh:
    """Conforming triangulation with a background grid for point queries."""

    vertices: np.ndarray
    triangles: np.ndarray
    level: np.ndarray
    H: float
    N_f: int = 1
    N_c: int = 1

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def h_f(self):
        return 2.0 * self.H / self.N_f

    @property
    def h_c(self):
        return 2.0 * self.H / self.N_c

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def diameters(self):
        p = self.vertices[self.triangles]
        d = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.sqrt((d ** 2).sum(axis=2)).max(axis=1)

    @cached_property
    def grid(self):
        """Uniform background grid: ``(x0, cell, nx, cell_ptr, cell_tris)``."""
        cell = max(2.0 * self.h_f, 2.0 * self.H / 1024)
        nx = int(np.ceil(2.0 * self.H / cell))
        cell = 2.0 * self.H / nx
        ptr, tris = kern.build_grid(self.vertices, self.triangles, -self.H, cell, nx)
        return -self.H, cell, nx, ptr, tris


# --------------------------------------------------------------------------
# construction


def macro_mesh(H, N_c):
    """``N_c x N_c`` squares, each split along its rising diagonal."""
    x = np.linspace(-H, H, N_c + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((N_c + 1) ** 2).reshape(N_c + 1, N_c + 1)
    p00 = idx[:-1, :-1].ravel()
    p10 = idx[1:, :-1].ravel()
    p11 = idx[1:, 1:].ravel()
    p01 = idx[:-1, 1:].ravel()
    upper = np.stack([p00, p11, p01], axis=1)
    lower = np.stack([p11, p00, p10], axis=1)
    tris = np.stack([upper, lower], axis=1).reshape(-1, 3)
    return verts, tris.astype(np.int64), np.zeros(len(tris), dtype=np.int64)


def _edge_table(tris, n_verts):
    """Unique undirected edges and the element-to-edge map ``(m, 3)``.

    Local edge 0 is ``a-b`` (the refinement edge), 1 is ``b-c``, 2 is ``c-a``.
    """
    m = len(tris)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    key = e[:, 0] * n_verts + e[:, 1]
    uniq, inv = np.unique(key, return_inverse=True)
    edges = np.stack([uniq // n_verts, uniq % n_verts], axis=1)
    return edges, inv.reshape(3, m).T


def refine_nvb(verts, tris, marked):
    """One round of conforming newest-vertex bisection.

    Marked elements are bisected at least once; the closure bisects any
    element that has a marked edge until its own refinement edge is marked,
    which leaves no hanging nodes.

    Returns
    -------
    verts, tris : arrays
        Refined mesh; new midpoints are appended to ``verts``.
    parent : (m_new,) int array
        Index of the old triangle each new triangle came from.
    depth : (m_new,) int array
        Number of bisections (0, 1 or 2) between parent and child.
    """
    n = len(verts)
    edges, el2ed = _edge_table(tris, n)
    emark = np.zeros(len(edges), dtype=bool)
    emark[el2ed[marked, 0]] = True
    while True:
        need = (emark[el2ed[:, 1]] | emark[el2ed[:, 2]]) & ~emark[el2ed[:, 0]]
        if not need.any():
            break
        emark[el2ed[need, 0]] = True
    new_id = np.full(len(edges), -1, dtype=np.int64)
    marked_edges = np.flatnonzero(emark)
    new_id[marked_edges] = n + np.arange(len(marked_edges))
    mids = 0.5 * (verts[edges[marked_edges, 0]] + verts[edges[marked_edges, 1]])
    verts = np.concatenate([verts, mids])

    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    m0, m1, m2 = new_id[el2ed[:, 0]], new_id[el2ed[:, 1]], new_id[el2ed[:, 2]]
    k0, k1, k2 = m0 >= 0, m1 >= 0, m2 >= 0
    groups = {
        "none": ~k0,
        "only0": k0 & ~k1 & ~k2,
        "with1": k0 & k1 & ~k2,
        "with2": k0 & ~k1 & k2,
        "both": k0 & k1 & k2,
    }
    children = [
        ("none", (a, b, c), 0),
        ("only0", (c, a, m0), 1),
        ("only0", (b, c, m0), 1),
        ("with1", (c, a, m0), 1),
        ("with1", (m0, b, m1), 2),
        ("with1", (c, m0, m1), 2),
        ("with2", (m0, c, m2), 2),
        ("with2", (a, m0, m2), 2),
        ("with2", (b, c, m0), 1),
        ("both", (m0, c, m2), 2),
        ("both", (a, m0, m2), 2),
        ("both", (m0, b, m1), 2),
        ("both", (c, m0, m1), 2),
    ]
    new_tris, parent, depth = [], [], []
    for name, (x, y, z), dep in children:
        sel = np.flatnonzero(groups[name])
        new_tris.append(np.stack([x[sel], y[sel], z[sel]], axis=1))
        parent.append(sel)
        depth.append(np.full(len(sel), dep, dtype=np.int64))
    return (verts, np.concatenate(new_tris).astype(np.int64),
            np.concatenate(parent), np.concatenate(depth))


def _is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def _box_cells(lo, hi, x0, cell, nx):
    """Flattened ids of the grid cells overlapped by each box, as (owner, cell) pairs."""
    i0 = np.clip(np.floor((lo - x0) / cell).astype(np.int64), 0, nx - 1)
    i1 = np.clip(np.floor((hi - x0) / cell).astype(np.int64), 0, nx - 1)
    wi = i1[:, 0] - i0[:, 0] + 1
    wj = i1[:, 1] - i0[:, 1] + 1
    count = wi * wj
    owner = np.repeat(np.arange(len(lo), dtype=np.int64), count)
    local = np.arange(count.sum(), dtype=np.int64) - np.repeat(np.cumsum(count) - count, count)
    cells = (i0[owner, 0] + local % wi[owner]) * nx + i0[owner, 1] + local // wi[owner]
    return owner, cells


def triangles_near_curve(verts, tris, tri_ids, curve, radius):
    """Which of ``tri_ids`` meet the curve or lie within ``radius`` of it.

    Candidate segments per triangle come from a uniform grid over the
    curve's bounding box; the exact test runs in a compiled kernel.
    """
    tri_ids = np.asarray(tri_ids, dtype=np.int64)
    if len(tri_ids) == 0:
        return np.zeros(0, dtype=bool)
    p0 = curve.points[curve.edges[:, 0]]
    p1 = curve.points[curve.edges[:, 1]]
    span_lo = curve.points.min(axis=0) - radius
    x0 = span_lo.min()
    extent = (curve.points.max(axis=0) + radius).max() - x0
    cell = max(curve.lengths.max(), radius, 1e-6 * extent)
    nx = int(np.ceil(extent / cell)) + 1
    seg_owner, seg_cells = _box_cells(np.minimum(p0, p1), np.maximum(p0, p1), x0, cell, nx)
    order = np.argsort(seg_cells, kind="stable")
    cell_segs = seg_owner[order]
    cell_ptr = np.zeros(nx * nx + 1, dtype=np.int64)
    np.add.at(cell_ptr, seg_cells + 1, 1)
    cell_ptr = np.cumsum(cell_ptr)

    pts = verts[tris[tri_ids]]
    lo = pts.min(axis=1) - radius
    hi = pts.max(axis=1) + radius
    # triangles whose inflated box misses the curve's box cannot be near
    hit = np.all(hi >= span_lo, axis=1) & np.all(lo <= x0 + (nx - 1) * cell, axis=1)
    owner, cells = _box_cells(lo[hit], hi[hit], x0, cell, nx)
    owner = np.flatnonzero(hit)[owner]
    counts = cell_ptr[cells + 1] - cell_ptr[cells]
    t_of = np.repeat(owner, counts)
    start = np.repeat(cell_ptr[cells] - (np.cumsum(counts) - counts), counts)
    seg = cell_segs[start + np.arange(counts.sum())]
    key = np.unique(t_of * curve.n_elements + seg)
    t_of = key // curve.n_elements
    seg = key % curve.n_elements
    ptr = np.zeros(len(tri_ids) + 1, dtype=np.int64)
    np.add.at(ptr, t_of + 1, 1)
    ptr = np.cumsum(ptr)
    eps = kern.INSIDE_EPS * (np.abs(verts).max() + 1.0)
    fn = kern.near_curve_nb if _accel.USE_NUMBA else kern.near_curve_np
    return fn(tri_ids, verts, tris, ptr, seg.astype(np.int64), p0, p1, radius, eps)


def build_adaptive(curve, H=4.0, N_f=128, N_c=1, band=0.0):
    """Triangulation refined to ``h_f = 2H/N_f`` around ``curve``.

    A triangle is bisected while its diameter exceeds ``h_f * (1 + EPS_GEOM)``
    and its closure meets the curve or lies within ``band * h_f`` of it.
    The result depends only on the curve, so repeated calls give identical
    meshes.
    """
    if not (_is_power_of_two(N_f) and _is_power_of_two(N_c)):
        raise ConfigError("N_f and N_c must be powers of two")
    if N_c > N_f:
        raise ConfigError("N_c must not exceed N_f")
    if np.abs(curve.points).max() >= H:
        raise ConfigError(f"curve touches or leaves the domain (-{H}, {H})^2")
    h_f = 2.0 * H / N_f
    verts, tris, level = macro_mesh(H, N_c)
    # triangles already known to keep clear of the curve; bisection
    # only shrinks them, so their children never need testing
    far = np.zeros(len(tris), dtype=bool)
    limit = h_f * (1.0 + EPS_GEOM)
    while True:
        p = verts[tris]
        diam = np.sqrt(((p[:, 0] - p[:, 1]) ** 2).sum(axis=1))
        cand = np.flatnonzero((diam > limit) & ~far)
        if len(cand) == 0:
            break
        near = triangles_near_curve(verts, tris, cand, curve, band * h_f)
        far[cand[~near]] = True
        marked = cand[near]
        if len(marked) == 0:
            break
        verts, tris, parent, depth = refine_nvb(verts, tris, marked)
        level = level[parent] + depth
        far = far[parent]
    verts.setflags(write=False)
    tris.setflags(write=False)
    return BulkMesh(verts, tris, level, float(H), int(N_f), int(N_c))


def uniform_mesh(H, N):
    """Mesh with every element at the fine size ``2H/N`` (no adaptivity)."""
    verts, tris, level = macro_mesh(H, N)
    verts, tris, parent, depth = refine_nvb(verts, tris, np.arange(len(tris)))
    return BulkMesh(verts, tris, level[parent] + depth, float(H), int(N), int(N))


# --------------------------------------------------------------------------
# audits


def conformity_violations(mesh):
    """Count edges that betray a hanging node or a broken boundary.

    Every interior edge must be shared by exactly two triangles and every
    edge used once must lie on the boundary of the square.
    """
    edges, el2ed = _edge_table(mesh.triangles, mesh.n_vertices)
    use = np.bincount(el2ed.ravel(), minlength=len(edges))
    bad = int(np.count_nonzero(use > 2))
    once = edges[use == 1]
    v = mesh.vertices
    tol = 1e-12 * mesh.H
    on_bdry = np.zeros(len(once), dtype=bool)
    for ax in (0, 1):
        for s in (-1.0, 1.0):
            on_bdry |= (np.abs(v[once[:, 0], ax] - s * mesh.H) < tol) & (
                np.abs(v[once[:, 1], ax] - s * mesh.H) < tol)
    bad += int(np.count_nonzero(~on_bdry))
    bad += int(np.count_nonzero(mesh.areas <= 0.0))
    return bad


# --------------------------------------------------------------------------
# finite element operators


def stiffness_matrix(mesh):
    """P1 stiffness matrix ``(grad phi_a, grad phi_b)`` in CSR format."""
    p = mesh.vertices[mesh.triangles]
    # gradients of the barycentric coordinates
    d = np.stack([p[:, 1] - p[:, 2], p[:, 2] - p[:, 0], p[:, 0] - p[:, 1]], axis=1)
    area = mesh.areas
    g = np.stack([-d[:, :, 1], d[:, :, 0]], axis=2) / (2.0 * area[:, None, None])
    local = area[:, None, None] * np.einsum("tik,tjk->tij", g, g)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def locate_points(mesh, points):
    """Containing triangle and barycentric coordinates for each point.

    Points on shared edges or vertices go to the lowest triangle id. The
    coordinates are clipped to ``[0, 1]`` and renormalized to sum to one.

    Raises
    ------
    LocationError
        If any point lies outside the closed square.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tol = 1e-12 * mesh.H
    if np.any(np.abs(points) > mesh.H + tol):
        raise LocationError("point outside the bulk domain")
    x0, cell, nx, ptr, ctris = mesh.grid
    fn = kern.locate_nb if _accel.USE_NUMBA else kern.locate_np
    tri, lam = fn(points, mesh.vertices, mesh.triangles, x0, cell, nx, ptr, ctris, kern.BARY_EPS)
    if np.any(tri < 0):
        raise LocationError("point could not be located in the mesh")
    lam = np.clip(lam, 0.0, 1.0)
    lam /= lam.sum(axis=1, keepdims=True)
    return tri, lam


def locate_point(mesh, p):
    tri, lam = locate_points(mesh, np.asarray(p, dtype=float)[None, :])
    return int(tri[0]), lam[0]


def interpolate(mesh, f):
    """Nodal interpolant of ``f``: a callable on ``(n, 2)`` arrays or a constant."""
    if callable(f):
        return np.asarray(f(mesh.vertices), dtype=float).reshape(mesh.n_vertices)
    return np.full(mesh.n_vertices, float(f))


def evaluate(mesh, values, points):
    """Evaluate the P1 field with nodal ``values`` at arbitrary points."""
    tri, lam = locate_points(mesh, points)
    return np.einsum("ij,ij->i", lam, np.asarray(values)[mesh.triangles[tri]])


def write_mesh(mesh, path):
    """Plain-text dump: vertex table then one ``v1 v2 v3`` row per triangle."""
    with open(path, "w") as fh:
        fh.write(f"# vertices {mesh.n_vertices}\n")
        np.savetxt(fh, mesh.vertices, fmt="%.17e")
        fh.write(f"# triangles {mesh.n_triangles}\n")
        np.savetxt(fh, mesh.triangles, fmt="%d")
