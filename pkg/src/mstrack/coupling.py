"""Coupling between bulk P1 functions and curve P1 functions.

The interface mesh is independent of the bulk triangulation, so mixed terms
``<phi_a, chi_k>`` are either lumped onto the curve vertices (point
location) or integrated exactly over the pieces obtained by clipping each
curve element against the bulk triangles.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _accel
from . import _kernels as kern
from .bulk import locate_points
from .errors import GeometryError

#: tolerance of the clipping length audit, relative to the element length
AUDIT_RTOL = 1e-12

# two-point Gauss rule on [0, 1]
_GAUSS_T = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class ClippedCurve:
    """Curve elements cut into pieces that each lie in one bulk triangle.

    Piece ``i`` is the parameter interval ``[t0[i], t1[i]]`` of element
    ``element[i]`` and lies in triangle ``triangle[i]``. Pieces of an element
    are stored in order and tile ``[0, 1]`` without overlap.
    """

    element: np.ndarray
    triangle: np.ndarray
    t0: np.ndarray
    t1: np.ndarray

    def __len__(self):
        return len(self.element)

    def pieces(self, j):
        sel = self.element == j
        return list(zip(self.triangle[sel].tolist(), self.t0[sel].tolist(), self.t1[sel].tolist()))


@dataclass(frozen=True)
class CouplingMatrices:
    """Mixed and surface matrices of one time step.

    ``N`` is ``K_Omega x K`` with ``N[a, k] = <phi_a, chi_k>``; ``M`` is the
    lumped curve mass as a sparse diagonal, ``A`` the scalar arclength
    stiffness and ``weights`` the vertex masses ``m_k``.
    """

    N: sp.csr_matrix
    M: sp.dia_matrix
    A: sp.csr_matrix
    weights: np.ndarray
    variant: str


def clip_curve_to_mesh(curve, mesh):
    """Split every curve element at the bulk mesh edges it crosses.

    Points on shared edges go to the lowest triangle id, matching
    :func:`mstrack.bulk.locate_points`.

    Raises
    ------
    GeometryError
        If the pieces fail to cover an element, which only happens when the
        curve leaves the bulk domain.
    """
    p0 = np.ascontiguousarray(curve.points[curve.edges[:, 0]])
    p1 = np.ascontiguousarray(curve.points[curve.edges[:, 1]])
    x0, cell, nx, ptr, ctris = mesh.grid
    eps = kern.INSIDE_EPS * (mesh.H + 1.0)
    fn = kern.clip_nb if _accel.USE_NUMBA else kern.clip_np
    seg, tri, t0, t1, gap = fn(p0, p1, mesh.vertices, mesh.triangles, x0, cell, nx,
                               ptr, ctris, eps, kern.T_EPS)
    # a gap larger than rounding means part of an element is outside every
    # triangle; snapping would silently hide it
    if gap > 1e-9:
        raise GeometryError(f"curve leaves the bulk mesh (uncovered parameter {gap:.3e})")
    covered = np.zeros(curve.n_elements)
    np.add.at(covered, seg, t1 - t0)
    if np.abs(covered - 1.0).max() > AUDIT_RTOL:
        raise GeometryError("clipped pieces do not tile the curve elements")
    return ClippedCurve(seg, tri, t0, t1)


def _barycentric(mesh, tri, pts):
    v = mesh.vertices[mesh.triangles[tri]]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    r = pts - v[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _lumped_coupling(curve, mesh):
    tri, lam = locate_points(mesh, curve.points)
    m = curve.vertex_weights
    rows = mesh.triangles[tri].ravel()
    cols = np.repeat(np.arange(curve.n_vertices), 3)
    vals = (lam * m[:, None]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_vertices, curve.n_vertices))


def _true_coupling(curve, mesh, clipped):
    j = clipped.element
    p0 = curve.points[curve.edges[j, 0]]
    p1 = curve.points[curve.edges[j, 1]]
    dt = clipped.t1 - clipped.t0
    rows, cols, vals = [], [], []
    for g in _GAUSS_T:
        s = clipped.t0 + g * dt
        x = p0 + s[:, None] * (p1 - p0)
        lam = _barycentric(mesh, clipped.triangle, x)
        w = 0.5 * curve.lengths[j] * dt
        bulk = mesh.triangles[clipped.triangle]
        for k_col, chi in ((curve.edges[j, 0], 1.0 - s), (curve.edges[j, 1], s)):
            rows.append(bulk.ravel())
            cols.append(np.repeat(k_col, 3))
            vals.append((lam * (w * chi)[:, None]).ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_vertices, curve.n_vertices),
    )


def assemble_coupling(curve, mesh, variant="lumped", clipped=None):
    """Bulk-curve coupling matrix plus the curve mass and stiffness.

    Parameters
    ----------
    variant : {"lumped", "true"}
        ``lumped`` uses ``N[a, k] = m_k phi_a(q_k)``; ``true`` integrates
        ``phi_a chi_k`` exactly with a two-point Gauss rule on each clipped
        piece (the integrand is quadratic there).
    clipped : ClippedCurve, optional
        Reuse an existing clipping for the ``true`` variant.
    """
    if variant == "lumped":
        N = _lumped_coupling(curve, mesh)
    elif variant == "true":
        if clipped is None:
            clipped = clip_curve_to_mesh(curve, mesh)
        N = _true_coupling(curve, mesh, clipped)
    else:
        raise ValueError(f"unknown integration variant {variant!r}")
    M, A = assemble_surface_operators(curve)
    return CouplingMatrices(N, M, A, curve.vertex_weights, variant)


def assemble_surface_operators(curve):
    """Lumped mass ``diag(m_k)`` and scalar arclength stiffness of the curve.

    Element ``j`` adds ``(1/|s_j|) [[1, -1], [-1, 1]]`` on its two vertices;
    vector unknowns use the matrix once per component.
    """
    curve._require_nondegenerate()
    K = curve.n_vertices
    M = sp.diags(curve.vertex_weights, format="dia")
    e = curve.edges
    inv = 1.0 / curve.lengths
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([inv, inv, -inv, -inv])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(K, K))
    return M, A
