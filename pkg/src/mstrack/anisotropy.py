"""Anisotropic surface energy densities built from SPD quadratic forms.

A density is ``gamma(p) = (sum_l [G_l p . p]^(r/2))^(1/r)`` with symmetric
positive definite ``G_l`` and ``r >= 1``. In the plane the weighted stiffness
of a curve element needs only ``Gt_l = det(G_l) G_l^{-1}``, because for a unit
tangent ``tau`` with normal ``nu`` one has ``Gt_l tau . tau = G_l nu . nu``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .curve import element_normals
from .errors import ConfigError, DomainError


def rotation(theta):
    """``R(theta) = [[cos, sin], [-sin, cos]]`` (clockwise by ``theta``)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True, eq=False)
class AnisotropyDef:
    """Density parameters: a stack of ``L`` SPD matrices and an exponent."""

    G: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim == 2:
            G = G[None]
        if G.ndim != 3 or G.shape[1:] != (2, 2):
            raise ConfigError("anisotropy matrices must have shape (L, 2, 2)")
        if not np.allclose(G, np.transpose(G, (0, 2, 1)), rtol=0, atol=1e-14 * np.abs(G).max()):
            raise ConfigError("anisotropy matrices must be symmetric")
        G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        if np.any(np.linalg.eigvalsh(G) <= 0.0):
            raise ConfigError("anisotropy matrices must be positive definite")
        if not self.r >= 1.0:
            raise ConfigError("anisotropy exponent r must be >= 1")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "r", float(self.r))
        det = np.linalg.det(G)
        Gt = det[:, None, None] * np.linalg.inv(G)
        Gt.setflags(write=False)
        object.__setattr__(self, "G_tilde", Gt)

    @property
    def L(self):
        return len(self.G)

    @property
    def is_isotropic(self):
        return self.L == 1 and np.array_equal(self.G[0], np.eye(2))


def isotropic():
    return AnisotropyDef(np.eye(2), 1.0)


def rotated_diag(entries, r=1.0):
    """Density from ``(angle, (d1, d2), scale)`` triples.

    Each triple gives ``G = scale * R(angle)^T diag(d1, d2) R(angle)``.
    """
    mats = []
    for item in entries:
        try:
            angle, diag, scale = item
            d = np.diag(np.asarray(diag, dtype=float))
        except (TypeError, ValueError):
            raise ConfigError("rotated_diag entries must be (angle, [d1, d2], scale)") from None
        R = rotation(float(angle))
        mats.append(float(scale) * R.T @ d @ R)
    if not mats:
        raise ConfigError("rotated_diag needs at least one entry")
    return AnisotropyDef(np.array(mats), r)


def make_octagon_density(delta=1e-4):
    """Four nearly degenerate forms whose Wulff shape approaches a regular octagon.

    ``gamma(p) = (1/4) sum_{l=1..4} sqrt(D(delta) R(pi/4)^l p . R(pi/4)^l p)``
    with ``D(delta) = diag(1, delta^2)``.
    """
    if not delta > 0:
        raise ConfigError("octagon density needs delta > 0")
    R = rotation(np.pi / 4)
    D = np.diag([1.0, delta * delta])
    mats = []
    Rl = np.eye(2)
    for _ in range(4):
        Rl = R @ Rl
        mats.append(Rl.T @ D @ Rl / 16.0)
    return AnisotropyDef(np.array(mats), 1.0)


def _as_vectors(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise DomainError("gamma expects 2-vectors")
    if np.any(~np.any(p != 0.0, axis=-1)):
        raise DomainError("gamma is only defined for nonzero vectors")
    return p


def gamma_l(defn, ell, p):
    """``sqrt(G_l p . p)``; vectorized over leading axes of ``p``."""
    p = _as_vectors(p)
    G = defn.G[ell]
    return np.sqrt(np.einsum("...i,ij,...j->...", p, G, p))


def _all_gamma_l(defn, p):
    # shape (..., L)
    return np.sqrt(np.einsum("...i,lij,...j->...l", p, defn.G, p))


def gamma(defn, p):
    """Density value, vectorized over leading axes of ``p``."""
    p = _as_vectors(p)
    gl = _all_gamma_l(defn, p)
    if defn.r == 1.0:
        return gl.sum(axis=-1)
    return (gl ** defn.r).sum(axis=-1) ** (1.0 / defn.r)


def gamma_grad(defn, p):
    """Gradient ``gamma(p)^(1-r) sum_l gamma_l(p)^(r-2) G_l p``."""
    p = _as_vectors(p)
    gl = _all_gamma_l(defn, p)
    Gp = np.einsum("lij,...j->...li", defn.G, p)
    r = defn.r
    if r == 1.0:
        return (Gp / gl[..., None]).sum(axis=-2)
    g = (gl ** r).sum(axis=-1) ** (1.0 / r)
    return g[..., None] ** (1.0 - r) * (gl[..., None] ** (r - 2.0) * Gp).sum(axis=-2)


def anisotropic_energy(curve, defn):
    """``|Gamma|_gamma = sum_j |s_j| gamma(nu_j)``."""
    return float(np.dot(curve.lengths, gamma(defn, element_normals(curve))))


def element_weights(defn, old, lagged_normals=None):
    """Per-element 2x2 weight ``W_j`` of the weighted stiffness.

    ``W_j = sum_l [gamma_l(nu*_j)/gamma(nu*_j)]^(r-1) Gt_l / (|s_j| gamma_l(nu_j))``
    where ``nu`` are the normals of ``old`` and ``nu*`` the lagged normals of
    the current iterate (ignored when ``r == 1``).
    """
    nu = element_normals(old)
    gl_old = _all_gamma_l(defn, nu)
    coef = 1.0 / (old.lengths[:, None] * gl_old)
    if defn.r != 1.0:
        if lagged_normals is None:
            lagged_normals = nu
        lag = _as_vectors(lagged_normals)
        gl = _all_gamma_l(defn, lag)
        g = (gl ** defn.r).sum(axis=-1) ** (1.0 / defn.r)
        coef = coef * (gl / g[:, None]) ** (defn.r - 1.0)
    return np.einsum("jl,lab->jab", coef, defn.G_tilde)


def anisotropic_form(old, defn, lagged_normals=None):
    """Assembled ``2K x 2K`` matrix of the weighted stiffness on ``old``.

    Unknowns are ordered ``(x_0, y_0, x_1, y_1, ...)``. Element ``j`` adds
    ``[[W, -W], [-W, W]]`` on its two vertices, so ``X^T A X`` equals
    ``sum_j W_j e_j . e_j`` with ``e_j`` the element edge vector of ``X``.
    """
    W = element_weights(defn, old, lagged_normals)
    e = old.edges
    K = old.n_vertices
    rows, cols, vals = [], [], []
    for (u, v, sign) in ((0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)):
        for a in range(2):
            for b in range(2):
                rows.append(2 * e[:, u] + a)
                cols.append(2 * e[:, v] + b)
                vals.append(sign * W[:, a, b])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * K, 2 * K),
    )


def isotropic_form(old):
    """The plain arclength stiffness in the same interleaved layout."""
    from .coupling import assemble_surface_operators

    _, A = assemble_surface_operators(old)
    return sp.kron(A, sp.identity(2), format="csr")


def facet_angles(curve):
    """Angle in degrees of every element normal, in ``[0, 360)``."""
    nu = element_normals(curve)
    return np.degrees(np.arctan2(nu[:, 1], nu[:, 0])) % 360.0


def octagon_alignment_error(curve):
    """Largest angular distance (degrees) of an element normal from a multiple of 45."""
    a = facet_angles(curve) % 45.0
    return float(np.minimum(a, 45.0 - a).max())
