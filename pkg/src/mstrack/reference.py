"""Radially symmetric exact solution with two concentric interfaces.

The inner phase is the annulus ``r1(t) < |z| < r2(t)``. Volume conservation
fixes ``r2 = (v0 + r1^d)^(1/d)``, and ``r1(t)`` is recovered from the
integrated form of its ODE by root finding, which is more accurate than
time stepping the ODE itself.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError

QUAD_TOL = 1e-13
ROOT_XTOL = 1e-14


def _r2_of(r1, v0, d):
    return (v0 + r1 ** d) ** (1.0 / d)


def _time_density(r, v0, d):
    """``dt/dr1`` up to sign: the integrand of the implicit equation for ``r1``."""
    if r <= 0.0:
        return 0.0
    r2 = _r2_of(r, v0, d)
    if d == 2:
        return r * np.log(r2 / r) / (1.0 / r + 1.0 / r2)
    return 0.5 * r * r * (r2 - r) / (r + r2)


def rate(r1, v0, d=2):
    """Right-hand side of the reduced ODE ``d r1 / dt``."""
    r2 = _r2_of(r1, v0, d)
    if d == 2:
        return -(1.0 / r1) * (1.0 / r1 + 1.0 / r2) / np.log(r2 / r1)
    return -(2.0 / r1 ** 2) * (r1 + r2) / (r2 - r1)


def _elapsed(r1, r1_0, v0, d):
    """Time needed for the inner radius to shrink from ``r1_0`` to ``r1``."""
    val, _ = quad(_time_density, r1, r1_0, args=(v0, d), epsabs=QUAD_TOL, epsrel=QUAD_TOL,
                  limit=200)
    return val


@lru_cache(maxsize=64)
def extinction_time(r1_0, r2_0, d=2):
    """Time ``T0`` at which the inner radius reaches zero."""
    _check_radii(r1_0, r2_0)
    v0 = r2_0 ** d - r1_0 ** d
    return _elapsed(0.0, r1_0, v0, d)


def _check_radii(r1_0, r2_0):
    if not 0.0 < r1_0 < r2_0:
        raise DomainError("radii must satisfy 0 < r1 < r2")


def r1_at(t, r1_0, r2_0, d=2):
    """Inner radius at time ``t``.

    Raises
    ------
    DomainError
        If ``t < 0`` or ``t`` is at or beyond the extinction time.
    """
    _check_radii(r1_0, r2_0)
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return float(r1_0)
    T0 = extinction_time(r1_0, r2_0, d)
    if t >= T0:
        raise DomainError(f"t = {t} is not before the extinction time {T0:.12e}")
    v0 = r2_0 ** d - r1_0 ** d
    return brentq(lambda r: _elapsed(r, r1_0, v0, d) - t, 0.0, r1_0, xtol=ROOT_XTOL,
                  rtol=4 * np.finfo(float).eps, maxiter=200)


def r2_at(t, r1_0, r2_0, d=2):
    v0 = r2_0 ** d - r1_0 ** d
    return _r2_of(r1_at(t, r1_0, r2_0, d), v0, d)


@dataclass(frozen=True)
class AnnulusState:
    """Initial radii of the exact solution; radii at later times are derived."""

    r1_0: float
    r2_0: float
    d: int = 2

    def __post_init__(self):
        _check_radii(self.r1_0, self.r2_0)
        if self.d not in (2, 3):
            raise DomainError("dimension must be 2 or 3")

    @property
    def v0(self):
        return self.r2_0 ** self.d - self.r1_0 ** self.d

    @property
    def extinction_time(self):
        return extinction_time(self.r1_0, self.r2_0, self.d)

    def radii(self, t):
        r1 = r1_at(t, self.r1_0, self.r2_0, self.d)
        return r1, _r2_of(r1, self.v0, self.d)


def exact_u(z, t, state):
    """Potential of the exact solution at points ``z`` (shape ``(..., d)``)."""
    r1, r2 = state.radii(t)
    return _u_from_radii(np.linalg.norm(np.asarray(z, dtype=float), axis=-1), r1, r2, state.d)


def _u_from_radii(rho, r1, r2, d):
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    outer = rho >= r2
    inner = rho <= r1
    mid = ~(outer | inner)
    out[outer] = -(d - 1) / r2
    out[inner] = (d - 1) / r1
    rm = rho[mid]
    if d == 2:
        out[mid] = 1.0 / r1 - np.log(rm / r1) * (1.0 / r1 + 1.0 / r2) / np.log(r2 / r1)
    else:
        out[mid] = -4.0 / (r2 - r1) + (2.0 / rm) * (r1 + r2) / (r2 - r1)
    return out


def curve_distance(points, r1, r2):
    """Distance of each point to the union of the circles of radii ``r1``, ``r2``."""
    rho = np.linalg.norm(points, axis=-1)
    return np.minimum(np.abs(rho - r1), np.abs(rho - r2))


class ErrorTracker:
    """Running maxima of the interface and bulk errors over a trajectory.

    Call :meth:`update` once per completed step with the new curve, the
    mesh the step was solved on and the computed potential.
    """

    def __init__(self, state):
        self.state = state
        self.curve_error = 0.0
        self.bulk_error = 0.0

    def update(self, t, curve, mesh=None, U=None):
        r1, r2 = self.state.radii(t)
        self.curve_error = max(self.curve_error, float(curve_distance(curve.points, r1, r2).max()))
        if mesh is not None and U is not None:
            u = _u_from_radii(np.linalg.norm(mesh.vertices, axis=1), r1, r2, self.state.d)
            self.bulk_error = max(self.bulk_error, float(np.abs(U - u).max()))


def curve_error(trajectory, state):
    """``max_m max_k dist(q_k^m, Gamma(t_m))`` over ``(t, curve)`` pairs, ``t > 0``."""
    err = 0.0
    for t, curve in trajectory:
        if t > 0:
            r1, r2 = state.radii(t)
            err = max(err, float(curve_distance(curve.points, r1, r2).max()))
    return err


def bulk_error(trajectory, state):
    """``max_m |U^m - I u(t_m)|_inf`` over ``(t, mesh, U)`` triples."""
    err = 0.0
    for t, mesh, U in trajectory:
        r1, r2 = state.radii(t)
        u = _u_from_radii(np.linalg.norm(mesh.vertices, axis=1), r1, r2, state.d)
        err = max(err, float(np.abs(np.asarray(U) - u).max()))
    return err
