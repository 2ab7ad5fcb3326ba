"""Time stepping for the coupled bulk-interface system.

Each step solves for the bulk potential ``U``, the curvature ``kappa`` and the
new vertex positions ``X`` on the current curve ``Gamma^m``::

    dt A U                 - N W (X - q)   = 0
    N^T U      - M kappa                   = 0
               W^T M kappa + S (X - q)     = -S q

where ``A`` is the bulk stiffness, ``N`` the bulk-curve coupling, ``M`` the
lumped curve mass, ``S`` the (possibly anisotropic) curve stiffness and ``W``
maps a vertex vector field to its vertexwise dot product with a normal field
``omega``. The linear scheme uses the vertex normals of ``Gamma^m``; the
volume-preserving scheme iterates on the time-averaged normals of the
segment ``Gamma^m -> Gamma^{m+1}``, which makes the enclosed volume exact.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import anisotropy as aniso
from .bulk import build_adaptive, stiffness_matrix
from .coupling import assemble_coupling
from .curve import averaged_vertex_normal, element_normals, enclosed_volume, equidistribution_ratio, is_simple, vertex_normal
from .errors import ConfigError, NonConvergenceError, SolverError

log = logging.getLogger(__name__)

SCHEMES = ("bgn_linear", "sp_fixed_point")
INTEGRATIONS = ("lumped", "true")
#: relative slack allowed in the per-step energy inequality
STABILITY_RTOL = 1e-11
# iterative refinement of later fixed-point iterates
REFINE_RTOL = 1e-15
REFINE_FLOOR = 1e-11
REFINE_RATE = 0.5
REFINE_MAX = 60


@dataclass(frozen=True)
class SchemeConfig:
    """Discretization parameters of one run."""

    scheme: str = "sp_fixed_point"
    integration: str = "lumped"
    anisotropy: object = None
    dt: float = 1e-3
    T: float = 1.0
    tol: float = 1e-10
    max_fixed_point_iters: int = 100
    H: float = 4.0
    N_f: int = 128
    N_c: int = 1
    band: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.integration not in INTEGRATIONS:
            raise ConfigError(f"integration must be one of {INTEGRATIONS}, got {self.integration!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.T >= self.dt:
            raise ConfigError("T must be at least dt")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_fixed_point_iters < 1:
            raise ConfigError("max_fixed_point_iters must be at least 1")
        if self.anisotropy is not None and not isinstance(self.anisotropy, aniso.AnisotropyDef):
            raise ConfigError("anisotropy must be an AnisotropyDef or None")

    def time_grid(self):
        """Step end times: uniform ``dt`` with a shorter final step, ending at ``T``."""
        M = math.ceil(self.T / self.dt - 1e-9)
        t = self.dt * np.arange(1, M + 1, dtype=float)
        t[-1] = self.T
        # a final step of (numerically) zero length is dropped
        if M > 1 and t[-1] - t[-2] <= 1e-12 * self.T:
            t = t[:-1]
            t[-1] = self.T
        return t


@dataclass
class StepDiagnostics:
    m: int
    t: float
    energy: float
    energy_aniso: float
    volume: float
    v_rel: float
    dirichlet_energy: float
    stability_residual: float
    fp_iters: int
    equi_ratio: float

    FIELDS = ("m", "t", "energy", "energy_aniso", "volume", "v_rel", "dirichlet_energy",
              "stability_residual", "fp_iters", "equi_ratio")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class StepResult:
    U: np.ndarray
    X: np.ndarray
    kappa: np.ndarray
    iterations: int
    dirichlet_energy: float
    diagnostics: StepDiagnostics = None


class StepOperators:
    """Everything about a step that depends only on ``Gamma^m`` and the mesh."""

    def __init__(self, curve, mesh, config):
        self.curve = curve
        self.mesh = mesh
        self.config = config
        self.A = stiffness_matrix(mesh)
        cm = assemble_coupling(curve, mesh, config.integration)
        self.N = cm.N
        self.M = cm.M
        self.weights = cm.weights
        self.anisotropy = config.anisotropy
        if self.anisotropy is None:
            self.S = sp.kron(cm.A, sp.identity(2), format="csr")
        else:
            self.S = aniso.anisotropic_form(curve, self.anisotropy)
        self.q = curve.points.ravel()
        self._lu = None
        self.last_solution = None

    def stiffness(self, lagged_normals):
        """Curve stiffness for the current iterate (changes only when ``r > 1``)."""
        if self.anisotropy is None or self.anisotropy.r == 1.0:
            return self.S
        return aniso.anisotropic_form(self.curve, self.anisotropy, lagged_normals)

    def system(self, omega, dt, S=None):
        """Block matrix and right-hand side for normal field ``omega``."""
        S = self.S if S is None else S
        K = self.curve.n_vertices
        nb = self.mesh.n_vertices
        k2 = np.repeat(np.arange(K), 2)
        W = sp.csr_matrix((np.asarray(omega, dtype=float).ravel(), (k2, np.arange(2 * K))),
                          shape=(K, 2 * K))
        NW = (self.N @ W).tocsr()
        WtM = (W.T @ self.M).tocsr()
        system = sp.bmat([
            [dt * self.A, None, -NW],
            [self.N.T, -self.M, None],
            [None, WtM, S],
        ], format="csc")
        rhs = np.zeros(nb + 3 * K)
        rhs[nb + K:] = -(S @ self.q)
        return system, rhs

    def _factor(self, system):
        try:
            with np.errstate(all="raise"):
                self._lu = spla.splu(system, permc_spec="COLAMD")
        except (RuntimeError, FloatingPointError) as exc:
            raise SolverError(f"linear system could not be solved: {exc}") from None
        return self._lu

    def _refine(self, system, rhs, x):
        """Iterative refinement with the last factorization as preconditioner.

        Stops once the correction is at rounding level, or stagnates below
        ``REFINE_FLOOR`` (ill-conditioned systems cannot do better). Returns
        ``None`` when the correction stops shrinking above that floor, in
        which case the caller refactors.
        """
        prev = np.inf
        for _ in range(REFINE_MAX):
            dx = self._lu.solve(rhs - system @ x)
            x = x + dx
            scale = max(np.abs(x).max(), 1.0)
            size = np.abs(dx).max()
            if size <= REFINE_RTOL * scale:
                return x
            if size > REFINE_RATE * prev:
                return x if prev <= REFINE_FLOOR * scale else None
            prev = size
        return None

    def solve(self, omega, dt, S=None, guess=None):
        """One linear solve with normal field ``omega``; returns ``(U, kappa, X)``.

        Without ``guess`` the system is factorized afresh. With ``guess`` the
        previous factorization is reused via iterative refinement, falling
        back to a new factorization if that converges slowly.
        """
        system, rhs = self.system(omega, dt, S)
        sol = None
        if guess is not None and self._lu is not None:
            sol = self._refine(system, rhs, guess)
        if sol is None:
            sol = self._factor(system).solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverError("linear solve produced non-finite values")
        self.last_solution = sol
        nb, K = self.mesh.n_vertices, self.curve.n_vertices
        U = sol[:nb]
        kappa = sol[nb:nb + K]
        X = (self.q + sol[nb + K:]).reshape(K, 2)
        return U, kappa, X

    def dirichlet(self, U):
        return float(U @ (self.A @ U))


def linear_step(curve, mesh, omega, config, dt=None, ops=None):
    """Solve the linear system once with the given vertex normal field."""
    ops = ops or StepOperators(curve, mesh, config)
    dt = config.dt if dt is None else dt
    U, kappa, X = ops.solve(omega, dt)
    return StepResult(U, X, kappa, 1, ops.dirichlet(U))


def fixed_point_step(curve, mesh, config, dt=None, ops=None, strict=True):
    """Lagged iteration on the time-averaged normals until ``|X^{i+1} - X^i|_inf <= tol``.

    The first iterate uses ``Gamma^{m+1,0} = Gamma^m`` and therefore equals
    the linear step.

    Raises
    ------
    NonConvergenceError
        If ``strict`` and the iteration cap is reached first.
    """
    ops = ops or StepOperators(curve, mesh, config)
    dt = config.dt if dt is None else dt
    X_prev = curve.points
    lagged = None
    residual = np.inf
    for it in range(1, config.max_fixed_point_iters + 1):
        trial = curve.with_points(X_prev)
        omega = averaged_vertex_normal(curve, trial)
        if ops.anisotropy is not None and ops.anisotropy.r != 1.0:
            lagged = element_normals(trial)
        guess = ops.last_solution if it > 1 else None
        U, kappa, X = ops.solve(omega, dt, ops.stiffness(lagged), guess=guess)
        residual = float(np.abs(X - X_prev).max())
        X_prev = X
        if residual <= config.tol:
            return StepResult(U, X, kappa, it, ops.dirichlet(U))
    if strict:
        raise NonConvergenceError(
            f"fixed-point iteration did not reach tol={config.tol:g} in "
            f"{config.max_fixed_point_iters} iterations (last change {residual:.3e})",
            residual, config.max_fixed_point_iters)
    return StepResult(U, X, kappa, config.max_fixed_point_iters, ops.dirichlet(U))


def _anisotropic_step_with_lag(curve, mesh, config, dt, ops):
    """Linear scheme with anisotropy: normals and ratio weights frozen at ``Gamma^m``."""
    lagged = element_normals(curve) if ops.anisotropy is not None else None
    U, kappa, X = ops.solve(vertex_normal(curve), dt, ops.stiffness(lagged))
    return StepResult(U, X, kappa, 1, ops.dirichlet(U))


def take_step(curve, mesh, config, dt):
    """Assemble and solve one step of the configured scheme."""
    ops = StepOperators(curve, mesh, config)
    if config.scheme == "bgn_linear":
        return _anisotropic_step_with_lag(curve, mesh, config, dt, ops)
    return fixed_point_step(curve, mesh, config, dt=dt, ops=ops)


def energies(curve, anisotropy):
    length = curve.length
    if anisotropy is None:
        return length, length
    return length, aniso.anisotropic_energy(curve, anisotropy)


@dataclass
class SimulationResult:
    curve: object
    diagnostics: list
    mesh: object = None
    U: np.ndarray = None
    snapshots: dict = field(default_factory=dict)
    curve_error: float = float("nan")
    bulk_error: float = float("nan")
    wall_time: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def max_stability_violation(self):
        """Largest relative excess of the energy inequality (``<= 0`` when stable)."""
        worst = -np.inf
        prev = None
        for d in self.diagnostics:
            e = d.energy_aniso
            if prev is not None:
                worst = max(worst, d.stability_residual / prev)
            prev = e
        return worst


def _snapshot_steps(times, grid):
    """Map requested output times to the nearest step index (0 = initial)."""
    full = np.concatenate([[0.0], grid])
    out = {}
    for ts in times:
        idx = int(np.argmin(np.abs(full - ts)))
        out.setdefault(idx, float(ts))
    return out


def run_simulation(curve, config, snapshot_times=(), snapshot_every=0, reference=None,
                   on_step=None, check_simple_every=1):
    """Evolve ``curve`` from ``t = 0`` to ``config.T``.

    Parameters
    ----------
    snapshot_times : sequence of float
        Times at which to keep a copy of the curve (nearest step).
    snapshot_every : int
        Additionally keep every ``n``-th step when positive.
    reference : AnnulusState, optional
        Track interface and bulk errors against the exact solution.
    on_step : callable, optional
        Called as ``on_step(diag, curve)`` after each step.
    check_simple_every : int
        Test the curve for self-intersections every this many steps (0 never);
        a hit is logged and recorded as a warning, the run continues.
    """
    from .reference import ErrorTracker

    t0 = time.perf_counter()
    grid = config.time_grid()
    snap_at = _snapshot_steps(snapshot_times, grid)
    tracker = ErrorTracker(reference) if reference is not None else None
    length, e_an = energies(curve, config.anisotropy)
    vol0 = enclosed_volume(curve)
    diags = [StepDiagnostics(0, 0.0, length, e_an, vol0, 0.0, 0.0, 0.0, 0,
                             equidistribution_ratio(curve))]
    result = SimulationResult(curve, diags)
    if 0 in snap_at or snapshot_every:
        result.snapshots[0.0] = curve
    if on_step:
        on_step(diags[0], curve)
    t_prev = 0.0
    mesh = U = None
    for m, t in enumerate(grid, start=1):
        dt = t - t_prev
        mesh = build_adaptive(curve, config.H, config.N_f, config.N_c, band=config.band)
        step = take_step(curve, mesh, config, dt)
        new = curve.with_points(step.X)
        length, e_new = energies(new, config.anisotropy)
        vol = enclosed_volume(new)
        d = StepDiagnostics(
            m, float(t), length, e_new, vol, (vol0 - vol) / vol0, step.dirichlet_energy,
            e_new + dt * step.dirichlet_energy - e_an, step.iterations,
            equidistribution_ratio(new))
        if d.stability_residual > STABILITY_RTOL * e_an:
            log.warning("step %d: energy inequality violated by %.3e", m, d.stability_residual)
        diags.append(d)
        if tracker is not None:
            tracker.update(t, new, mesh, step.U)
        if check_simple_every and m % check_simple_every == 0 and not is_simple(new):
            msg = f"step {m} (t={t:.6g}): curve self-intersects"
            log.warning(msg)
            result.warnings.append(msg)
        curve, e_an, t_prev, U = new, e_new, t, step.U
        if m in snap_at or (snapshot_every and m % snapshot_every == 0) or m == len(grid):
            result.snapshots[float(t)] = curve
        if on_step:
            on_step(d, curve)
    result.curve = curve
    result.mesh = mesh
    result.U = U
    if tracker is not None:
        result.curve_error = tracker.curve_error
        result.bulk_error = tracker.bulk_error
    result.wall_time = time.perf_counter() - t0
    return result


def with_overrides(config, **kw):
    return replace(config, **kw)
