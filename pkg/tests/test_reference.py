import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from mstrack import reference as ref
from mstrack.curve import Curve
from mstrack.errors import DomainError
from mstrack.shapes import concentric_pair

# frozen from the quadrature + root-finding route; the ODE oracle below
# reproduces them independently
R1_HALF = 1.6595125697516977
T0 = 1.0616190691864098


def _ode_oracle(t, r1_0, r2_0, d=2):
    v0 = r2_0 ** d - r1_0 ** d
    sol = solve_ivp(lambda _, y: [ref.rate(y[0], v0, d)], (0.0, t), [r1_0], method="DOP853",
                    rtol=1e-13, atol=1e-14)
    return sol.y[0, -1]


def test_initial_time_is_exact():
    assert ref.r1_at(0.0, 2.5, 3.0) == 2.5
    assert ref.r2_at(0.0, 2.5, 3.0) == 3.0


def test_radius_at_final_time():
    r1 = ref.r1_at(0.5, 2.5, 3.0)
    assert round(r1, 2) == 1.66
    assert r1 == pytest.approx(R1_HALF, abs=1e-12)
    assert ref.extinction_time(2.5, 3.0) == pytest.approx(T0, abs=1e-12)


@pytest.mark.parametrize("t", [0.01, 0.1, 0.25, 0.5, 0.9])
def test_matches_ode_integration(t):
    assert ref.r1_at(t, 2.5, 3.0) == pytest.approx(_ode_oracle(t, 2.5, 3.0), abs=1e-8)


@pytest.mark.parametrize("t", [0.02, 0.1, 0.3])
def test_three_dimensional_branch_matches_ode(t):
    assert ref.r1_at(t, 2.5, 3.0, d=3) == pytest.approx(_ode_oracle(t, 2.5, 3.0, 3), abs=1e-8)


@settings(max_examples=25)
@given(st.floats(0.0, 0.95))
def test_volume_invariant_and_monotonicity(frac):
    t = frac * T0
    r1, r2 = ref.AnnulusState(2.5, 3.0).radii(t)
    assert r2 * r2 - r1 * r1 == pytest.approx(9.0 - 6.25, abs=1e-12)
    r1b, r2b = ref.AnnulusState(2.5, 3.0).radii(t + 0.01)
    assert r1b < r1 and r2b < r2


def test_beyond_extinction_rejected():
    with pytest.raises(DomainError):
        ref.r1_at(T0 + 1e-6, 2.5, 3.0)
    with pytest.raises(DomainError):
        ref.r1_at(-0.1, 2.5, 3.0)
    with pytest.raises(DomainError):
        ref.r1_at(0.1, 3.0, 2.5)
    with pytest.raises(DomainError):
        ref.AnnulusState(2.5, 3.0, d=4)


@pytest.mark.parametrize("d", [2, 3])
def test_potential_branches(d):
    state = ref.AnnulusState(2.5, 3.0, d)
    t = 0.1
    r1, r2 = state.radii(t)
    z = np.array([[0.0, 0.0, 0.0][:d], [3.9] + [0.0] * (d - 1)])
    np.testing.assert_allclose(ref.exact_u(z, t, state), [(d - 1) / r1, -(d - 1) / r2],
                               rtol=1e-15)
    rho = np.linspace(r1, r2, 7)[1:-1]
    vals = ref._u_from_radii(rho, r1, r2, d)
    assert np.all(np.diff(vals) < 0)


def test_annulus_branch_continuous_at_interfaces():
    r1, r2 = 2.0, 2.8
    eps = 1e-9
    for d in (2, 3):
        lo = ref._u_from_radii(np.array([r1 + eps, r2 - eps]), r1, r2, d)
        np.testing.assert_allclose(lo, [(d - 1) / r1, -(d - 1) / r2], atol=1e-8)


def test_errors_vanish_on_exact_vertices():
    state = ref.AnnulusState(2.5, 3.0)
    traj = []
    for t in (0.0, 0.1, 0.2):
        r1, r2 = state.radii(t)
        c = concentric_pair(r1, r2, 64)
        traj.append((t, c))
    assert ref.curve_error(traj, state) < 1e-15
    tracker = ref.ErrorTracker(state)
    for t, c in traj[1:]:
        tracker.update(t, c)
    assert tracker.curve_error < 1e-15


def test_bulk_error_against_interpolant():
    from mstrack import bulk

    state = ref.AnnulusState(2.5, 3.0)
    mesh = bulk.uniform_mesh(4.0, 8)
    u = ref.exact_u(mesh.vertices, 0.2, state)
    assert ref.bulk_error([(0.2, mesh, u)], state) == 0.0
    assert ref.bulk_error([(0.2, mesh, u + 0.25)], state) == pytest.approx(0.25)


def test_curve_distance_to_union():
    pts = np.array([[2.0, 0.0], [0.0, 2.75], [5.0, 0.0]])
    np.testing.assert_allclose(ref.curve_distance(pts, 2.5, 3.0), [0.5, 0.25, 2.0])
