import numpy as np
import pytest
from hypothesis import given, strategies as st

from mstrack import curve as cv
from mstrack.errors import GeometryError
from mstrack.shapes import circle, concentric_pair, faceted_octagon_star, stadium


@st.composite
def star_curves(draw, min_k=3, max_k=40):
    """Random star-shaped polygons around the origin, clockwise."""
    k = draw(st.integers(min_k, max_k))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    theta = np.sort(rng.uniform(0, 2 * np.pi, k))
    gaps = np.diff(np.concatenate([theta, [theta[0] + 2 * np.pi]]))
    if gaps.min() < 1e-3:
        theta = 2 * np.pi * np.arange(k) / k + rng.uniform(0, 0.1)
    r = rng.uniform(0.5, 2.0, k)
    pts = np.stack([r * np.cos(-theta), r * np.sin(-theta)], axis=1)
    return cv.Curve.from_loops([pts])


@st.composite
def curve_pairs(draw):
    old = draw(star_curves())
    seed = draw(st.integers(0, 2 ** 32 - 1))
    scale = draw(st.floats(1e-6, 0.5))
    rng = np.random.default_rng(seed)
    new = old.with_points(old.points + scale * rng.normal(size=old.points.shape))
    return old, new


def test_square_from_circle_generator():
    c = circle(1.0, 4)
    np.testing.assert_array_equal(c.points, [[1, 0], [0, -1], [-1, 0], [0, 1]])
    assert cv.enclosed_volume(c) == 2.0
    nu = cv.element_normals(c)
    mid = 0.5 * (c.points + np.roll(c.points, -1, axis=0))
    assert np.all(np.einsum("ij,ij->i", nu, mid) > 0)


def test_orientation_is_fixed_on_input():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)  # anticlockwise
    c = cv.Curve.from_loops([square])
    assert cv.enclosed_volume(c) == pytest.approx(1.0)
    kept = cv.Curve.from_loops([square], orient=False)
    assert cv.enclosed_volume(kept) == pytest.approx(-1.0)


def test_annulus_hole_runs_anticlockwise():
    c = concentric_pair(1.0, 2.0, 64)
    vols = cv.loop_volumes(c)
    assert vols[0] > 0 > vols[1]
    exact = np.pi * (4 - 1) * np.sinc(1 / 32) * np.cos(np.pi / 32)  # inscribed polygons
    assert cv.enclosed_volume(c) == pytest.approx(vols.sum())
    assert cv.enclosed_volume(c) == pytest.approx(exact, rel=1e-12)


def test_zero_length_element_rejected():
    with pytest.raises(GeometryError):
        cv.Curve.from_loops([np.array([[0, 0], [1, 0], [1, 0], [0, 1]], dtype=float)])


def test_bad_shapes_rejected():
    with pytest.raises(GeometryError):
        cv.Curve(np.zeros((4, 3)), (0, 4))
    with pytest.raises(GeometryError):
        cv.Curve(np.zeros((4, 2)), (0, 2, 4))
    c = circle(1.0, 8)
    with pytest.raises(GeometryError):
        c.with_points(np.zeros((7, 2)))


def test_lumped_inner_product_of_constants_is_length():
    c = stadium(7, 1, 64)
    assert cv.lumped_inner_product(c, np.ones(64), np.ones(64)) == pytest.approx(c.length)
    assert c.vertex_weights.sum() == pytest.approx(c.length)


def test_lumped_inner_product_limits_admit_jumps():
    c = circle(1.0, 6)
    u = np.zeros((6, 2))
    u[0] = [1.0, 0.0]  # only the left limit of element 0 is nonzero
    assert cv.lumped_inner_product(c, u, u, limits=True) == pytest.approx(0.5 * c.lengths[0])
    with pytest.raises(GeometryError):
        cv.lumped_inner_product(c, np.ones(5), np.ones(5))


def test_vertex_normal_of_regular_polygon():
    K, r = 24, 1.7
    c = circle(r, K)
    w = cv.vertex_normal(c)
    radial = c.points / r
    np.testing.assert_allclose(w, radial * np.cos(np.pi / K), atol=1e-14)


def test_stiffness_kills_constants_and_pairs_to_length():
    c = faceted_octagon_star(96)
    np.testing.assert_allclose(cv.stiffness_apply(c, np.ones(96)), 0.0, atol=1e-12)
    x = c.points
    assert np.einsum("ij,ij->", x, cv.stiffness_apply(c, x)) == pytest.approx(c.length)


@pytest.mark.parametrize("K", [16, 64, 256])
def test_curvature_of_regular_polygon(K):
    r = 1.3
    kappa = cv.conformal_curvature(circle(r, K))
    np.testing.assert_allclose(kappa, -1.0 / r, rtol=2 * (np.pi / K) ** 2)
    assert cv.conformality_residual(circle(r, K), kappa) < 1e-12


def test_equidistribution_and_reflex_markers():
    assert cv.equidistribution_ratio(circle(1.0, 32)) == pytest.approx(1.0)
    assert not cv.reflex_vertices(circle(1.0, 32)).any()
    assert not cv.reflex_vertices(stadium(7, 1, 128)).any()
    assert cv.reflex_vertices(faceted_octagon_star(256)).sum() == 8


def test_self_intersection_detection():
    assert cv.is_simple(faceted_octagon_star(64))
    assert cv.is_simple(concentric_pair(1.0, 2.0, 32))
    bow = cv.Curve.from_loops([np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)],
                              orient=False)
    assert not cv.is_simple(bow)
    crossing = cv.Curve.from_loops([circle(1.0, 16).points, circle(1.0, 16, (0.5, 0)).points],
                                   orient=False)
    assert not cv.is_simple(crossing)


@given(curve_pairs())
def test_volume_difference_equals_averaged_normal_pairing(pair):
    old, new = pair
    lhs, rhs = cv.volume_difference_identity(old, new)
    scale = max(abs(cv.enclosed_volume(old)), abs(cv.enclosed_volume(new)))
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(star_curves())
def test_averaged_normals_reduce_to_current_normals(c):
    np.testing.assert_allclose(cv.averaged_element_normals(c, c), cv.element_normals(c),
                               rtol=0, atol=1e-13)
    np.testing.assert_allclose(cv.averaged_vertex_normal(c, c), cv.vertex_normal(c),
                               rtol=0, atol=1e-13)


@given(star_curves(), st.floats(-3, 3), st.floats(-3, 3))
def test_averaged_normal_invariant_under_translation(c, dx, dy):
    moved = c.with_points(c.points + [dx, dy])
    np.testing.assert_allclose(cv.averaged_element_normals(c, moved), cv.element_normals(c),
                               atol=1e-12)


def _normal_3d_by_quadrature(p, q):
    x, w = np.polynomial.legendre.leggauss(4)
    t = 0.5 * (x + 1)
    acc = np.zeros(3)
    for ti, wi in zip(t, 0.5 * w):
        v = p + ti * (q - p)
        acc += wi * np.cross(v[1] - v[0], v[2] - v[0])
    return acc / np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0]))


def test_averaged_normal_3d_matches_quadrature(rng):
    for _ in range(500):
        p = rng.normal(size=(3, 3))
        q = p + rng.normal(scale=rng.uniform(0.01, 1.0), size=(3, 3))
        np.testing.assert_allclose(cv.averaged_element_normal_3d(p, q),
                                   _normal_3d_by_quadrature(p, q), rtol=0, atol=1e-12)


def test_averaged_normal_3d_stationary_is_unit_normal(rng):
    p = rng.normal(size=(3, 3))
    n = np.cross(p[1] - p[0], p[2] - p[0])
    np.testing.assert_allclose(cv.averaged_element_normal_3d(p, p), n / np.linalg.norm(n),
                               atol=1e-15)
    with pytest.raises(GeometryError):
        cv.averaged_element_normal_3d(np.zeros((3, 3)), p)


def test_pair_connectivity_checked():
    with pytest.raises(GeometryError):
        cv.averaged_element_normals(circle(1, 8), concentric_pair(1, 2, 8))


def _unit_square():
    return cv.Curve.from_loops([np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)])


def test_hand_evaluated_square_quantities():
    sq = _unit_square()
    u = np.zeros(4)
    u[0] = 1.0
    assert cv.lumped_inner_product(sq, u, u) == pytest.approx(1.0)
    w = cv.vertex_normal(sq)
    np.testing.assert_allclose(np.linalg.norm(w, axis=1), np.sqrt(0.5), rtol=1e-15)
    nu = cv.element_normals(sq)
    np.testing.assert_allclose(w, 0.5 * (nu[sq.prev_element] + nu), atol=1e-16)


def test_flat_vertex_normal_is_common_normal():
    c = cv.Curve.from_loops([np.array([[0, 0], [1, 0], [2, 0], [1, 1]], dtype=float)],
                            orient=False)
    np.testing.assert_allclose(cv.vertex_normal(c)[1], [0.0, 1.0], atol=1e-16)


def test_averaged_normal_hand_example():
    old = cv.Curve.from_loops([np.array([[0, 0], [1, 0], [0.5, -1]])], orient=False)
    new = old.with_points(np.array([[0, 0], [1, 1], [0.5, -1]]))
    np.testing.assert_allclose(cv.averaged_element_normal_2d(old, new, 0), [-0.5, 1.0],
                               atol=1e-16)


def test_vertex_normal_projection_identity(rng):
    c = faceted_octagon_star(80)
    new = c.with_points(c.points + 0.05 * rng.normal(size=c.points.shape))
    for old, nu, w in ((c, cv.element_normals(c), cv.vertex_normal(c)),
                       (c, cv.averaged_element_normals(c, new), cv.averaged_vertex_normal(c, new))):
        for k in range(old.n_vertices):
            phi = np.zeros(old.n_vertices)
            phi[k] = 1.0
            lhs = cv.lumped_inner_product(old, w, np.outer(phi, [1.0, 1.0]))
            # piecewise-constant normal against the hat function: half of each element
            e = old.edges
            rhs = 0.5 * sum(old.lengths[j] * nu[j].sum() for j in range(old.n_elements)
                            if k in e[j])
            assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-15)


def test_volume_identity_examples(rng):
    c = circle(1.0, 64)
    assert cv.volume_difference_identity(c, c) == (0.0, 0.0)
    moved = c.with_points(c.points + [0.3, -0.2])
    lhs, rhs = cv.volume_difference_identity(c, moved)
    assert abs(lhs) < 1e-14 and abs(rhs) < 1e-12 * c.length
    bumped = c.with_points(c.points + 0.1 * rng.uniform(-1, 1, c.points.shape))
    lhs, rhs = cv.volume_difference_identity(c, bumped)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_regular_polygon_area_and_perimeter():
    K, r = 40, 2.2
    c = circle(r, K)
    assert cv.enclosed_volume(c) == pytest.approx(0.5 * K * r * r * np.sin(2 * np.pi / K), rel=1e-14)
    assert c.length == pytest.approx(K * 2 * np.sin(np.pi / K) * r, rel=1e-14)


def test_uneven_split_ratio():
    c = cv.Curve.from_loops([np.array([[0, 0], [0.25, 0], [1, 0], [1, 1], [0, 1]], dtype=float)])
    assert cv.equidistribution_ratio(c) == 4.0
