import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullsim.geometry import (
    Ball,
    Box,
    GeometryError,
    HPolytope,
    Interval,
    as_interval,
    chebyshev_center,
    contains,
    convex_hull,
    distance_to_body,
    distance_to_hull,
    min_norm_point_distance,
    norm_bound,
    normal_cone_check,
    project,
    support,
)
from hullsim.oracle import brute_force_hull_distance


def unit_square():
    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    offsets = np.array([1.0, 0.0, 1.0, 0.0])
    return HPolytope(normals, offsets)  # [0, 1]^2


def random_body(kind, rng):
    if kind == "interval":
        lo = rng.uniform(-3, 1)
        return Interval(lo, lo + rng.uniform(0.2, 3))
    if kind == "box":
        lo = rng.uniform(-3, 0, size=2)
        return Box(lo, lo + rng.uniform(0.2, 3, size=2))
    if kind == "ball":
        return Ball(rng.uniform(-2, 2, size=2), rng.uniform(0.2, 3))
    if kind == "hpolytope":
        # random bounded polygon with well-separated face normals (near-parallel
        # faces stall the alternating-projection solver)
        k = int(rng.integers(4, 8))
        angles = (np.arange(k) + rng.uniform(-0.3, 0.3, size=k)) * (2 * np.pi / k)
        normals = np.column_stack([np.cos(angles), np.sin(angles)])
        center = rng.uniform(-1, 1, size=2)
        offsets = normals @ center + rng.uniform(0.3, 2.0, size=k)
        return HPolytope(normals, offsets)
    raise ValueError(kind)


BODY_KINDS = ["interval", "box", "ball", "hpolytope"]


class TestProjection:
    def test_interval_clamps_to_endpoint(self):
        assert project(Interval(-1, 1), np.array([2.0])) == pytest.approx(1.0)

    def test_ball_radial_scaling(self):
        p = project(Ball(np.zeros(2), 1.0), np.array([3.0, 4.0]))
        np.testing.assert_allclose(p, [0.6, 0.8], atol=1e-12)

    def test_square_face_projection(self):
        p = project(unit_square(), np.array([2.0, 0.5]))
        np.testing.assert_allclose(p, [1.0, 0.5], atol=1e-9)

    def test_inside_point_is_fixed(self):
        x = np.array([0.25, 0.75])
        np.testing.assert_array_equal(project(unit_square(), x), x)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(5)
        body = unit_square()
        pts = rng.uniform(-2, 3, size=(40, 2))
        batch = project(body, pts)
        for i, x in enumerate(pts):
            np.testing.assert_array_equal(batch[i], project(body, x))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(GeometryError):
            project(Ball(np.zeros(2), 1.0), np.array([1.0, 2.0, 3.0]))

    @pytest.mark.parametrize("kind", BODY_KINDS)
    def test_idempotent_and_nonexpansive(self, kind):
        rng = np.random.default_rng(17)
        for _ in range(20):
            body = random_body(kind, rng)
            x = rng.uniform(-5, 5, size=(30, body.dim))
            p = project(body, x)
            np.testing.assert_allclose(project(body, p), p, atol=1e-9)
            y = rng.uniform(-5, 5, size=(30, body.dim))
            q = project(body, y)
            lhs = np.linalg.norm(p - q, axis=1)
            rhs = np.linalg.norm(x - y, axis=1)
            assert np.all(lhs <= rhs + 1e-9)

    @pytest.mark.parametrize("kind", BODY_KINDS)
    def test_variational_inequality(self, kind):
        rng = np.random.default_rng(23)
        for _ in range(10):
            body = random_body(kind, rng)
            bpts = body.boundary_points(16, rng)
            for x in rng.uniform(-4, 4, size=(10, body.dim)):
                p = project(body, x)
                inner = (bpts - p) @ (x - p)
                assert np.all(inner <= 1e-9)


class TestContains:
    def test_interior_point(self):
        assert contains(Interval(-1, 1), np.array([0.0]), tol=0.0)

    def test_tolerance_band_on_ball(self):
        assert contains(Ball(np.zeros(2), 1.0), np.array([1 + 1e-12, 0.0]), tol=1e-9)

    def test_outside_square(self):
        assert not contains(unit_square(), np.array([1.5, 0.5]), tol=1e-9)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(GeometryError):
            contains(Interval(0, 1), np.array([0.5]), tol=-1.0)


class TestDistance:
    def test_interval(self):
        assert distance_to_body(Interval(-1, 1), np.array([3.0])) == pytest.approx(2.0)

    def test_ball(self):
        d = distance_to_body(Ball(np.zeros(2), 1.0), np.array([3.0, 4.0]))
        assert d == pytest.approx(4.0)

    def test_square_corner(self):
        d = distance_to_body(unit_square(), np.array([2.0, 2.0]))
        assert d == pytest.approx(np.sqrt(2), abs=1e-9)

    @pytest.mark.parametrize("kind", BODY_KINDS)
    def test_support_lower_bound(self, kind):
        # distance is at least the worst separation over probe directions
        rng = np.random.default_rng(3)
        body = random_body(kind, rng)
        for x in rng.uniform(-4, 4, size=(25, body.dim)):
            d = distance_to_body(body, x)
            for u in rng.standard_normal((8, body.dim)):
                sep = (u @ x - support(body, u)) / np.linalg.norm(u)
                assert d >= sep - 1e-9


class TestSupport:
    def test_interval(self):
        assert support(Interval(-1, 1), np.array([1.0])) == pytest.approx(1.0)

    def test_ball_offset_center(self):
        val = support(Ball(np.array([1.0, 0.0]), 2.0), np.array([0.0, 1.0]))
        assert val == pytest.approx(2.0)

    def test_square_diagonal(self):
        assert support(unit_square(), np.array([1.0, 1.0])) == pytest.approx(2.0, abs=1e-9)

    def test_zero_direction_rejected(self):
        with pytest.raises(GeometryError):
            support(unit_square(), np.zeros(2))

    def test_unbounded_polytope_rejected(self):
        with pytest.raises(GeometryError):
            HPolytope(np.array([[1.0, 0.0]]), np.array([1.0]))

    def test_empty_polytope_rejected(self):
        normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        with pytest.raises(GeometryError):
            HPolytope(normals, np.array([-1.0, -1.0, 1.0, 1.0]))


class TestConvexHull:
    def test_one_dimensional(self):
        hull = convex_hull(np.array([0.3, -0.7, 0.1]))
        np.testing.assert_array_equal(hull.vertices, [[-0.7], [0.3]])

    def test_interior_point_dropped(self):
        hull = convex_hull(np.array([[0, 0], [1, 0], [0, 1], [0.2, 0.2]], dtype=float))
        assert hull.vertices.shape == (3, 2)
        assert [0.2, 0.2] not in hull.vertices.tolist()

    def test_circle_points_all_extreme(self):
        ang = np.arange(8) * np.pi / 4
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        hull = convex_hull(pts)
        assert hull.vertices.shape == (8, 2)

    def test_counterclockwise_order(self):
        hull = convex_hull(np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float))
        v = hull.vertices
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        assert area2 > 0

    def test_collinear_dropped(self):
        hull = convex_hull(np.array([[0, 0], [1, 0], [2, 0], [1, 1]], dtype=float))
        assert hull.vertices.shape == (3, 2)

    def test_empty_rejected(self):
        with pytest.raises(GeometryError):
            convex_hull([])

    def test_high_dim_keeps_generators(self):
        pts = np.random.default_rng(0).standard_normal((10, 3))
        hull = convex_hull(pts)
        np.testing.assert_array_equal(hull.vertices, pts)

    @given(
        st.lists(
            st.tuples(
                st.floats(-100, 100, allow_nan=False),
                st.floats(-100, 100, allow_nan=False),
            ),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_generators_inside_hull(self, pts):
        hull = convex_hull(np.array(pts, dtype=float))
        for p in hull.points:
            assert distance_to_hull(hull, p, tol=1e-7) <= 1e-6


class TestHullDistance:
    def test_point_inside_1d(self):
        hull = convex_hull(np.array([-0.7, 0.3]))
        assert distance_to_hull(hull, np.array([0.0])) == 0.0

    def test_triangle_outside_corner(self):
        hull = convex_hull(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
        d = distance_to_hull(hull, np.array([1.0, 1.0]))
        assert d == pytest.approx(np.sqrt(2) / 2, abs=1e-9)

    def test_square_interior(self):
        hull = convex_hull(np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float))
        assert distance_to_hull(hull, np.zeros(2)) == 0.0

    def test_singleton(self):
        hull = convex_hull(np.array([[1.0, 2.0]]))
        assert distance_to_hull(hull, np.array([4.0, 6.0])) == pytest.approx(5.0)

    def test_bad_tolerance(self):
        hull = convex_hull(np.array([[0.0, 0.0]]))
        with pytest.raises(GeometryError):
            distance_to_hull(hull, np.zeros(2), tol=0.0)

    def test_solver_against_polygon_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            pts = rng.uniform(-2, 2, size=(rng.integers(1, 13), 2))
            x = rng.uniform(-4, 4, size=2)
            solved = min_norm_point_distance(pts, x, tol=1e-7)
            exact = brute_force_hull_distance(pts, x)
            assert abs(solved - exact) <= 1e-6

    def test_solver_in_three_dimensions(self):
        # distance from a point above a tetrahedron face computed two ways
        pts = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
            dtype=float,
        )
        d = min_norm_point_distance(pts, np.array([1.0, 1.0, 1.0]), tol=1e-9)
        assert d == pytest.approx(2.0 / np.sqrt(3), abs=1e-7)


class TestNormalCone:
    def test_endpoint_outward_direction(self):
        assert normal_cone_check(Interval(-1, 1), np.array([1.0]), np.array([1.0]))

    def test_interior_point_trivial_cone(self):
        assert not normal_cone_check(Interval(-1, 1), np.array([0.0]), np.array([1.0]))

    def test_ball_radial(self):
        assert normal_cone_check(Ball(np.zeros(2), 1.0), np.array([1.0, 0.0]), np.array([1.0, 0.0]))

    def test_zero_vector_always_in_cone(self):
        assert normal_cone_check(Interval(-1, 1), np.array([0.0]), np.array([0.0]))

    def test_outside_base_point_rejected(self):
        with pytest.raises(GeometryError):
            normal_cone_check(Interval(-1, 1), np.array([2.0]), np.array([1.0]))


class TestHelpers:
    def test_norm_bound(self):
        assert norm_bound(Interval(-2, 1)) == pytest.approx(2.0)
        assert norm_bound(Ball(np.array([1.0, 0.0]), 2.0)) == pytest.approx(3.0)
        assert norm_bound(Box(np.array([-1.0, -2.0]), np.array([3.0, 1.0]))) == pytest.approx(
            np.sqrt(9 + 4)
        )
        assert norm_bound(unit_square()) == pytest.approx(np.sqrt(2), abs=1e-9)

    def test_chebyshev_center(self):
        c, r = chebyshev_center(unit_square())
        np.testing.assert_allclose(c, [0.5, 0.5], atol=1e-9)
        assert r == pytest.approx(0.5, abs=1e-9)

    def test_as_interval(self):
        assert as_interval(Ball(np.array([1.0]), 0.5)) == (0.5, 1.5)
        assert as_interval(Interval(-1, 2)) == (-1.0, 2.0)
        with pytest.raises(GeometryError):
            as_interval(Ball(np.zeros(2), 1.0))

    def test_interior_margin_signs(self):
        body = unit_square()
        assert body.interior_margin(np.array([0.5, 0.5])) == pytest.approx(0.5)
        assert body.interior_margin(np.array([2.0, 0.5])) < 0
