import copy

import numpy as np
import pytest

from hullsim.dynamics import (
    TimeGrid,
    constant_body,
    make_model,
    shrinking_ball,
    simulate_ensemble,
)
from hullsim.geometry import Ball, Box, HPolytope, Interval, project
from hullsim.oracle import (
    OracleError,
    StepConstants,
    brute_force_hull_distance,
    brute_force_projection,
    cdf_sandwich_check,
    constants_c1_c2,
    empirical_cdf,
    hitting_frequency,
    step1_bound_check,
)


def unit_square():
    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    return HPolytope(normals, np.array([1.0, 0.0, 1.0, 0.0]))


def linear_drift_model(dim=1, theta=1.0, sigma=0.5):
    return make_model("ou", dim, np.zeros(dim), theta=theta, sigma=sigma)


class TestConstants:
    def test_constant_sigma_linear_drift(self):
        # lip_diffusion = 0 removes both suprema; c1 = 1 + lip_drift * delta
        c = constants_c1_c2(linear_drift_model(), m_c=1.0, delta=0.01)
        assert c.c1 == pytest.approx(1.01)
        assert c.c2 == pytest.approx(1.0)

    def test_zero_drift_gives_unit_constants(self):
        model = make_model("zero_drift", 1, [0.0], sigma=0.7)
        c = constants_c1_c2(model, m_c=1.0, delta=0.05)
        assert c.c1 == 1.0
        assert c.c2 == 1.0

    def test_c1_grows_with_delta(self):
        model = make_model("tanh_sigma", 1, [0.0], theta=1.0, sigma0=0.3, sigma1=0.1)
        c_small = constants_c1_c2(model, m_c=1.0, delta=0.01)
        c_large = constants_c1_c2(model, m_c=1.0, delta=0.1)
        assert c_large.c1 > c_small.c1
        assert c_large.c2 == pytest.approx(c_small.c2)  # delta-free

    def test_sampled_suprema_stabilize(self):
        model = make_model("tanh_sigma", 1, [0.0], theta=1.0, sigma0=0.3, sigma1=0.1)
        c1k = constants_c1_c2(model, m_c=1.0, delta=0.05, probe_count=1000, seed=1)
        c2k = constants_c1_c2(model, m_c=1.0, delta=0.05, probe_count=2000, seed=1)
        assert abs(c2k.c1 - c1k.c1) / c1k.c1 < 0.01
        assert abs(c2k.c2 - c1k.c2) / c1k.c2 < 0.01

    def test_probe_count_floor(self):
        with pytest.raises(OracleError):
            constants_c1_c2(linear_drift_model(), 1.0, 0.01, probe_count=10)

    def test_invariants_enforced(self):
        with pytest.raises(OracleError):
            StepConstants(c1=0.5, c2=1.0, m_c=1.0, sup_inv_op_norm=1.0, sup_inv_drift=0.0)
        with pytest.raises(OracleError):
            StepConstants(c1=np.inf, c2=1.0, m_c=1.0, sup_inv_op_norm=1.0, sup_inv_drift=0.0)


class TestGridProjectionOracle:
    def test_square_face(self):
        p = brute_force_projection(unit_square(), np.array([2.0, 0.5]), 1e-3)
        assert np.linalg.norm(p - [1.0, 0.5]) <= 2e-3

    def test_interior_point_recovered(self):
        p = brute_force_projection(unit_square(), np.array([0.4, 0.6]), 1e-3)
        assert np.linalg.norm(p - [0.4, 0.6]) <= 1e-3 * np.sqrt(2)

    def test_ball_radial(self):
        p = brute_force_projection(Ball(np.zeros(2), 1.0), np.array([3.0, 4.0]), 1e-3)
        assert np.linalg.norm(p - [0.6, 0.8]) <= 2e-3

    def test_interval(self):
        p = brute_force_projection(Interval(-1, 1), np.array([2.5]), 1e-4)
        assert abs(p[0] - 1.0) <= 1e-4

    def test_agrees_with_projection(self):
        rng = np.random.default_rng(2)
        body = Box(np.array([-1.0, -0.5]), np.array([0.5, 1.5]))
        for x in rng.uniform(-3, 3, size=(10, 2)):
            p_exact = project(body, x)
            p_grid = brute_force_projection(body, x, 2e-3)
            assert np.linalg.norm(p_exact - p_grid) <= 2 * 2e-3 * np.sqrt(2)

    def test_dimension_cap(self):
        with pytest.raises(OracleError):
            brute_force_projection(Ball(np.zeros(3), 1.0), np.zeros(3), 1e-2)


class TestPairSegmentOracle:
    def test_triangle_corner_exact(self):
        d = brute_force_hull_distance(
            np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0])
        )
        assert d == pytest.approx(np.sqrt(2) / 2, abs=1e-15)

    def test_inside_is_zero(self):
        d = brute_force_hull_distance(
            np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]),
            np.array([1.0, 1.0]),
        )
        assert d == 0.0

    def test_collinear_cloud(self):
        d = brute_force_hull_distance(
            np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([1.0, 1.0])
        )
        assert d == pytest.approx(1.0)

    def test_single_point(self):
        d = brute_force_hull_distance(np.array([[1.0, 1.0]]), np.array([4.0, 5.0]))
        assert d == pytest.approx(5.0)

    def test_wrong_dimension(self):
        with pytest.raises(OracleError):
            brute_force_hull_distance(np.array([[1.0], [2.0]]), np.array([0.0]))


class TestEmpiricalCdf:
    def test_basic_counts(self):
        assert empirical_cdf([1, 2, 3], 2) == pytest.approx(2 / 3)
        assert empirical_cdf([1, 2, 3], 0.5) == 0.0
        assert empirical_cdf([1, 2, 3], 10) == 1.0

    def test_vectorized_queries(self):
        out = empirical_cdf([1.0, 2.0], np.array([0.0, 1.0, 1.5, 2.0]))
        np.testing.assert_allclose(out, [0.0, 0.5, 0.5, 1.0])

    def test_empty_rejected(self):
        with pytest.raises(OracleError):
            empirical_cdf([], 0.0)


def make_checked_ensemble(model, mf, n_copies=200, seed=3, steps=20):
    grid = TimeGrid(1.0, steps)
    return simulate_ensemble(model, mf, grid, n_copies, seed, keep_pre_projection=True)


class TestStepBound:
    probes_1d = np.array([[-0.9], [-0.4], [0.0], [0.4], [0.9]])

    def test_zero_drift_is_triangle_inequality(self):
        model = make_model("zero_drift", 1, [0.0], sigma=0.5)
        ens = make_checked_ensemble(model, constant_body(Interval(-1, 1)))
        rep = step1_bound_check(model, ens, constant_body(Interval(-1, 1)), self.probes_1d)
        assert rep.n_violations == 0
        assert rep.n_checks == 200 * 20 * 5

    def test_linear_drift_no_violations(self):
        model = linear_drift_model()
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=1000)
        rep = step1_bound_check(model, ens, mf, self.probes_1d)
        assert rep.n_violations == 0
        assert rep.worst_margin <= 1e-10

    def test_state_dependent_sigma_no_violations(self):
        model = make_model("tanh_sigma", 1, [0.0], theta=0.5, sigma0=0.3, sigma1=0.1)
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=500)
        rep = step1_bound_check(model, ens, mf, self.probes_1d)
        assert rep.n_violations == 0

    def test_halved_c2_makes_check_fire(self):
        model = linear_drift_model()
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=1000)
        base = constants_c1_c2(model, m_c=1.0, delta=ens.grid.delta)
        mutated = copy.copy(base)  # bypasses the >= 1 construction invariant
        object.__setattr__(mutated, "c2", base.c2 / 2)
        rep = step1_bound_check(model, ens, mf, self.probes_1d, constants=mutated)
        assert rep.n_violations >= 1
        assert rep.worst_margin > 1e-10

    def test_missing_pre_projection_rejected(self):
        model = linear_drift_model()
        mf = constant_body(Interval(-1, 1))
        ens = simulate_ensemble(model, mf, TimeGrid(1.0, 20), 50, 3)
        with pytest.raises(OracleError):
            step1_bound_check(model, ens, mf, self.probes_1d)

    def test_exterior_probe_rejected(self):
        model = linear_drift_model()
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf)
        with pytest.raises(OracleError):
            step1_bound_check(model, ens, mf, np.array([[1.5]]))

    def test_shrinking_body_probe_checked_at_every_node(self):
        model = linear_drift_model(dim=2, theta=2.0, sigma=0.3)
        mf = shrinking_ball([0.0, 0.0], 1.0, 0.3)
        ens = make_checked_ensemble(model, mf, n_copies=100)
        # inside at time zero but outside the final ball
        with pytest.raises(OracleError):
            step1_bound_check(model, ens, mf, np.array([[0.9, 0.0]]))
        rep = step1_bound_check(model, ens, mf, np.array([[0.3, 0.0]]))
        assert rep.n_violations == 0


class TestHitting:
    def test_easy_target_is_hit(self):
        model = make_model("zero_drift", 1, [0.0], sigma=0.5)
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=500, seed=12)
        rep = hitting_frequency(ens, mf, np.array([0.0]), radius=0.1)
        assert rep.total_hits > 0
        assert rep.frequency > 0
        assert rep.hits_per_node.shape == (20,)

    def test_unreachable_target_is_missed(self):
        model = make_model("zero_drift", 1, [0.0], sigma=1e-4)
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=100, seed=12)
        rep = hitting_frequency(ens, mf, np.array([0.9]), radius=0.05)
        assert rep.total_hits == 0

    def test_interior_requirement_excludes_boundary_mass(self):
        # all pre-projection points beyond the wall are clamped; those count
        # only if they were strictly inside before clamping
        model = make_model("zero_drift", 1, [0.9], sigma=2.0)
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=200, seed=5, steps=5)
        rep = hitting_frequency(ens, mf, np.array([0.95]), radius=0.04)
        h = ens.pre_projection[:, :, 0]
        manual = int(np.sum((np.abs(h - 0.95) <= 0.04) & (np.abs(h) < 1)))
        assert rep.total_hits == manual

    def test_needs_pre_projection(self):
        model = linear_drift_model()
        mf = constant_body(Interval(-1, 1))
        ens = simulate_ensemble(model, mf, TimeGrid(1.0, 5), 10, 0)
        with pytest.raises(OracleError):
            hitting_frequency(ens, mf, np.array([0.0]))


class TestCdfSandwich:
    def test_envelope_holds_with_dkw_slack(self):
        model = linear_drift_model(sigma=0.5)
        mf = constant_body(Interval(-1, 1))
        ens = make_checked_ensemble(model, mf, n_copies=5000, seed=8)
        xs = np.linspace(-1.5, 1.5, 101)
        margins = cdf_sandwich_check(model, mf, ens, j=10, xs=xs)
        dkw = np.sqrt(np.log(2 / 0.001) / (2 * ens.n_copies))
        assert np.min(margins) >= -dkw

    def test_needs_1d(self):
        model = linear_drift_model(dim=2, theta=2.0, sigma=0.3)
        mf = shrinking_ball([0.0, 0.0], 1.0, 0.3)
        ens = make_checked_ensemble(model, mf, n_copies=50)
        with pytest.raises(OracleError):
            cdf_sandwich_check(model, mf, ens, j=5, xs=[0.0])
