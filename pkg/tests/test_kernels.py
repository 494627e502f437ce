import math

import numpy as np
import pytest

from grazing_lab import geometry as geo
from grazing_lab import kernels as K


class TestKineticKernel:
    def test_power_law_values(self):
        a0 = K.power_law_kernel(1.0)
        assert a0(2.0) == pytest.approx(2.0)
        a0m2 = K.power_law_kernel(-2.0)
        assert a0m2(0.5) == pytest.approx(4.0)

    def test_singular_sentinel(self):
        a0 = K.power_law_kernel(-2.0)
        assert np.isposinf(a0(0.0))

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            K.power_law_kernel(0.5)(-1.0)

    def test_gamma_ranges(self):
        with pytest.raises(ValueError):
            K.KineticKernel("power", 1.5)
        with pytest.raises(ValueError):
            K.KineticKernel("power", -2.5)
        K.KineticKernel("bracket", -5.0)  # bracket allows any gamma <= 1

    def test_bracket_within_bounds(self):
        a0 = K.KineticKernel("bracket", -1.0, 0.5, 2.0)
        r = np.linspace(0, 5, 50)
        vals = a0(r)
        bracket = (1 + r * r) ** (-0.5)
        assert np.all(vals >= 0.5 * bracket - 1e-15)
        assert np.all(vals <= 2.0 * bracket + 1e-15)


class TestAngularKernel:
    def test_closed_form_normalisation_d3_nu1(self):
        beta = K.power_law_beta(1.0, 3)
        assert beta.norm_const == pytest.approx(16 / np.pi ** 2, rel=1e-14)

    def test_numeric_normaliser_matches_closed_form(self):
        nu = 0.5
        kern = K.normalize_beta(lambda t: t ** (-1.0 - nu), nu, 2)
        closed = K.power_law_beta(nu, 2)
        assert kern.norm_const == pytest.approx(closed.norm_const, rel=1e-8)

    def test_already_normalised_profile(self):
        base = K.power_law_beta(0.5, 2)
        kern = K.normalize_beta(lambda t: base.beta(t), 0.5, 2)
        assert kern.norm_const == pytest.approx(1.0, rel=1e-8)

    def test_truncated_profile(self):
        nu, delta = 0.5, 0.05
        kern = K.normalize_beta(
            lambda t: np.where(np.asarray(t) >= delta, np.asarray(t) ** (-1 - nu), 0.0),
            nu, 2)
        assert kern.angular_momentum(1.0) == pytest.approx(4.0, rel=1e-7)

    @pytest.mark.parametrize("d,target", [(2, 4.0), (3, 8 / np.pi)])
    @pytest.mark.parametrize("eps", [1.0, 0.5, 0.1, 0.02])
    def test_scaling_invariance(self, d, target, eps):
        beta = K.power_law_beta(0.5, d)
        assert beta.angular_momentum(eps) == pytest.approx(target, rel=1e-6)

    def test_support(self):
        beta = K.power_law_beta(0.5, 2)
        for eps in (1.0, 0.3):
            theta = np.linspace(eps / 2 * 1.0001, np.pi / 2, 50)
            assert np.all(beta.beta_scaled(eps, theta) == 0.0)

    def test_substitution_consistency(self):
        beta = K.power_law_beta(0.5, 2)
        theta0 = 0.12
        lhs = float(beta.beta_scaled(1.0, theta0 / np.pi))
        rhs = np.pi ** 3 * float(beta.beta(theta0))
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_lower_bound_constant(self):
        beta = K.power_law_beta(0.5, 2)
        theta = np.linspace(1e-4, np.pi / 2, 1000)
        assert np.all(beta.beta(theta) * theta ** 1.5 >= beta.c0 * (1 - 1e-12))

    def test_measure_nodes_reproduce_angular_momentum(self):
        beta = K.power_law_beta(0.5, 2)
        for eps in (1.0, 0.1):
            nodes, w = beta.theta_measure_nodes(eps, 64)
            # integrate g(theta) = theta^2 against the measure: exact mass
            assert np.sum(w) == pytest.approx(4.0, rel=1e-8)
            assert np.all(nodes <= eps / 2)

    def test_inverse_cdf_consistency(self):
        beta = K.power_law_beta(0.5, 2)
        u = np.linspace(0.01, 0.99, 30)
        theta = beta.theta_inverse_cdf(u, 0.4)
        # CDF of the theta^2-weighted density is (theta/(eps/2))^{2-nu}
        assert np.max(np.abs((theta / 0.2) ** 1.5 - u)) < 1e-12


class TestCollisionKernel:
    def test_zero_outside_support(self, ks_maxwellian):
        ks = ks_maxwellian.with_epsilon(0.3)
        assert ks.collision_kernel(1.0, 0.2) == 0.0

    def test_d2_b_equals_beta(self, ks_maxwellian):
        theta = 0.07
        b = ks_maxwellian.collision_kernel(1.0, theta)
        assert b == pytest.approx(
            float(ks_maxwellian.beta.beta_scaled(1.0, theta)), rel=1e-14)

    def test_maxwellian_speed_independent(self, ks_maxwellian):
        assert ks_maxwellian.collision_kernel(0.5, 0.1) == pytest.approx(
            ks_maxwellian.collision_kernel(3.0, 0.1), rel=1e-14)

    def test_d2_gamma_minus2_rejected(self):
        with pytest.raises(ValueError):
            K.default_kernel_set(2, gamma=-2.0)


class TestCrossSection:
    def test_maxwellian_constant(self, ks_maxwellian):
        lam1 = float(K.cross_section_lambda(ks_maxwellian, 0.7))
        lam2 = float(K.cross_section_lambda(ks_maxwellian, 4.0))
        assert lam1 == pytest.approx(lam2, rel=1e-12)

    def test_independent_measure_node_route(self, ks_maxwellian):
        # Lambda via the measure-node quadrature, independent of adaptive quad
        ks = ks_maxwellian
        nodes, w = ks.beta.theta_measure_nodes(1.0, 4096)
        expected = ks.perp_measure * float(np.sum(w * (1 - np.cos(nodes)) / nodes ** 2))
        assert float(K.cross_section_lambda(ks, 1.0)) == pytest.approx(
            expected, rel=1e-6)

    def test_bounded_by_a0_ratio(self, ks_hard):
        r = np.linspace(0.1, 10, 40)
        lam = K.cross_section_lambda(ks_hard, r)
        ratio = lam / ks_hard.a0(r)
        assert np.max(ratio) == pytest.approx(np.min(ratio), rel=1e-10)

    def test_cross_section_growth_bound(self, ks_hard):
        # Lambda + r Lambda' bounded by a constant multiple of r^gamma
        r = np.linspace(0.1, 10, 25)
        lam = K.cross_section_lambda(ks_hard, r)
        lam_p = K.cross_section_lambda_prime(ks_hard, r)
        ratio = (lam + r * lam_p) / ks_hard.a0(r)
        assert np.max(ratio) < 2.0 * np.min(ratio) + 1e-12

    def test_momentum_transfer_identity_mc(self, ks_maxwellian, rng):
        # int B (v - v') dsigma = (v - v*)/2 * Lambda, by MC over sigma
        ks = ks_maxwellian
        v, vs = np.array([1.3, -0.4]), np.array([-0.2, 0.5])
        k = geo.relative_direction(v, vs)
        r = float(np.linalg.norm(v - vs))
        m = 400_000
        u = rng.random(m)
        theta = ks.beta.theta_inverse_cdf(u, ks.epsilon)
        p = geo.sample_p(np.broadcast_to(k, (m, 2)).copy(), rng)
        sigma = geo.sigma_from_angles(k, theta, p)
        vp = 0.5 * (v + vs)[None, :] + 0.5 * r * sigma
        w_b = ks.a0(r) * ks.perp_measure * ks.angular_const / theta ** 2
        samples = (v[None, :] - vp) * w_b[:, None]
        est = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / np.sqrt(m)
        target = 0.5 * (v - vs) * float(K.cross_section_lambda(ks, r))
        assert np.all(np.abs(est - target) <= 3.0 * se)


class TestCancellation:
    def test_maxwellian_closed_form(self, ks_maxwellian):
        # gamma = 0: S(z) constant, equal to the bracket integral
        ks = ks_maxwellian
        nodes, w = ks.beta.theta_measure_nodes(1.0, 4096)
        expected = ks.perp_measure * float(
            np.sum(w * (np.cos(0.5 * nodes) ** (-2) - 1.0) / nodes ** 2))
        for z in (0.5, 1.0, 3.0):
            assert K.cancellation_s(ks, z) == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_bound(self, gamma):
        ks = K.default_kernel_set(2, gamma=gamma)
        for z in (0.3, 1.0, 2.5, 6.0):
            assert abs(K.cancellation_s(ks, z)) <= K.cancellation_s_bound(ks, z) * (1 + 1e-9)

    def test_invalid_speed(self, ks_maxwellian):
        with pytest.raises(ValueError):
            K.cancellation_s(ks_maxwellian, 0.0)


class TestSpatialKernel:
    def test_constant(self):
        kap = K.SpatialKernel("constant", 1.0)
        assert kap.kappa_eval(np.ones(2), np.zeros(2)) == pytest.approx(1.0)

    def test_exp_bracket_at_zero(self):
        kap = K.SpatialKernel("exp_bracket", 1.0)
        assert kap.kappa_eval(np.ones(2), np.ones(2)) == pytest.approx(math.exp(-1.0))

    def test_symmetry(self, rng):
        for form in ("constant", "exp_bracket", "power_bracket"):
            kap = K.SpatialKernel(form, 0.7, 1.3)
            x = rng.normal(size=(100, 2))
            xs = rng.normal(size=(100, 2))
            assert np.allclose(kap.kappa_eval(x, xs), kap.kappa_eval(xs, x))

    def test_bounded_and_positive_on_balls(self, rng):
        for form in ("constant", "exp_bracket", "power_bracket"):
            kap = K.SpatialKernel(form, 1.0, 2.0)
            z = rng.normal(size=(2000, 2)) * 5
            vals = kap(z)
            assert np.all(vals <= kap.c_kappa + 1e-15)
            assert np.all(vals[np.linalg.norm(z, axis=1) < 10.0] > 0.0)
