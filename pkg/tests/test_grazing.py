import numpy as np
import pytest

from grazing_lab import grazing as gr
from grazing_lab.dualpairs import get_pair
from grazing_lab.kernels import default_kernel_set
from grazing_lab.quadrature import SamplerConfig
from grazing_lab.testfunctions import (collision_invariants,
                                       default_pair_function,
                                       position_velocity, probe_suite)


@pytest.fixture(scope="module")
def probes():
    rng = np.random.default_rng(7)
    return gr.probe_frames(2, 60, rng)


class TestProbes:
    def test_speed_window(self, probes):
        for fr in probes:
            assert 0.6 <= fr.relative_speed <= 4.0

    def test_tangent_direction(self, probes):
        for fr in probes:
            k = (fr.v - fr.v_star) / fr.relative_speed
            assert abs(fr.p @ k) < 1e-12
            assert abs(fr.p @ fr.p - 1.0) < 1e-12


class TestGradientLemma:
    def test_rates_and_uniform_bounds(self, probes):
        phi = probe_suite(2)[0]
        rep = gr.check_gradient_lemma(phi, probes, [1e-1, 1e-2, 1e-3, 1e-4])
        assert rep.conv1_slope >= 0.9
        assert rep.conv2_slope >= 0.9
        assert rep.bd1_stable and rep.bd2_stable

    def test_constants_stable_down_to_1e5(self, probes):
        phi = probe_suite(2)[1]
        rep = gr.check_gradient_lemma(phi, probes, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
        assert rep.bd1_stable and rep.bd2_stable
        assert np.all(np.isfinite(rep.bd1_constants))

    def test_bd1_constant_tied_to_lipschitz(self, probes):
        # |four-point grad| <= 2 theta |v - v*| sup |grad_v phi|
        phi = probe_suite(2)[0]
        rng = np.random.default_rng(0)
        x = rng.normal(size=(20_000, 2))
        v = rng.uniform(-4, 4, size=(20_000, 2))
        grad_sup = float(np.max(np.linalg.norm(phi.grad_v(x, v), axis=1)))
        rep = gr.check_gradient_lemma(phi, probes, [1e-1, 1e-2, 1e-3])
        assert np.max(rep.bd1_constants) <= 2.0 * grad_sup * (1 + 1e-6)


class TestSphereSweep:
    def test_squares_and_first_moment(self):
        rng = np.random.default_rng(11)
        Phi = default_pair_function(2, delta=0.25)
        ks = default_kernel_set(2, gamma=0.0, nu=0.5)
        frames = gr.sphere_probe_frames(Phi, ks, 2, 12, rng)
        rep = gr.sweep_sphere_square(Phi, ks, [0.4, 0.1, 0.025], frames)
        assert rep.max_rel_gap_last < 0.02
        assert rep.rate >= 0.9
        assert rep.first_moment_rel_gap < 0.05

    def test_velocity_independent_phi_gives_zero(self):
        class Flat:
            def __call__(self, x, xs, v, vs):
                return (np.atleast_2d(x)[:, 0] + np.atleast_2d(xs)[:, 0]) * 0.5

        rng = np.random.default_rng(5)
        fr = gr.probe_frames(2, 3, rng)[0]
        ks = default_kernel_set(2, gamma=0.0)
        val = gr.sphere_collision_integral(Flat(), fr, ks, power=2)
        assert abs(val) < 1e-20

    def test_guard_rejection(self):
        rng = np.random.default_rng(6)
        Phi = default_pair_function(2, delta=0.5)  # closed for r < 1.0
        frames = gr.probe_frames(2, 20, rng, min_speed=0.6, max_speed=0.9)
        ks = default_kernel_set(2, gamma=0.0)
        with pytest.raises(ValueError):
            gr.sweep_sphere_square(Phi, ks, [0.1], frames)

    def test_sphere_integral_d3(self):
        # the d = 3 path (trapezoid p-average) also converges to 8 |proj grad|^2
        rng = np.random.default_rng(9)
        Phi = default_pair_function(3, delta=0.25)
        ks = default_kernel_set(3, gamma=0.0)
        frames = gr.sphere_probe_frames(Phi, ks, 3, 4, rng)
        rep = gr.sweep_sphere_square(Phi, ks, [0.2, 0.05], frames)
        assert rep.max_rel_gap_last < 0.02


class TestDissipationSweep:
    def test_equilibrium_all_zero(self, f_maxwellian, ks_maxwellian):
        cfg = SamplerConfig(n_samples=50_000, seed=3)
        res = gr.sweep_dissipation(f_maxwellian, get_pair("cosh"), ks_maxwellian,
                                   [0.4, 0.1], cfg, oracle=True)
        assert abs(res.target.value) < 1e-10
        for est in res.values:
            assert abs(est.value) < 1e-10
        assert not res.failures

    def test_anisotropic_converges(self, f_aniso, ks_maxwellian):
        cfg = SamplerConfig(n_samples=400_000, seed=5)
        res = gr.sweep_dissipation(f_aniso, get_pair("cosh"), ks_maxwellian,
                                   [0.4, 0.2, 0.1, 0.05], cfg)
        assert not res.failures
        assert res.target.value == pytest.approx(2.25, abs=1e-6)
        final = res.values[-1]
        assert abs(final.value - res.target.value) <= \
            0.05 * res.target.value + 3.0 * final.std_error
        # quadratic-pair column: same-seed half of D_B per eps
        assert len(res.psi_values) == len(res.values)

    def test_gap_sequence_shrinks_with_signal(self, f_aniso, ks_maxwellian):
        cfg = SamplerConfig(n_samples=400_000, seed=5)
        res = gr.sweep_dissipation(f_aniso, get_pair("cosh"), ks_maxwellian,
                                   [0.8, 0.4, 0.2], cfg)
        gaps = np.abs(res.gaps)
        assert gaps[1] < gaps[0]  # below eps = 0.4 the gaps decrease


class TestWeakOperatorSweep:
    def test_collision_invariants_identically_zero(self, f_aniso, ks_maxwellian):
        cfg = SamplerConfig(n_samples=50_000, seed=3)
        for phi in collision_invariants(2)[:2]:
            res = gr.sweep_weak_operator(f_aniso, phi, ks_maxwellian,
                                         [0.4, 0.1], cfg, exact_target=0.0)
            for est, gap in zip(res.values, res.gaps):
                assert abs(est.value) <= 3.0 * est.std_error + 1e-9
                assert abs(gap) <= 3.0 * est.std_error + 1e-9

    def test_correlated_mixture_converges(self, f_mixture, ks_maxwellian):
        cfg = SamplerConfig(n_samples=200_000, seed=6)
        from grazing_lab.functionals import weak_q_landau_bilinear_exact
        exact = weak_q_landau_bilinear_exact(f_mixture, ks_maxwellian)
        res = gr.sweep_weak_operator(f_mixture, position_velocity(2),
                                     ks_maxwellian, [0.4, 0.2, 0.1], cfg,
                                     exact_target=exact)
        assert not res.failures
        c_lin = gr.linear_gap_coefficient(res.epsilons, res.gaps)
        final = res.values[-1]
        band = 3.0 * final.std_error + abs(c_lin) * res.epsilons[-1]
        assert abs(res.gaps[-1]) <= band


class TestRateFit:
    def test_clean_power_law(self):
        eps = [0.4, 0.2, 0.1, 0.05]
        gaps = [0.1 * e ** 1.5 for e in eps]
        assert gr.fit_rate(eps, gaps, n_fit=4) == pytest.approx(1.5, abs=1e-12)

    def test_degenerate_input(self):
        assert np.isnan(gr.fit_rate([0.1], [0.01]))
        assert np.isnan(gr.fit_rate([0.4, 0.2], [0.0, 0.0]))

    def test_linear_coefficient(self):
        eps = np.array([0.4, 0.2, 0.1])
        assert gr.linear_gap_coefficient(eps, 0.7 * eps) == pytest.approx(0.7)
