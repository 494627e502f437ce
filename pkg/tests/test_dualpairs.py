import math

import numpy as np
import pytest

from grazing_lab import dualpairs as dp


class TestLogMean:
    def test_log_gap_one(self):
        assert dp.log_mean(np.e, 1.0) == pytest.approx(np.e - 1.0, rel=1e-14)

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
    def test_diagonal(self, t):
        assert dp.log_mean(t, t) == pytest.approx(t, rel=1e-14)

    def test_near_diagonal_stable(self):
        s = 1.0 + 1e-11
        assert dp.log_mean(s, 1.0) == pytest.approx(0.5 * (s + 1.0), rel=1e-12)

    def test_vanishes_at_zero(self):
        assert dp.log_mean(0.0, 2.0) == 0.0


class TestQuadraticPair:
    def test_compatibility_identity(self):
        pair = dp.make_quadratic_pair()
        s, t = 5.0, 2.0
        lhs = float(pair.psi_star_prime(math.log(s / t))) * float(pair.theta(s, t))
        assert abs(lhs - 3.0) < 1e-12

    def test_legendre_self_dual(self):
        pair = dp.make_quadratic_pair()
        assert dp.legendre_transform(pair.psi_star, pair.psi_star_prime, 3.0) \
            == pytest.approx(4.5, abs=1e-10)

    def test_full_report(self):
        rep = dp.check_pair(dp.make_quadratic_pair(), n=5000, seed=2)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]


class TestCoshPair:
    def test_psi_star_value(self):
        pair = dp.make_cosh_pair()
        assert float(pair.psi_star(2.0)) == pytest.approx(4 * (math.cosh(1.0) - 1.0),
                                                          rel=1e-14)

    def test_compatibility_value(self):
        # at s = e^2, t = 1: 2 sinh(1) e = e^2 - 1
        pair = dp.make_cosh_pair()
        lhs = float(pair.psi_star_prime(2.0)) * float(pair.theta(math.e ** 2, 1.0))
        assert lhs == pytest.approx(math.e ** 2 - 1.0, rel=1e-13)

    def test_geometric_mean(self):
        pair = dp.make_cosh_pair()
        assert float(pair.theta(4.0, 1.0)) == pytest.approx(2.0, rel=1e-14)

    def test_conjugate_vanishes_at_zero(self):
        # the numeric supremum forces Psi(0) = 0 since Psi* >= 0 with
        # equality only at the origin; the closed form agrees
        pair = dp.make_cosh_pair()
        assert float(pair.psi(0.0)) == pytest.approx(0.0, abs=1e-12)
        assert dp.legendre_transform(pair.psi_star, pair.psi_star_prime, 0.0) == 0.0

    def test_conjugate_matches_numeric_legendre(self):
        pair = dp.make_cosh_pair()
        for a in (-4.0, -0.3, 0.7, 2.0, 9.0):
            num = dp.legendre_transform(pair.psi_star, pair.psi_star_prime, a)
            assert float(pair.psi(a)) == pytest.approx(num, rel=1e-9, abs=1e-9)

    def test_coth_condition_equality(self):
        pair = dp.make_cosh_pair()
        r = np.linspace(0.1, 20, 200)
        lhs = np.asarray(pair.psi_star_prime(r)) / np.asarray(pair.psi_star(r))
        rhs = 0.5 / np.tanh(0.25 * r)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_full_report(self):
        rep = dp.check_pair(dp.make_cosh_pair(), n=5000, seed=3)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]


class TestDerivedTheta:
    def test_recovers_log_mean(self, rng):
        theta = dp.derive_theta(lambda r: np.asarray(r, dtype=float))
        s = rng.uniform(0.01, 10, 300)
        t = rng.uniform(0.01, 10, 300)
        assert np.max(np.abs(theta(s, t) - dp.log_mean(s, t)) / (s + t)) < 1e-12

    def test_recovers_geometric_mean(self, rng):
        theta = dp.derive_theta(lambda r: 2.0 * np.sinh(0.5 * np.asarray(r, dtype=float)))
        s = rng.uniform(0.01, 10, 300)
        t = rng.uniform(0.01, 10, 300)
        assert np.max(np.abs(theta(s, t) - np.sqrt(s * t)) / (s + t)) < 1e-12

    def test_vanishes_at_zero(self):
        theta = dp.derive_theta(lambda r: 2.0 * np.sinh(0.5 * np.asarray(r, dtype=float)))
        assert float(theta(0.0, 3.0)) == 0.0
        assert float(theta(3.0, 0.0)) == 0.0

    def test_non_monotone_rejected(self):
        with pytest.raises(ValueError):
            dp.derive_theta(lambda r: np.sin(np.asarray(r, dtype=float)))


class TestQuarticCustomPair:
    def test_compatibility_by_construction(self, rng):
        pair = dp.get_pair("custom", "quartic")
        s = rng.uniform(0.01, 10, 2000)
        t = rng.uniform(0.01, 10, 2000)
        rr = np.log(s) - np.log(t)
        resid = np.abs(np.asarray(pair.psi_star_prime(rr)) * np.asarray(pair.theta(s, t))
                       - (s - t)) / (s + t)
        assert np.max(resid) < 1e-10

    def test_coth_scan_reports_failure(self):
        # (log Psi*)' exceeds coth(r/4)/2 near r = 0 for the quartic example
        pair = dp.get_pair("custom", "quartic")
        assert pair.satisfies_coth is False
        rep = dp.check_pair(pair, n=2000, seed=4)
        assert rep["coth_condition"].passed  # scan agrees with the declared flag
        assert rep["compatibility"].passed

    def test_unknown_custom_name(self):
        with pytest.raises(KeyError):
            dp.get_pair("custom", "nope")


class TestFenchel:
    @pytest.mark.parametrize("name", ["quadratic", "cosh"])
    def test_inequality_and_equality(self, name):
        pair = dp.get_pair(name)
        a = np.linspace(-6, 6, 20)
        b = np.linspace(-6, 6, 20)
        pa = np.asarray(pair.psi(a), dtype=float)
        pb = np.asarray(pair.psi_star(b), dtype=float)
        gap = pa[:, None] + pb[None, :] - a[:, None] * b[None, :]
        assert np.min(gap) > -1e-8
        a_opt = np.asarray(pair.psi_star_prime(b), dtype=float)
        eq = np.asarray(pair.psi(a_opt), dtype=float) + pb - a_opt * b
        assert np.max(np.abs(eq) / (1 + np.abs(a_opt * b))) < 1e-8


class TestInequalities:
    @pytest.mark.parametrize("name", ["quadratic", "cosh"])
    def test_psi_theta_sandwich(self, name, rng):
        # 2|sqrt s - sqrt t|^2 <= Psi* Theta <= (s - t)(log s - log t)
        pair = dp.get_pair(name)
        s = rng.uniform(1e-3, 10, 5000)
        t = rng.uniform(1e-3, 10, 5000)
        rr = np.log(s) - np.log(t)
        mid = np.asarray(pair.psi_star(rr)) * np.asarray(pair.theta(s, t))
        hi = (s - t) * rr
        lo = 2.0 * (np.sqrt(s) - np.sqrt(t)) ** 2
        assert np.all(mid <= hi * (1 + 1e-12) + 1e-14)
        assert np.all(lo <= mid * (1 + 1e-12) + 1e-14)

    def test_elementary_sqrt_inequality(self, rng):
        s = rng.uniform(1e-3, 10, 5000)
        t = rng.uniform(1e-3, 10, 5000)
        lhs = (np.sqrt(s) - np.sqrt(t)) ** 2
        rhs = 0.25 * (s - t) * (np.log(s) - np.log(t))
        assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-14)

    @pytest.mark.parametrize("name", ["quadratic", "cosh"])
    def test_theta_mean_bound(self, name, rng):
        pair = dp.get_pair(name)
        s = rng.uniform(1e-3, 10, 5000)
        t = rng.uniform(1e-3, 10, 5000)
        assert np.all(np.asarray(pair.theta(s, t)) <= pair.c_theta * (s + t) + 1e-14)

    def test_psi_over_r_monotone(self):
        for name in ("quadratic", "cosh"):
            pair = dp.get_pair(name)
            r = np.linspace(0.2, 15, 300)
            q = np.asarray(pair.psi(r)) / r
            assert np.all(np.diff(q) >= -1e-12)
