"""Collision kernels: kinetic part A0, singular angular families and their
small-angle scaling, spatial interaction kernels, and the momentum-transfer
cross-section machinery.

The angular family beta lives on (0, pi/2], is bounded below by
c0 * theta^(-1-nu) for some nu in (0, 2), and is normalised so that

    int_0^{pi/2} theta^2 beta(theta) dtheta = 8 (d-1) / |S^{d-2}|,

i.e. 4 for d=2 (|S^0| = 2) and 8/pi for d=3.  The grazing rescaling

    beta_eps(theta) = (pi^3 / eps^3) beta(pi theta / eps),

supported on [0, eps/2], leaves that integral invariant for every eps.
The full kernel is B_eps = A0(|v-v*|) * beta_eps(theta) / sin^{d-2}(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .geometry import perp_sphere_measure


class QuadratureError(RuntimeError):
    """1-D adaptive quadrature failed to reach the requested tolerance."""


def angular_target(d: int) -> float:
    """The normalisation constant 8(d-1)/|S^{d-2}| of the theta^2-moment."""
    return 8.0 * (d - 1) / perp_sphere_measure(d)


def _quad(f, a, b, tol=1e-10):
    val, err = quad(f, a, b, epsabs=tol, epsrel=tol, limit=400)
    if not math.isfinite(val) or err > max(tol, 1e-6 * abs(val)):
        raise QuadratureError(f"integral on [{a:g}, {b:g}] unreliable: value={val:g}, err={err:g}")
    return val


# ---------------------------------------------------------------------------
# Kinetic kernel A0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KineticKernel:
    """A0(r) = r^gamma ("power") or c <r>^gamma ("bracket"), <r> = sqrt(1+r^2).

    Power-law kernels require gamma in [-2, 1]; bracket kernels allow any
    gamma <= 1 and carry constant bounds 0 < c_low <= c_high (evaluation uses
    their midpoint).  Singular values at r = 0 come back as +inf; samplers
    treat such draws as rejected.
    """

    form: str
    gamma: float
    c_low: float = 1.0
    c_high: float = 1.0

    def __post_init__(self):
        if self.form not in ("power", "bracket"):
            raise ValueError(f"unknown kinetic kernel form {self.form!r}")
        if self.form == "power" and not (-2.0 <= self.gamma <= 1.0):
            raise ValueError("power-law kernel requires gamma in [-2, 1]")
        if self.form == "bracket":
            if self.gamma > 1.0:
                raise ValueError("bracket kernel requires gamma <= 1")
            if not (0.0 < self.c_low <= self.c_high):
                raise ValueError("bracket kernel requires 0 < c_low <= c_high")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("relative speed must be nonnegative")
        if self.form == "power":
            if self.gamma == 0.0:
                return np.ones_like(r)
            with np.errstate(divide="ignore"):
                return r ** self.gamma
        c = 0.5 * (self.c_low + self.c_high)
        return c * (1.0 + r * r) ** (0.5 * self.gamma)


def power_law_kernel(gamma: float) -> KineticKernel:
    return KineticKernel("power", gamma)


def bracket_kernel(gamma: float, c: float = 1.0) -> KineticKernel:
    return KineticKernel("bracket", gamma, c, c)


def a0_eval(kernel: KineticKernel, r):
    return kernel(r)


# ---------------------------------------------------------------------------
# Angular kernel beta and its grazing scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularKernel:
    """Normalised singular angle function beta(theta) = norm_const * profile(theta).

    ``is_power_law`` marks the built-in profile theta^(-1-nu), for which the
    scaled theta-sampling CDF inverts in closed form.
    """

    profile: object
    nu: float
    c0: float
    norm_const: float
    dim: int
    is_power_law: bool = False

    def __post_init__(self):
        if not (0.0 < self.nu < 2.0):
            raise ValueError("singularity exponent nu must lie in (0, 2)")
        if self.norm_const <= 0:
            raise ValueError("norm_const must be positive")

    def beta(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        mask = (theta > 0.0) & (theta <= np.pi / 2)
        if np.any(mask):
            out[mask] = self.norm_const * self.profile(theta[mask])
        return out

    def beta_scaled(self, epsilon: float, theta):
        """(pi^3/eps^3) beta(pi theta / eps); zero for theta > eps/2."""
        if not (0.0 < epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        theta = np.asarray(theta, dtype=float)
        scale = np.pi / epsilon
        return scale ** 3 * self.beta(scale * theta)

    def b_scaled(self, epsilon: float, theta):
        """b_eps = beta_eps / sin^{d-2}; equal to beta_eps when d = 2."""
        theta = np.asarray(theta, dtype=float)
        val = self.beta_scaled(epsilon, theta)
        if self.dim == 2:
            return val
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(theta > 0.0, val / np.sin(theta) ** (self.dim - 2), 0.0)
        return out

    def angular_momentum(self, epsilon: float = 1.0) -> float:
        """int theta^2 beta_eps dtheta, by adaptive quadrature split at 0."""
        return _quad(lambda t: t * t * float(self.beta_scaled(epsilon, t)), 0.0, epsilon / 2)

    def rate_mass(self, epsilon: float, theta_min: float) -> float:
        """int_{theta_min}^{eps/2} beta_eps dtheta (finite total rate above cutoff)."""
        if theta_min <= 0:
            raise ValueError("theta_min must be positive: the full kernel has infinite rate")
        if self.is_power_law:
            c = self.norm_const * (np.pi / epsilon) ** (2.0 - self.nu)
            hi = epsilon / 2
            return c / self.nu * (theta_min ** (-self.nu) - hi ** (-self.nu))
        return _quad(lambda t: float(self.beta_scaled(epsilon, t)), theta_min, epsilon / 2)

    def theta_inverse_cdf(self, u, epsilon: float):
        """Inverse CDF of the density proportional to theta^2 beta_eps on [0, eps/2].

        Closed form for the power-law profile:  theta = (eps/2) u^{1/(2-nu)}.
        """
        if not self.is_power_law:
            raise NotImplementedError("theta^2-weighted sampling needs the power-law profile")
        u = np.asarray(u, dtype=float)
        return (epsilon / 2) * u ** (1.0 / (2.0 - self.nu))

    def theta_inverse_cdf_rate(self, u, epsilon: float, theta_min: float):
        """Inverse CDF of the density proportional to beta_eps on [theta_min, eps/2]."""
        if not self.is_power_law:
            raise NotImplementedError("rate sampling needs the power-law profile")
        u = np.asarray(u, dtype=float)
        lo = theta_min ** (-self.nu)
        hi = (epsilon / 2) ** (-self.nu)
        return (lo - u * (lo - hi)) ** (-1.0 / self.nu)

    def theta_measure_nodes(self, epsilon: float, m: int):
        """Deterministic midpoint nodes/weights for the measure theta^2 beta_eps dtheta.

        Returns (theta_j, w_j) with sum_j w_j g(theta_j) approximating
        int g(theta) theta^2 beta_eps(theta) dtheta; exact total mass.
        """
        u = (np.arange(m) + 0.5) / m
        nodes = self.theta_inverse_cdf(u, epsilon)
        w = np.full(m, angular_target(self.dim) / m)
        return nodes, w


def power_law_beta(nu: float, d: int) -> AngularKernel:
    """The built-in profile theta^(-1-nu) with closed-form normalisation."""
    target = angular_target(d)
    half_pi = np.pi / 2
    norm = target * (2.0 - nu) / half_pi ** (2.0 - nu)
    return AngularKernel(
        profile=lambda t: np.asarray(t, dtype=float) ** (-1.0 - nu),
        nu=nu, c0=norm, norm_const=norm, dim=d, is_power_law=True,
    )


def normalize_beta(profile, nu: float, d: int) -> AngularKernel:
    """Numerically normalise an integrable profile against the theta^2 weight."""
    target = angular_target(d)
    raw = _quad(lambda t: t * t * float(profile(t)), 0.0, np.pi / 2)
    if not (raw > 0) or not math.isfinite(raw):
        raise ValueError("profile has no finite positive theta^2-moment")
    kern = AngularKernel(profile=profile, nu=nu, c0=0.0, norm_const=target / raw, dim=d)
    got = kern.angular_momentum(1.0)
    if abs(got - target) > 1e-8 * target:
        raise QuadratureError(f"normalisation check failed: {got:g} vs {target:g}")
    return kern


# ---------------------------------------------------------------------------
# Spatial kernel kappa
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialKernel:
    """Bounded spatial interaction weight kappa(x - x*).

    Forms: "constant" -> c; "exp_bracket" -> c exp(-<z>); "power_bracket" ->
    c <z>^(-alpha), with <z> = sqrt(1 + |z|^2).  All are symmetric, bounded
    by ``c_kappa`` and positive on every ball.
    """

    form: str = "constant"
    c: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.form not in ("constant", "exp_bracket", "power_bracket"):
            raise ValueError(f"unknown spatial kernel form {self.form!r}")
        if self.c < 0:
            raise ValueError("kappa amplitude must be nonnegative")
        if self.form == "power_bracket" and self.alpha <= 0:
            raise ValueError("power_bracket requires alpha > 0")

    @property
    def c_kappa(self) -> float:
        if self.form == "exp_bracket":
            return self.c * math.exp(-1.0)
        return self.c

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.form == "constant":
            return np.full(z.shape[:-1], self.c)
        bracket = np.sqrt(1.0 + np.sum(z * z, axis=-1))
        if self.form == "exp_bracket":
            return self.c * np.exp(-bracket)
        return self.c * bracket ** (-self.alpha)

    def kappa_eval(self, x, x_star):
        return self(np.asarray(x, dtype=float) - np.asarray(x_star, dtype=float))


# ---------------------------------------------------------------------------
# Bundled kernel set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSet:
    """A kinetic kernel, a scaled angular family, a spatial kernel and eps."""

    a0: KineticKernel
    beta: AngularKernel
    kappa: SpatialKernel
    epsilon: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        if self.dim != self.beta.dim:
            raise ValueError("angular kernel dimension mismatch")
        if self.dim == 2 and self.a0.form == "power" and self.a0.gamma == -2.0:
            raise ValueError("gamma = -2 is excluded for d = 2")

    def with_epsilon(self, epsilon: float) -> "KernelSet":
        return replace(self, epsilon=epsilon)

    @property
    def gamma(self) -> float:
        return self.a0.gamma

    @property
    def angular_const(self) -> float:
        return angular_target(self.dim)

    @property
    def perp_measure(self) -> float:
        return perp_sphere_measure(self.dim)

    def collision_kernel(self, r, theta):
        """B_eps(r, theta) = A0(r) * beta_eps(theta) / sin^{d-2}(theta)."""
        return self.a0(r) * self.beta.b_scaled(self.epsilon, theta)

    def collision_kernel_frame(self, frame):
        return float(self.collision_kernel(frame.relative_speed, frame.theta))


# ---------------------------------------------------------------------------
# Cross-section for momentum transfer and the cancellation function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _one_minus_cos_moment(beta_key, epsilon: float) -> float:
    beta = _BETA_CACHE[beta_key]
    return _quad(lambda t: float(beta.beta_scaled(epsilon, t)) * (1.0 - math.cos(t)),
                 0.0, epsilon / 2)


# lru_cache needs hashable keys; AngularKernel holds a closure, so key by id.
_BETA_CACHE: dict = {}


def _beta_key(beta: AngularKernel):
    key = id(beta)
    _BETA_CACHE[key] = beta
    return key


def cross_section_lambda(ks: KernelSet, r) -> np.ndarray:
    """Momentum-transfer cross-section

        Lambda(r) = int_{S^{d-1}} B_eps(r, sigma) (1 - k.sigma) dsigma
                  = |S^{d-2}| A0(r) int beta_eps(theta) (1 - cos theta) dtheta.
    """
    moment = _one_minus_cos_moment(_beta_key(ks.beta), ks.epsilon)
    return ks.perp_measure * ks.a0(r) * moment


def cross_section_lambda_prime(ks: KernelSet, r, rel_step: float = 1e-6):
    """|Lambda'(r)| by central differences with relative step 1e-6.

    For the smooth monotone built-in kernels this equals the sup-quotient
    over dilation factors in (1, sqrt 2]; for non-monotone kernels it may
    under-estimate it.
    """
    r = np.asarray(r, dtype=float)
    h = rel_step * np.maximum(np.abs(r), 1.0)
    lo = np.maximum(r - h, 1e-300)
    return np.abs(cross_section_lambda(ks, r + h) - cross_section_lambda(ks, lo)) / (r + h - lo)


def cancellation_s(ks: KernelSet, z: float) -> float:
    """The convolution kernel of the gain-loss rearrangement,

        S(z) = |S^{d-2}| int_0^{eps/2} [A0(z/cos(theta/2)) / cos^d(theta/2)
                                         - A0(z)] beta_eps(theta) dtheta.

    The bracket vanishes like theta^2 at 0, which tames the angular
    singularity; the integral is done by adaptive quadrature.
    """
    if z <= 0:
        raise ValueError("relative speed must be positive")
    a0, d = ks.a0, ks.dim

    def integrand(t):
        c = math.cos(0.5 * t)
        bracket = float(a0(z / c)) / c ** d - float(a0(z))
        return bracket * float(ks.beta.beta_scaled(ks.epsilon, t))

    return ks.perp_measure * _quad(integrand, 0.0, ks.epsilon / 2, tol=1e-11)


def cancellation_s_bound(ks: KernelSet, z: float) -> float:
    """Upper bound 2^{(d-4)/2} cos^{-2}(pi/8) (d Lambda(z) + z |Lambda'(z)|)."""
    lam = float(cross_section_lambda(ks, z))
    lam_p = float(cross_section_lambda_prime(ks, z))
    const = 2.0 ** ((ks.dim - 4) / 2.0) / math.cos(math.pi / 8) ** 2
    return const * (ks.dim * lam + abs(z) * lam_p)


def default_kernel_set(d: int = 2, gamma: float = 0.0, nu: float = 0.5,
                       epsilon: float = 1.0, kappa_form: str = "constant",
                       kappa_c: float = 1.0, kappa_alpha: float = 1.0) -> KernelSet:
    return KernelSet(
        a0=power_law_kernel(gamma),
        beta=power_law_beta(nu, d),
        kappa=SpatialKernel(kappa_form, kappa_c, kappa_alpha),
        epsilon=epsilon,
        dim=d,
    )
