"""Entropy-dissipation, action and weak collision-operator functionals.

All four-point (Boltzmann-side) functionals are quarter-integrals over
collision space against kappa B_eps; the projected (Landau-side) ones are
half-integrals over pairs.  With F = f f* and F' = f' f*':

    D_B     = 1/4 int kappa B_eps (F' - F)(log F' - log F)
    D_Psi*  = 1/4 int kappa B_eps Psi*(log F' - log F) Theta(F', F)
    D_cosh  = 1/2 int kappa B_eps |sqrt F' - sqrt F|^2
    D_L     = 1/2 int kappa F |sqrt(A) Pi (grad_v log f - (grad_v log f)*)|^2
    R(U)    = 1/4 int Psi(U / (Theta B_eps kappa)) Theta B_eps kappa
    A_L(U)  = 1/2 int |U|^2 / (kappa F)

Monte Carlo estimates share one frame stream per (seed, config), so
per-frame identities and inequalities (D_Psi* <= D_B, the quadratic pair's
D_Psi* = D_B / 2, the Fenchel split D_B = R(U_B) + D_Psi*) hold exactly for
the estimates, not just in the limit.

Deterministic tensor-grid oracles at d = 2 exploit densities that factorise
as rho(x) g(v) together with constant kappa, reducing the position integrals
to their exact unit mass.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import geometry
from .densities import DensityModel
from .dualpairs import DualPair
from .kernels import KernelSet, cancellation_s
from .quadrature import (Estimate, SamplerConfig, gauss_legendre_axis,
                         grid_nodes_product, mc_run)

SPEED_EPS = 1e-12  # grid points essentially on the diagonal contribute zero


# ---------------------------------------------------------------------------
# Monte Carlo functionals
# ---------------------------------------------------------------------------

def dissipation_boltzmann(f: DensityModel, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """D_B: always nonnegative per frame since (s - t)(log s - log t) >= 0."""

    def contrib(b):
        rbar = b.logFp - b.logF
        return 0.25 * (b.Fp - b.F) * rbar * b.w_collision()

    return mc_run(contrib, f, ks, cfg)


def dissipation_psi(f: DensityModel, ks: KernelSet, pair: DualPair,
                    cfg: SamplerConfig) -> Estimate:
    """D_Psi*: the pair dissipation; equals D_B/2 for the quadratic pair."""

    def contrib(b):
        rbar = b.logFp - b.logF
        theta = np.asarray(pair.theta(b.Fp, b.F))
        return 0.25 * np.asarray(pair.psi_star(rbar)) * theta * b.w_collision()

    return mc_run(contrib, f, ks, cfg)


def dissipation_cosh_direct(f: DensityModel, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """The reduced dissipation 1/2 int |sqrt F' - sqrt F|^2 B_eps kappa."""

    def contrib(b):
        diff = np.exp(0.5 * b.logFp) - np.exp(0.5 * b.logF)
        return 0.5 * diff * diff * b.w_collision()

    return mc_run(contrib, f, ks, cfg)


def dissipation_landau(f: DensityModel, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """D_L: half-integral of kappa F |projected log-gradient|^2 over pairs."""

    def contrib(b):
        g = b.landau_log_gradient()
        return 0.5 * b.kappa * np.exp(b.logF) * np.sum(g * g, axis=1) * b.w_eta

    return mc_run(contrib, f, ks, cfg)


def optimal_rate_boltzmann(f: DensityModel, ks: KernelSet):
    """U_B = B_eps kappa (F' - F): the rate at which R + D_Psi* = D_B."""

    def u(b):
        return b.b_eps() * b.kappa * (b.Fp - b.F)

    return u


def action_r(f: DensityModel, u_fn, ks: KernelSet, pair: DualPair,
             cfg: SamplerConfig) -> Estimate:
    """R(f, U) = 1/4 int Psi(U / (Theta B_eps kappa)) Theta B_eps kappa.

    Frames with a vanishing denominator contribute zero when U = 0 there;
    otherwise they surface as rejected draws and flag the estimate.
    """

    def contrib(b):
        theta = np.asarray(pair.theta(b.Fp, b.F))
        den = theta * b.b_eps() * b.kappa
        u = np.asarray(u_fn(b))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den > 0, u / np.where(den > 0, den, 1.0), 0.0)
            vals = 0.25 * np.asarray(pair.psi(ratio)) * theta * b.w_collision()
        vals = np.where((den <= 0) & (u != 0.0), np.nan, vals)
        return np.where((den <= 0) & (u == 0.0), 0.0, vals)

    return mc_run(contrib, f, ks, cfg)


def optimal_rate_landau(f: DensityModel, ks: KernelSet):
    """U_L = -kappa F (projected log-gradient); makes A_L coincide with D_L."""

    def u(b):
        return -(b.kappa * np.exp(b.logF))[:, None] * b.landau_log_gradient()

    return u


def action_landau(f: DensityModel, u_fn, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """A_L(f, U) = 1/2 int |U|^2 / (kappa F) over pairs."""

    def contrib(b):
        u = np.asarray(u_fn(b))
        den = b.kappa * np.exp(b.logF)
        u2 = np.sum(u * u, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = 0.5 * u2 / np.where(den > 0, den, 1.0) * b.w_eta
        vals = np.where((den <= 0) & (u2 > 0), np.nan, vals)
        return np.where((den <= 0) & (u2 == 0.0), 0.0, vals)

    return mc_run(contrib, f, ks, cfg)


def weak_q_boltzmann(f: DensityModel, phi, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """<Q_B_eps(f, f), phi> = 1/2 int kappa F (int four-point-grad phi B_eps dsigma).

    The four-point difference decays only like theta, so the estimator
    averages each frame over the antithetic tangent pair (p, -p): the odd
    part integrates out exactly and the weighted contributions stay bounded
    (finite variance uniformly in eps).
    """

    def contrib(b):
        bgrad = geometry.boltzmann_gradient_points(
            phi, b.x, b.xs, b.v, b.vs, b.vp, b.vsp)
        vp_a, vsp_a = b.anti_points
        bgrad_a = geometry.boltzmann_gradient_points(
            phi, b.x, b.xs, b.v, b.vs, vp_a, vsp_a)
        avg = 0.5 * (np.asarray(bgrad) + np.asarray(bgrad_a))
        return 0.5 * np.exp(b.logF) * avg * b.w_collision()

    return mc_run(contrib, f, ks, cfg)


def _phi_hessian(phi, x, v):
    if hasattr(phi, "hess_v"):
        return np.asarray(phi.hess_v(x, v))
    warnings.warn("test function lacks analytic second derivatives; "
                  "falling back to central finite differences")
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    n, d = v.shape
    h = 1e-4
    out = np.zeros((n, d, d))
    for i in range(d):
        e = np.zeros_like(v)
        e[:, i] = h
        gp = geometry._phi_grad_v(phi, x, v + e)
        gm = geometry._phi_grad_v(phi, x, v - e)
        out[:, i, :] = (gp - gm) / (2 * h)
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def landau_pairing_integrand(phi, x, xs, v, vs):
    """(grad_v - grad_v*) . ( |v-v*|^2 Pi (grad_v phi - (grad_v phi)*) ),

    expanded through the identity (grad_v - grad_v*).(|w|^2 Pi) = -2(d-1) w:

        -2(d-1) w . (grad phi - grad phi*) + |w|^2 Pi : (D^2 phi + (D^2 phi)*).
    """
    d = v.shape[1]
    w = v - vs
    r2 = np.sum(w * w, axis=1)
    gdiff = geometry._phi_grad_v(phi, x, v) - geometry._phi_grad_v(phi, xs, vs)
    hsum = _phi_hessian(phi, x, v) + _phi_hessian(phi, xs, vs)
    tr = np.trace(hsum, axis1=1, axis2=2)
    whw = np.einsum("ni,nij,nj->n", w, hsum, w)
    contraction = r2 * tr - whw
    return -2.0 * (d - 1) * np.sum(w * gdiff, axis=1) + contraction


def weak_q_landau(f: DensityModel, phi, ks: KernelSet, cfg: SamplerConfig) -> Estimate:
    """<Q_L(f, f), phi> = 1/2 int kappa A0 F * (projected divergence form)."""

    def contrib(b):
        expr = landau_pairing_integrand(phi, b.x, b.xs, b.v, b.vs)
        return 0.5 * b.kappa * b.a0 * np.exp(b.logF) * expr * b.w_eta

    return mc_run(contrib, f, ks, cfg)


def weak_q_landau_bilinear_exact(f: DensityModel, ks: KernelSet) -> float:
    """Closed form of <Q_L(f,f), x1 v1> for gamma = 0 and constant kappa:

        -2 (d-1) c_kappa Cov_f(x1, v1)

    (the Hessian term vanishes for the bilinear test function and the pair
    expectation of (v1 - v1*)(x1 - x1*) is twice the covariance).
    """
    if ks.a0.form != "power" or ks.a0.gamma != 0.0 or ks.kappa.form != "constant":
        raise ValueError("closed form needs gamma = 0 and constant kappa")
    w = f.weights
    mx = np.array([c.mean_x[0] for c in f.components])
    mv = np.array([c.mean_v[0] for c in f.components])
    cov = float(np.sum(w * mx * mv) - np.sum(w * mx) * np.sum(w * mv))
    return -2.0 * (f.d - 1) * ks.kappa.c * cov


FUNCTIONAL_TABLE = {
    "dissipation_boltzmann": lambda f, ks, pair, cfg: dissipation_boltzmann(f, ks, cfg),
    "dissipation_psi": lambda f, ks, pair, cfg: dissipation_psi(f, ks, pair, cfg),
    "dissipation_cosh": lambda f, ks, pair, cfg: dissipation_cosh_direct(f, ks, cfg),
    "dissipation_landau": lambda f, ks, pair, cfg: dissipation_landau(f, ks, cfg),
    "action_r_optimal": lambda f, ks, pair, cfg: action_r(
        f, optimal_rate_boltzmann(f, ks), ks, pair, cfg),
    "action_landau_optimal": lambda f, ks, pair, cfg: action_landau(
        f, optimal_rate_landau(f, ks), ks, cfg),
    "weak_q_boltzmann_x1v1": lambda f, ks, pair, cfg: weak_q_boltzmann(
        f, _x1v1(f.d), ks, cfg),
    "weak_q_landau_x1v1": lambda f, ks, pair, cfg: weak_q_landau(
        f, _x1v1(f.d), ks, cfg),
}


def _x1v1(d):
    from .testfunctions import position_velocity
    return position_velocity(d)


def evaluate_functional(kind: str, f: DensityModel, ks: KernelSet,
                        pair: DualPair, cfg: SamplerConfig) -> Estimate:
    return FUNCTIONAL_TABLE[kind](f, ks, pair, cfg)


def assemble_j(entropy_end: float, entropy_start: float,
               dissipation_integral: float, action_integral: float) -> float:
    """Variational total H(f_T) - H(f_0) + int D dt + int A dt (plain sum).

    Callers supply the time integrals (trapezoid sums over snapshots) with
    whatever prefactors their side of the limit carries.
    """
    return entropy_end - entropy_start + dissipation_integral + action_integral


def trapezoid_time(values, times) -> float:
    return float(np.trapezoid(np.asarray(values, dtype=float),
                              np.asarray(times, dtype=float)))


# ---------------------------------------------------------------------------
# Tensor-grid oracles (d = 2, x-factorised density, constant kappa)
# ---------------------------------------------------------------------------

def _require_reducible(f: DensityModel, ks: KernelSet):
    if f.d != 2:
        raise ValueError("the tensor-grid oracles run at d = 2")
    if not f.factorized_in_x:
        raise ValueError("oracle reduction needs a density factorised in x")
    if ks.kappa.form != "constant":
        raise ValueError("oracle reduction needs constant kappa")


def velocity_axes(f: DensityModel, L: float, n: int):
    """Per-coordinate Gauss-Legendre axes sized by the velocity marginals."""
    gm = f.v_marginal()
    sds = np.sqrt(np.einsum("kii->ki", gm.covs))
    axes = []
    for j in range(gm.m):
        lo = float(np.min(gm.means[:, j] - L * sds[:, j]))
        hi = float(np.max(gm.means[:, j] + L * sds[:, j]))
        axes.append(gauss_legendre_axis(lo, hi, n))
    return axes + axes


def dissipation_landau_grid(f: DensityModel, ks: KernelSet, L: float = 8.0,
                            n: int = 48) -> Estimate:
    """Deterministic D_L: positions integrate to one, leaving a 4-D velocity
    integral evaluated on a Gauss-Legendre tensor grid."""
    _require_reducible(f, ks)
    gm = f.v_marginal()
    ck = ks.kappa.c
    total = 0.0
    for pts, wts in grid_nodes_product(velocity_axes(f, L, n)):
        v, vs = pts[:, 0:2], pts[:, 2:4]
        w = v - vs
        r2 = np.sum(w * w, axis=1)
        ok = r2 > SPEED_EPS
        r = np.sqrt(np.where(ok, r2, 1.0))
        g = gm.grad_log(v) - gm.grad_log(vs)
        proj = g - (np.sum(g * w, axis=1) / np.where(ok, r2, 1.0))[:, None] * w
        amp2 = ks.a0(r) * r2
        dens = gm.pdf(v) * gm.pdf(vs)
        vals = np.where(ok, 0.5 * ck * dens * amp2 * np.sum(proj * proj, axis=1), 0.0)
        total += float(np.sum(vals * wts))
    return Estimate(total, 0.0, n ** 4, method="tensor_grid")


def _boltzmann_grid(f: DensityModel, ks: KernelSet, bracket, L: float,
                    n: int, m_theta: int) -> float:
    """Common driver: sum over the 4-D velocity grid, the theta-measure nodes
    and the two tangent points of bracket(G, G', theta) / theta^2."""
    _require_reducible(f, ks)
    gm = f.v_marginal()
    ck = ks.kappa.c
    th_nodes, th_w = ks.beta.theta_measure_nodes(ks.epsilon, m_theta)
    total = 0.0
    for pts, wts in grid_nodes_product(velocity_axes(f, L, n)):
        v, vs = pts[:, 0:2], pts[:, 2:4]
        w = v - vs
        r = np.linalg.norm(w, axis=1)
        ok = r > SPEED_EPS
        k = w / np.where(ok, r, 1.0)[:, None]
        a0 = ks.a0(np.where(ok, r, 1.0))
        logG = np.log(gm.pdf(v)) + np.log(gm.pdf(vs))
        centre = 0.5 * (v + vs)
        inner = np.zeros(len(pts))
        for th, tw in zip(th_nodes, th_w):
            for sign in (1.0, -1.0):
                p = sign * np.stack([k[:, 1], -k[:, 0]], axis=1)
                sigma = np.cos(th) * k + np.sin(th) * p
                half = 0.5 * r[:, None] * sigma
                vp = centre + half
                vsp = centre - half
                logGp = np.log(gm.pdf(vp)) + np.log(gm.pdf(vsp))
                inner += (tw / (th * th)) * bracket(logG, logGp)
        total += float(np.sum(np.where(ok, a0 * inner, 0.0) * wts))
    return ck * total


def dissipation_boltzmann_grid(f: DensityModel, ks: KernelSet, L: float = 8.0,
                               n: int = 32, m_theta: int = 96) -> Estimate:
    def bracket(logG, logGp):
        return 0.25 * (np.exp(logGp) - np.exp(logG)) * (logGp - logG)

    val = _boltzmann_grid(f, ks, bracket, L, n, m_theta)
    return Estimate(val, 0.0, n ** 4 * m_theta * 2, method="tensor_grid")


def dissipation_cosh_grid(f: DensityModel, ks: KernelSet, L: float = 8.0,
                          n: int = 32, m_theta: int = 96) -> Estimate:
    def bracket(logG, logGp):
        diff = np.exp(0.5 * logGp) - np.exp(0.5 * logG)
        return 0.5 * diff * diff

    val = _boltzmann_grid(f, ks, bracket, L, n, m_theta)
    return Estimate(val, 0.0, n ** 4 * m_theta * 2, method="tensor_grid")


def pair_mass_grid(f: DensityModel, ks: KernelSet, L: float = 6.0, n: int = 48) -> Estimate:
    """int F deta by the reduced oracle (sanity: equals one)."""
    _require_reducible(f, ks)
    gm = f.v_marginal()
    total = 0.0
    for pts, wts in grid_nodes_product(velocity_axes(f, L, n)):
        total += float(np.sum(gm.pdf(pts[:, 0:2]) * gm.pdf(pts[:, 2:4]) * wts))
    return Estimate(total, 0.0, n ** 4, method="tensor_grid")


# ---------------------------------------------------------------------------
# Cancellation-identity oracle (d = 2)
# ---------------------------------------------------------------------------

def convolution_gain_loss_grid(g, ks: KernelSet, v_points, L: float = 8.0,
                               n: int = 64, m_theta: int = 96) -> np.ndarray:
    """LHS of the gain-loss rearrangement at d = 2 for a velocity density g:

        I(v) = int_{R^2 x S^1} B_eps (g(v*') - g(v*)) dv* dsigma,

    evaluated by a tensor grid over v* and the theta-measure nodes (the
    tangent-point sum cancels the O(theta) term, so the rearranged integrand
    is regular against theta^2 beta_eps).
    """
    if ks.dim != 2:
        raise ValueError("implemented at d = 2")
    v_points = np.atleast_2d(np.asarray(v_points, dtype=float))
    lo = float(np.min(g.means - L * np.sqrt(np.einsum("kii->ki", g.covs))))
    hi = float(np.max(g.means + L * np.sqrt(np.einsum("kii->ki", g.covs))))
    ax = gauss_legendre_axis(lo, hi, n)
    th_nodes, th_w = ks.beta.theta_measure_nodes(ks.epsilon, m_theta)
    out = np.zeros(len(v_points))
    for pts, wts in grid_nodes_product([ax, ax]):
        gstar = g.pdf(pts)
        for i, v in enumerate(v_points):
            w = v[None, :] - pts
            r = np.linalg.norm(w, axis=1)
            ok = r > SPEED_EPS
            k = w / np.where(ok, r, 1.0)[:, None]
            a0 = ks.a0(np.where(ok, r, 1.0))
            centre = 0.5 * (v[None, :] + pts)
            inner = np.zeros(len(pts))
            for th, tw in zip(th_nodes, th_w):
                p = np.stack([k[:, 1], -k[:, 0]], axis=1)
                sigma_p = np.cos(th) * k + np.sin(th) * p
                sigma_m = np.cos(th) * k - np.sin(th) * p
                vsp_p = centre - 0.5 * r[:, None] * sigma_p
                vsp_m = centre - 0.5 * r[:, None] * sigma_m
                bracket = g.pdf(vsp_p) + g.pdf(vsp_m) - 2.0 * gstar
                inner += (tw / (th * th)) * bracket
            out[i] += float(np.sum(np.where(ok, a0 * inner, 0.0) * wts))
    return out


def convolution_with_s(g, ks: KernelSet, v_points, L: float = 8.0,
                       n: int = 64) -> np.ndarray:
    """RHS [g * S](v) = int S(|v - w|) g(w) dw on the same truncated box.

    S comes from the adaptive 1-D quadrature and is cached on a radial grid
    (piecewise-linear in between; S is smooth away from zero)."""
    v_points = np.atleast_2d(np.asarray(v_points, dtype=float))
    lo = float(np.min(g.means - L * np.sqrt(np.einsum("kii->ki", g.covs))))
    hi = float(np.max(g.means + L * np.sqrt(np.einsum("kii->ki", g.covs))))
    ax = gauss_legendre_axis(lo, hi, n)
    span = math.hypot(hi - lo, hi - lo) + float(np.max(np.abs(v_points))) + 1.0
    radii = np.linspace(1e-6, span, 512)
    s_tab = np.array([cancellation_s(ks, float(z)) for z in radii])
    out = np.zeros(len(v_points))
    for pts, wts in grid_nodes_product([ax, ax]):
        gw = g.pdf(pts)
        for i, v in enumerate(v_points):
            r = np.linalg.norm(v[None, :] - pts, axis=1)
            s_vals = np.interp(r, radii, s_tab)
            out[i] += float(np.sum(s_vals * gw * wts))
    return out
