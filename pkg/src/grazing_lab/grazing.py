"""Small-angle (grazing) limit harness.

Sweeps the scaling parameter eps downward and measures how the four-point
(Boltzmann-side) quantities approach their projected (Landau-side) targets:

  * dissipation sweep:  D_cosh^eps(f) -> (1/2) D_L(f) at fixed f,
  * sphere-square limit:  int |four-point grad Phi|^2 B_eps dsigma -> 8 |proj grad Phi|^2,
  * first-moment limit:   int (four-point grad Phi) B_eps dsigma -> 2 * proj-div(proj grad Phi),
  * weak operator:        <Q_B^eps(f,f), phi> -> <Q_L(f,f), phi>,

plus the pointwise bounds and limits of the four-point gradient itself
(theta-uniform constants and first-order rates).

The harness fixes the density across eps: the functional limits are
statements about the kernel scaling alone, so freezing f isolates them from
any solver noise.  Landau targets are always produced by two independent
routes before a sweep is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .densities import DensityModel
from .dualpairs import DualPair
from .functionals import (dissipation_cosh_direct, dissipation_landau,
                          dissipation_landau_grid, dissipation_psi,
                          landau_pairing_integrand, weak_q_boltzmann,
                          weak_q_landau)
from .kernels import KernelSet, angular_target
from .quadrature import Estimate, SamplerConfig


# ---------------------------------------------------------------------------
# Probe frames and finite-difference targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeFrame:
    """A frozen pre-collision configuration with a fixed tangent direction."""

    x: np.ndarray
    x_star: np.ndarray
    v: np.ndarray
    v_star: np.ndarray
    p: np.ndarray

    @property
    def relative_speed(self) -> float:
        return float(np.linalg.norm(self.v - self.v_star))


def probe_frames(d: int, n: int, rng, min_speed: float = 0.6,
                 max_speed: float = 4.0, scale: float = 1.0):
    """Random frames with relative speeds kept inside [min_speed, max_speed]."""
    out = []
    while len(out) < n:
        x, xs = rng.normal(0, scale, d), rng.normal(0, scale, d)
        v, vs = rng.normal(0, scale, d), rng.normal(0, scale, d)
        r = np.linalg.norm(v - vs)
        if not (min_speed <= r <= max_speed):
            continue
        k = geo.relative_direction(v, vs)
        p = geo.tangent_frame(k, rng.uniform(-1, 1) if d == 2
                              else rng.uniform(0, 2 * np.pi))
        out.append(ProbeFrame(x, xs, v, vs, p))
    return out


def extended_four_point(Phi, x, xs, v, vs, vp, vsp):
    """Phi' + Phi'_* - Phi - Phi_* with the swapped-slot convention
    Phi_* = Phi(x*, x, v*, v), Phi'_* = Phi(x*, x, v*', v')."""
    return (np.asarray(Phi(x, xs, vp, vsp)) + np.asarray(Phi(xs, x, vsp, vp))
            - np.asarray(Phi(x, xs, v, vs)) - np.asarray(Phi(xs, x, vs, v)))


def landau_divergence_fd(Phi, frame: ProbeFrame, a0, h: float = 1e-4,
                         h_inner: float = 1e-5) -> float:
    """proj-div target by nested central differences:

        2 * proj-div(proj grad Phi) = A0(r) * (grad_v - grad_v*) . W,
        W(v, v*) = |v - v*|^2 Pi (grad_v - grad_v*)(Phi + Phi_swap).

    Independent of the expanded analytic identity used by the weak-operator
    pairings, so the two paths cross-check each other.
    """
    x, xs = frame.x, frame.x_star

    def w_field(v, vs):
        gv, gvs = geo.pair_grad_fd(Phi, x, xs, v, vs, h_inner)
        sgvs, sgv = geo.pair_grad_fd(Phi, xs, x, vs, v, h_inner)
        nabla0 = (gv + sgv) - (gvs + sgvs)
        w = v - vs
        r2 = float(np.dot(w, w))
        proj = nabla0 - np.dot(nabla0, w) / r2 * w
        return r2 * proj

    d = frame.v.shape[0]
    div = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        div += (w_field(frame.v + e, frame.v_star)[i]
                - w_field(frame.v - e, frame.v_star)[i]) / (2 * h)
        div -= (w_field(frame.v, frame.v_star + e)[i]
                - w_field(frame.v, frame.v_star - e)[i]) / (2 * h)
    r = frame.relative_speed
    return float(a0(r)) * div


def sphere_collision_integral(Phi, frame: ProbeFrame, ks: KernelSet,
                              power: int = 2, m_theta: int = 96,
                              m_p: int = 64):
    """int over the sphere of (four-point grad Phi)^power B_eps dsigma.

    Deterministic: theta nodes absorb the theta^2 beta_eps measure (the
    integrand divided by theta^2 is regular), p nodes are the two tangent
    points (d=2) or an m_p-point trapezoid on the circle (d=3).
    """
    x, xs, v, vs = frame.x, frame.x_star, frame.v, frame.v_star
    k = geo.relative_direction(v, vs)
    r = frame.relative_speed
    th_nodes, th_w = ks.beta.theta_measure_nodes(ks.epsilon, m_theta)
    p_pts, p_w = geo.p_average_nodes(k, m_p)
    n_p = p_pts.shape[0]
    centre = 0.5 * (v + vs)

    total = 0.0
    xb = np.broadcast_to(x, (n_p, x.shape[0]))
    xsb = np.broadcast_to(xs, (n_p, xs.shape[0]))
    vb = np.broadcast_to(v, (n_p, v.shape[0]))
    vsb = np.broadcast_to(vs, (n_p, vs.shape[0]))
    for th, tw in zip(th_nodes, th_w):
        sigma = np.cos(th) * k[None, :] + np.sin(th) * p_pts
        vp = centre[None, :] + 0.5 * r * sigma
        vsp = centre[None, :] - 0.5 * r * sigma
        vals = extended_four_point(Phi, xb, xsb, vb, vsb, vp, vsp) ** power
        total += (tw / (th * th)) * float(np.sum(vals * p_w))
    return float(ks.a0(r)) * total


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    epsilons: list
    values: list          # Estimate per eps
    target: Estimate
    gaps: list = field(default_factory=list)
    fitted_rate: float = float("nan")
    achieved_gap: float = float("nan")
    psi_values: list = field(default_factory=list)
    notes: list = field(default_factory=list)       # advisory only
    failures: list = field(default_factory=list)    # route disagreements etc.

    def rows(self):
        out = []
        for eps, val, gap in zip(self.epsilons, self.values, self.gaps):
            out.append({
                "epsilon": eps,
                "value": val.value, "value_stderr": val.std_error,
                "target": self.target.value, "target_stderr": self.target.std_error,
                "gap": gap, "rate": self.fitted_rate,
            })
        return out


def fit_rate(epsilons, gaps, n_fit: int = 3):
    """Least-squares slope of log|gap| against log(eps) on the last n points."""
    eps = np.asarray(epsilons, dtype=float)
    g = np.abs(np.asarray(gaps, dtype=float))
    keep = g > 0
    eps, g = eps[keep], g[keep]
    if eps.size < 2:
        return float("nan")
    eps, g = eps[-n_fit:], g[-n_fit:]
    if eps.size < 2:
        return float("nan")
    slope = np.polyfit(np.log(eps), np.log(g), 1)[0]
    return float(slope)


def _check_angular_invariance(ks: KernelSet, eps_list, tol: float = 1e-6):
    target = angular_target(ks.dim)
    for eps in eps_list:
        got = ks.beta.angular_momentum(eps)
        if abs(got - target) > tol * target:
            raise ValueError(f"angular normalisation broken at eps={eps}: {got}")


def sweep_dissipation(f: DensityModel, pair: DualPair, ks: KernelSet,
                      eps_list, cfg: SamplerConfig, oracle: bool = True,
                      grid_n: int = 32, grid_m_theta: int = 96,
                      grid_L: float = 8.0) -> SweepResult:
    """Sweep D_cosh^eps (and D_Psi*^eps for the given pair) against (1/2) D_L.

    The Landau target comes from the analytic-gradient Monte Carlo route and,
    when the density reduces (d = 2, x-factorised, constant kappa), from the
    tensor-grid oracle; the two must agree within 3 standard errors.  The
    rate is fitted only on eps values whose gap exceeds its own 3-sigma
    noise; pure-noise tails are excluded and noted.
    """
    eps_list = sorted(eps_list, reverse=True)
    _check_angular_invariance(ks, eps_list)
    notes, failures = [], []

    dl_mc = dissipation_landau(f, ks, cfg.with_seed(cfg.seed + 977))
    target = dl_mc.scaled(0.5)
    if oracle:
        try:
            dl_grid = dissipation_landau_grid(f, ks, L=grid_L, n=max(grid_n, 40))
            if not dl_mc.within(dl_grid, 3.0,
                                extra=1e-12 * (1.0 + abs(dl_mc.value))):
                failures.append(f"Landau target routes disagree: mc={dl_mc.value:.6g} "
                                f"grid={dl_grid.value:.6g}")
            target = dl_grid.scaled(0.5)
        except ValueError as err:
            notes.append(f"grid target unavailable ({err}); using MC route only")

    values, psi_values = [], []
    for i, eps in enumerate(eps_list):
        ks_eps = ks.with_epsilon(eps)
        cfg_eps = cfg.with_seed(cfg.seed + i)
        values.append(dissipation_cosh_direct(f, ks_eps, cfg_eps))
        psi_values.append(dissipation_psi(f, ks_eps, pair, cfg_eps))
    gaps = [v.value - target.value for v in values]

    signal = [(e, g) for e, g, v in zip(eps_list, gaps, values)
              if abs(g) > 3.0 * (v.std_error + target.std_error)]
    if len(signal) >= 2:
        rate = fit_rate([e for e, _ in signal], [g for _, g in signal],
                        n_fit=min(3, len(signal)))
    else:
        rate = float("nan")
        notes.append("MC noise exceeds the gap on nearly all eps; widen the "
                     "eps list upward to fit a rate")

    res = SweepResult(list(eps_list), values, target, gaps, rate,
                      abs(gaps[-1]), psi_values, notes, failures)
    return res


@dataclass
class SphereSweepReport:
    epsilons: list
    mean_rel_gap: list      # per eps, squares limit
    max_rel_gap_last: float
    rate: float
    first_moment_rel_gap: float   # at the last eps
    n_frames: int
    n_rejected: int

    def rows(self):
        return [{"epsilon": e, "mean_rel_gap": g, "rate": self.rate}
                for e, g in zip(self.epsilons, self.mean_rel_gap)]


def frame_is_admissible(Phi, fr: ProbeFrame, ks: KernelSet,
                        guard_tol: float = 1e-12,
                        min_target: float = 0.1) -> bool:
    """Probes for the per-frame limits must avoid two degeneracies.

    First, the relative speed must stay clear of the delta guard of Phi.
    Second, the limit target 8 |proj grad Phi|^2 must be bounded away from
    zero: where the gradient of Phi is tiny (support boundary) or aligned
    with v - v* (the projection annihilates it), the target vanishes while
    the O(eps^2) remainder keeps its own scale, so a *relative* tolerance is
    ill-posed on that measure-zero set.
    """
    if hasattr(Phi, "guard") and Phi.guard(fr.v, fr.v_star)[0] < 1.0 - guard_tol:
        return False
    grad = geo.landau_gradient_ext(Phi, fr.x, fr.x_star, fr.v, fr.v_star, ks.a0)
    return 8.0 * float(grad @ grad) >= min_target


def sphere_probe_frames(Phi, ks: KernelSet, d: int, n: int, rng,
                        min_target: float = 0.1, **kwargs):
    """Random probe frames that satisfy the guard and target-size filters."""
    out = []
    while len(out) < n:
        for fr in probe_frames(d, n, rng, **kwargs):
            if frame_is_admissible(Phi, fr, ks, min_target=min_target):
                out.append(fr)
                if len(out) == n:
                    break
    return out


def sweep_sphere_square(Phi, ks: KernelSet, eps_list, probes,
                        m_theta: int = 96, m_p: int = 64,
                        guard_tol: float = 1e-12,
                        min_target: float = 0.1) -> SphereSweepReport:
    """Per-frame verification of the sphere-square and first-moment limits.

    Frames entering the delta guard of Phi, or whose limit target falls
    below ``min_target`` (the degenerate set where a relative tolerance is
    ill-posed), are rejected and counted.  Targets: 8 |proj grad Phi|^2 with
    the gradient from central differences, and the nested finite-difference
    divergence for the first moment.
    """
    eps_list = sorted(eps_list, reverse=True)
    _check_angular_invariance(ks, eps_list)
    kept, n_rej = [], 0
    for fr in probes:
        if frame_is_admissible(Phi, fr, ks, guard_tol, min_target):
            kept.append(fr)
        else:
            n_rej += 1
    if not kept:
        raise ValueError("no probe frames survive the delta guard")

    sq_targets, fm_targets = [], []
    for fr in kept:
        grad = geo.landau_gradient_ext(Phi, fr.x, fr.x_star, fr.v, fr.v_star, ks.a0)
        sq_targets.append(8.0 * float(np.dot(grad, grad)))
        fm_targets.append(landau_divergence_fd(Phi, fr, ks.a0))

    rel_gaps = np.zeros((len(eps_list), len(kept)))
    fm_gap_last = 0.0
    for ie, eps in enumerate(eps_list):
        ks_eps = ks.with_epsilon(eps)
        fm_rel = []
        for i, fr in enumerate(kept):
            val = sphere_collision_integral(Phi, fr, ks_eps, power=2,
                                            m_theta=m_theta, m_p=m_p)
            rel_gaps[ie, i] = abs(val - sq_targets[i]) / max(abs(sq_targets[i]), 1e-300)
            if ie == len(eps_list) - 1:
                fm = sphere_collision_integral(Phi, fr, ks_eps, power=1,
                                               m_theta=m_theta, m_p=m_p)
                scale = max(abs(fm_targets[i]), np.sqrt(sq_targets[i] / 8.0), 1e-12)
                fm_rel.append(abs(fm - fm_targets[i]) / scale)
        if ie == len(eps_list) - 1:
            fm_gap_last = float(np.max(fm_rel))

    mean_gaps = rel_gaps.mean(axis=1)
    rate = fit_rate(eps_list, mean_gaps, n_fit=max(3, len(eps_list) - 1))
    return SphereSweepReport(list(eps_list), list(mean_gaps),
                             float(rel_gaps[-1].max()), rate, fm_gap_last,
                             len(kept), n_rej)


@dataclass
class GradientLemmaReport:
    theta_list: list
    bd1_constants: list     # max over frames of |bgrad| / (theta r), per theta
    bd2_constants: list     # max over frames of |p-avg| / (|S^{d-2}| theta^2 (r + r^2))
    conv1_slope: float
    conv2_slope: float
    conv1_errors: list      # mean abs error per theta
    conv2_errors: list

    @property
    def bd1_stable(self) -> bool:
        c = np.asarray(self.bd1_constants)
        return bool(c.max() <= 2.0 * c.min() and np.all(np.isfinite(c)))

    @property
    def bd2_stable(self) -> bool:
        c = np.asarray(self.bd2_constants)
        return bool(c.max() <= 2.0 * c.min() and np.all(np.isfinite(c)))


def check_gradient_lemma(phi, probes, theta_list, m_p: int = 64) -> GradientLemmaReport:
    """theta-uniform bounds and first-order pointwise limits of the
    four-point gradient of a smooth compactly supported phi."""
    theta_list = sorted(theta_list, reverse=True)
    n_t = len(theta_list)
    bd1 = np.zeros((n_t, len(probes)))
    bd2 = np.zeros((n_t, len(probes)))
    e1 = np.zeros((n_t, len(probes)))
    e2 = np.zeros((n_t, len(probes)))
    for i, fr in enumerate(probes):
        r = fr.relative_speed
        k = geo.relative_direction(fr.v, fr.v_star)
        p_pts, p_w = geo.p_average_nodes(k, m_p)
        sphere = float(np.sum(p_w))
        limit1 = 0.5 * r * float(
            fr.p @ (phi.grad_v(fr.x, fr.v) - phi.grad_v(fr.x_star, fr.v_star)))
        expr = landau_pairing_integrand(
            phi, fr.x[None], fr.x_star[None], fr.v[None], fr.v_star[None])[0]
        limit2 = sphere / (8.0 * (len(fr.v) - 1)) * expr
        for j, th in enumerate(theta_list):
            frame = geo.CollisionFrame.from_angles(
                fr.x, fr.x_star, fr.v, fr.v_star, th, fr.p)
            bg = geo.boltzmann_gradient(phi, frame)
            bd1[j, i] = abs(bg) / (th * r)
            e1[j, i] = abs(bg / th - limit1)
            centre = 0.5 * (fr.v + fr.v_star)
            sigma = np.cos(th) * k[None, :] + np.sin(th) * p_pts
            vp = centre[None, :] + 0.5 * r * sigma
            vsp = centre[None, :] - 0.5 * r * sigma
            vals = geo.boltzmann_gradient_points(
                phi,
                np.broadcast_to(fr.x, vp.shape), np.broadcast_to(fr.x_star, vp.shape),
                np.broadcast_to(fr.v, vp.shape), np.broadcast_to(fr.v_star, vp.shape),
                vp, vsp)
            avg = float(np.sum(vals * p_w))
            bd2[j, i] = abs(avg) / (sphere * th * th * (r + r * r))
            e2[j, i] = abs(avg / (th * th) - limit2)
    slope1 = fit_rate(theta_list, e1.mean(axis=1), n_fit=n_t)
    slope2 = fit_rate(theta_list, e2.mean(axis=1), n_fit=n_t)
    return GradientLemmaReport(list(theta_list),
                               list(bd1.max(axis=1)), list(bd2.max(axis=1)),
                               slope1, slope2,
                               list(e1.mean(axis=1)), list(e2.mean(axis=1)))


def sweep_weak_operator(f: DensityModel, phi, ks: KernelSet, eps_list,
                        cfg: SamplerConfig, exact_target: float | None = None
                        ) -> SweepResult:
    """<Q_B^eps(f,f), phi> against the Landau pairing.

    The target is the analytic-gradient Monte Carlo Landau pairing unless an
    exact value (moment closed form) is supplied, in which case both are
    computed and cross-checked.
    """
    eps_list = sorted(eps_list, reverse=True)
    _check_angular_invariance(ks, eps_list)
    notes, failures = [], []
    ql = weak_q_landau(f, phi, ks, cfg.with_seed(cfg.seed + 977))
    if exact_target is not None:
        if not ql.within(exact_target, 3.0,
                         extra=1e-12 * (1.0 + abs(ql.value))):
            failures.append(f"Landau pairing routes disagree: mc={ql.value:.6g} "
                            f"exact={exact_target:.6g}")
        target = Estimate(exact_target, 0.0, 1, method="tensor_grid")
    else:
        target = ql

    values = []
    for i, eps in enumerate(eps_list):
        values.append(weak_q_boltzmann(f, phi, ks.with_epsilon(eps),
                                       cfg.with_seed(cfg.seed + i)))
    gaps = [v.value - target.value for v in values]
    rate = fit_rate(eps_list, gaps, n_fit=min(3, len(eps_list)))
    res = SweepResult(list(eps_list), values, target, gaps, rate,
                      abs(gaps[-1]), notes=notes, failures=failures)
    return res


def linear_gap_coefficient(epsilons, gaps) -> float:
    """Least-squares C in gap ~ C * eps (through the origin)."""
    eps = np.asarray(epsilons, dtype=float)
    g = np.asarray(gaps, dtype=float)
    denom = float(np.sum(eps * eps))
    return float(np.sum(eps * g) / denom) if denom > 0 else float("nan")
