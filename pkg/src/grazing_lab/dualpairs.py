"""Admissible dissipation-pair algebra (Psi, Psi*, Theta).

A pair consists of an even convex superlinear Psi* with Psi*(0) = 0 and
(Psi*)''(0) = 1, its convex conjugate Psi, and a symmetric 1-homogeneous
concave mean Theta tied to Psi* through the compatibility identity

    (Psi*)'(log s - log t) Theta(s, t) = s - t,    s, t > 0.

Built-ins: the quadratic pair (Psi* = r^2/2, Theta = logarithmic mean) and
the cosh pair (Psi* = 4(cosh(r/2) - 1), Theta = geometric mean).  Theta can
also be derived numerically from any strictly increasing odd (Psi*)'.

The cosh conjugate is evaluated as

    Psi(a) = 2 a asinh(a/2) - 2 sqrt(a^2 + 4) + 4,

which is the numerically verified Legendre transform (it satisfies
Psi(0) = 0 and Fenchel equality at a = (Psi*)'(r)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DualPair:
    """Evaluators for Psi*, (Psi*)', Psi and Theta plus metadata.

    ``c_theta`` is the constant in the mean bound Theta(s,t) <= c_theta (s+t);
    both built-ins satisfy it with 1/2.  ``satisfies_coth`` records whether
    (log Psi*)'(r) <= coth(r/4)/2 holds (true for both built-ins, with
    equality in the cosh case); pairs with the flag set obey the lower bound
    2 |sqrt s - sqrt t|^2 <= Psi*(log s - log t) Theta(s, t).
    """

    name: str
    psi_star: object
    psi_star_prime: object
    psi: object
    theta: object
    satisfies_coth: bool
    c_theta: float = 0.5


def _ratio_q_over_log1p(q):
    """q / log(1 + q), evaluated without cancellation; limit 1 at q = 0."""
    q = np.asarray(q, dtype=float)
    small = np.abs(q) < 1e-8
    out = np.empty_like(q)
    out[small] = 1.0 + 0.5 * q[small]
    qb = q[~small]
    out[~small] = qb / np.log1p(qb)
    return out


def log_mean(s, t):
    """Logarithmic mean (s - t)/(log s - log t), with diagonal value t.

    Computed as t * q / log1p(q) with q = (s - t)/t, which stays accurate to
    round-off across the diagonal (the naive quotient amplifies noise by
    1/|log(s/t)| there).  Vanishes whenever either argument is zero.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    pos = (s > 0) & (t > 0)
    if np.any(pos):
        sp, tp = s[pos], t[pos]
        q = (sp - tp) / tp
        out[pos] = tp * _ratio_q_over_log1p(q)
    return out if out.ndim else float(out)


def make_quadratic_pair() -> DualPair:
    """Psi = Psi* = r^2/2 with Theta the logarithmic mean."""
    return DualPair(
        name="quadratic",
        psi_star=lambda r: 0.5 * np.square(r),
        psi_star_prime=lambda r: np.asarray(r, dtype=float) + 0.0,
        psi=lambda a: 0.5 * np.square(a),
        theta=log_mean,
        satisfies_coth=True,
    )


def _psi_cosh(a):
    a = np.asarray(a, dtype=float)
    return 2.0 * a * np.arcsinh(0.5 * a) - 2.0 * np.sqrt(a * a + 4.0) + 4.0


def make_cosh_pair() -> DualPair:
    """Psi*(r) = 4(cosh(r/2) - 1) with Theta the geometric mean."""
    return DualPair(
        name="cosh",
        psi_star=lambda r: 4.0 * (np.cosh(0.5 * np.asarray(r, dtype=float)) - 1.0),
        psi_star_prime=lambda r: 2.0 * np.sinh(0.5 * np.asarray(r, dtype=float)),
        psi=_psi_cosh,
        theta=lambda s, t: np.sqrt(np.asarray(s, dtype=float) * np.asarray(t, dtype=float)),
        satisfies_coth=True,
    )


def derive_theta(psi_star_prime, probe_max: float = 40.0):
    """Build Theta(s, t) = (s - t) / (Psi*)'(log(s/t)) from (Psi*)'.

    Off the diagonal the quotient formula applies; on the diagonal the limit
    is t; at s = 0 or t = 0 the value is 0 (superlinearity).  The quotient
    is assembled as t * [q/log1p(q)] * [r/(Psi*)'(r)] with q = (s - t)/t and
    r = log1p(q): both bracketed factors are smooth with O(1) derivatives,
    so no near-diagonal noise amplification (the second factor switches to
    its limit 1 below |r| = 1e-8, exact to machine precision there since
    (Psi*)'(r) = r + O(r^3)).  A non-increasing (Psi*)' on a probe grid
    rejects the pair.
    """
    probe = np.linspace(1e-6, probe_max, 512)
    vals = np.asarray(psi_star_prime(probe), dtype=float)
    if np.any(np.diff(vals) <= 0):
        raise ValueError("(Psi*)' must be strictly increasing on (0, inf): pair rejected")

    def theta(s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        s, t = np.broadcast_arrays(s, t)
        out = np.zeros(s.shape)
        pos = (s > 0) & (t > 0)
        if np.any(pos):
            sp, tp = s[pos], t[pos]
            q = (sp - tp) / tp
            r = np.log1p(q)
            small = np.abs(r) < 1e-8
            correction = np.ones_like(r)
            rb = r[~small]
            correction[~small] = rb / np.asarray(psi_star_prime(rb), dtype=float)
            out[pos] = tp * _ratio_q_over_log1p(q) * correction
        return out if out.ndim else float(out)

    return theta


def legendre_transform(psi_star, psi_star_prime, a: float, tol: float = 1e-10,
                       max_iter: int = 100) -> float:
    """Psi(a) = sup_r {a r - Psi*(r)} by Newton on (Psi*)'(r) = a.

    The slope of (Psi*)' is taken by central differences; bisection on a
    bracketing interval is the fallback when Newton stalls.  Even in a:
    Psi(a) = Psi(|a|).
    """
    a = float(a)
    sign_a = abs(a)
    if sign_a == 0.0:
        return 0.0

    def g(r):
        return float(psi_star_prime(r)) - sign_a

    # bracket [0, hi]
    hi = max(1.0, sign_a)
    for _ in range(200):
        if g(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the conjugate supremum")

    r = min(sign_a, hi)  # exact for the quadratic pair, decent start otherwise
    lo = 0.0
    for _ in range(max_iter):
        val = g(r)
        if val > 0:
            hi = r
        else:
            lo = r
        if abs(val) <= tol * max(1.0, sign_a):
            break
        h = 1e-6 * max(abs(r), 1.0)
        slope = (float(psi_star_prime(r + h)) - float(psi_star_prime(r - h))) / (2 * h)
        step = val / slope if slope > 0 else None
        r_new = r - step if step is not None else 0.5 * (lo + hi)
        if not (lo < r_new < hi):
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= tol * max(1.0, abs(r)) and abs(val) <= 1e-6:
            r = r_new
            break
        r = r_new
    else:
        raise RuntimeError("conjugate solve did not converge")
    return sign_a * r - float(psi_star(r))


def make_derived_pair(name, psi_star, psi_star_prime, satisfies_coth=None) -> DualPair:
    """Assemble a pair from Psi* alone: Theta from the compatibility formula,
    Psi from the numeric Legendre transform, the coth flag from a scan."""
    theta = derive_theta(psi_star_prime)
    if satisfies_coth is None:
        satisfies_coth = coth_condition_holds(psi_star, psi_star_prime)

    def psi(a):
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0:
            return legendre_transform(psi_star, psi_star_prime, float(arr))
        return np.array([legendre_transform(psi_star, psi_star_prime, x) for x in arr.ravel()]
                        ).reshape(arr.shape)

    return DualPair(name=name, psi_star=psi_star, psi_star_prime=psi_star_prime,
                    psi=psi, theta=theta, satisfies_coth=bool(satisfies_coth))


def coth_condition_holds(psi_star, psi_star_prime, r_max: float = 20.0,
                         n: int = 2000, slack: float = 1e-9) -> bool:
    """Numeric scan of (log Psi*)'(r) <= coth(r/4)/2 over r in (0, r_max]."""
    r = np.linspace(1e-4, r_max, n)
    lhs = np.asarray(psi_star_prime(r), dtype=float) / np.asarray(psi_star(r), dtype=float)
    rhs = 0.5 / np.tanh(0.25 * r)
    return bool(np.all(lhs <= rhs + slack * np.abs(rhs)))


# registry of named custom Psi* choices usable from configuration files
def _quartic_psi_star(r):
    r = np.asarray(r, dtype=float)
    return r ** 4 / 12.0 + 0.5 * r * r


def _quartic_psi_star_prime(r):
    r = np.asarray(r, dtype=float)
    return r ** 3 / 3.0 + r


CUSTOM_PSI_REGISTRY = {
    "quartic": (_quartic_psi_star, _quartic_psi_star_prime),
}


def get_pair(name: str, custom_name: str | None = None) -> DualPair:
    if name == "quadratic":
        return make_quadratic_pair()
    if name == "cosh":
        return make_cosh_pair()
    if name == "custom":
        if custom_name not in CUSTOM_PSI_REGISTRY:
            raise KeyError(f"unknown custom pair {custom_name!r}; "
                           f"registered: {sorted(CUSTOM_PSI_REGISTRY)}")
        ps, psp = CUSTOM_PSI_REGISTRY[custom_name]
        return make_derived_pair(custom_name, ps, psp)
    raise KeyError(f"unknown pair name {name!r} (expected quadratic, cosh or custom)")


# ---------------------------------------------------------------------------
# Verification report
# ---------------------------------------------------------------------------

@dataclass
class CheckRecord:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "worst_residual": float(self.worst), "detail": self.detail}


@dataclass
class PairReport:
    pair: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def record(self, name, passed, worst, detail=""):
        self.checks.append(CheckRecord(name, bool(passed), float(worst), detail))

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"pair": self.pair, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def check_pair(pair: DualPair, n: int = 10_000, seed: int = 0,
               s_max: float = 10.0) -> PairReport:
    """Run every admissibility condition on random grids and report residuals.

    Identity checks use explicit tolerances (1e-10 compatibility, 1e-8
    Fenchel, 1e-6 for finite-difference second derivatives); convexity and
    concavity are midpoint-tested along random segments.
    """
    rng = np.random.default_rng(seed)
    rep = PairReport(pair.name)
    s = rng.uniform(1e-3, s_max, n)
    t = rng.uniform(1e-3, s_max, n)
    r = rng.uniform(-20.0, 20.0, n)

    # Psi* shape: even, vanishing at 0, unit curvature at 0
    even = np.max(np.abs(pair.psi_star(r) - pair.psi_star(-r)))
    rep.record("psi_star_even", even <= 1e-12 * np.max(np.abs(pair.psi_star(r))), even)
    at_zero = abs(float(pair.psi_star(0.0)))
    rep.record("psi_star_zero", at_zero <= 1e-14, at_zero)
    h = 1e-4
    dd0 = (float(pair.psi_star(h)) + float(pair.psi_star(-h))
           - 2.0 * float(pair.psi_star(0.0))) / (h * h)
    rep.record("psi_star_dd0", abs(dd0 - 1.0) <= 1e-6, abs(dd0 - 1.0))

    # compatibility (Psi*)'(log s - log t) Theta(s,t) = s - t
    rr = np.log(s) - np.log(t)
    resid = np.abs(np.asarray(pair.psi_star_prime(rr)) * np.asarray(pair.theta(s, t))
                   - (s - t)) / (s + t)
    rep.record("compatibility", np.max(resid) <= 1e-10, float(np.max(resid)))

    # Theta axioms
    th_st = np.asarray(pair.theta(s, t))
    sym = np.max(np.abs(th_st - np.asarray(pair.theta(t, s))) / (s + t))
    rep.record("theta_symmetric", sym <= 1e-12, sym)
    lam = rng.uniform(0.1, 5.0, n)
    hom = np.max(np.abs(np.asarray(pair.theta(lam * s, lam * t)) - lam * th_st)
                 / (lam * (s + t)))
    rep.record("theta_homogeneous", hom <= 1e-12, hom)
    one = abs(float(pair.theta(1.0, 1.0)) - 1.0)
    rep.record("theta_normalised", one <= 1e-12, one)
    at0 = float(np.max(np.abs(pair.theta(np.zeros(8), np.linspace(0.5, 4.0, 8)))))
    rep.record("theta_vanishes_at_zero", at0 <= 1e-12, at0)
    diag = np.max(np.abs(np.asarray(pair.theta(t, t)) - t) / t)
    rep.record("theta_diagonal", diag <= 1e-10, diag)

    # mean bound Theta <= c_theta (s + t)
    ratio = float(np.max(th_st / (s + t)))
    rep.record("theta_mean_bound", ratio <= pair.c_theta + 1e-12, ratio,
               f"c_theta={pair.c_theta}")

    # midpoint concavity of Theta / convexity of G along random segments
    s2 = rng.uniform(1e-3, s_max, n)
    t2 = rng.uniform(1e-3, s_max, n)
    mid_s, mid_t = 0.5 * (s + s2), 0.5 * (t + t2)
    conc = np.asarray(pair.theta(mid_s, mid_t)) - 0.5 * (
        th_st + np.asarray(pair.theta(s2, t2)))
    worst_conc = float(np.min(conc / (s + t + s2 + t2)))
    rep.record("theta_midpoint_concave", worst_conc >= -1e-10, worst_conc)

    def g_fun(a, b):
        rr_ = np.log(a) - np.log(b)
        return 0.25 * np.asarray(pair.psi_star(rr_)) * np.asarray(pair.theta(a, b))

    conv = 0.5 * (g_fun(s, t) + g_fun(s2, t2)) - g_fun(mid_s, mid_t)
    worst_conv = float(np.min(conv / (1.0 + np.abs(g_fun(s, t)) + np.abs(g_fun(s2, t2)))))
    rep.record("g_midpoint_convex", worst_conv >= -1e-10, worst_conv)

    # dissipation comparison Psi* Theta <= (s - t)(log s - log t)
    upper = (s - t) * rr - np.asarray(pair.psi_star(rr)) * th_st
    worst_up = float(np.min(upper / (1.0 + np.abs((s - t) * rr))))
    rep.record("psi_theta_upper", worst_up >= -1e-10, worst_up)

    # elementary inequality |sqrt s - sqrt t|^2 <= (s - t)(log s - log t)/4
    elem = 0.25 * (s - t) * rr - (np.sqrt(s) - np.sqrt(t)) ** 2
    worst_elem = float(np.min(elem / (s + t)))
    rep.record("elementary_sqrt_bound", worst_elem >= -1e-12, worst_elem)

    # coth condition and the induced lower bound
    coth_ok = coth_condition_holds(pair.psi_star, pair.psi_star_prime)
    rep.record("coth_condition", coth_ok == pair.satisfies_coth,
               0.0 if coth_ok == pair.satisfies_coth else 1.0,
               f"scan says {coth_ok}, pair declares {pair.satisfies_coth}")
    if coth_ok:
        low = np.asarray(pair.psi_star(rr)) * th_st - 2.0 * (np.sqrt(s) - np.sqrt(t)) ** 2
        worst_low = float(np.min(low / (s + t)))
        rep.record("pair_lower_bound", worst_low >= -1e-10, worst_low)

    # Fenchel on a grid, equality at the optimum
    a = np.linspace(-6.0, 6.0, 20)
    b = np.linspace(-6.0, 6.0, 20)
    pa = np.asarray(pair.psi(a), dtype=float)
    pb = np.asarray(pair.psi_star(b), dtype=float)
    gap = pa[:, None] + pb[None, :] - a[:, None] * b[None, :]
    worst_f = float(np.min(gap))
    rep.record("fenchel_inequality", worst_f >= -1e-8, worst_f)
    a_opt = np.asarray(pair.psi_star_prime(b), dtype=float)
    eq = np.abs(np.asarray(pair.psi(a_opt), dtype=float) + pb - a_opt * b)
    worst_eq = float(np.max(eq / (1.0 + np.abs(a_opt * b))))
    rep.record("fenchel_equality_at_optimum", worst_eq <= 1e-8, worst_eq)

    # Psi(r)/r non-decreasing for r > 0
    rg = np.linspace(0.3, 12.0, 200)
    q = np.asarray(pair.psi(rg), dtype=float) / rg
    worst_mono = float(np.min(np.diff(q)))
    rep.record("psi_over_r_monotone", worst_mono >= -1e-10, worst_mono)
    return rep
