"""Smooth test functions with analytic velocity derivatives.

Phase-space test functions are monomial polynomials in (x, v) multiplied by
compactly supported radial bumps (1 - |z|^2/R^2)_+^4 in x and in v (C^3 at
the support boundary, smooth inside).  Values, velocity gradients and
velocity Hessians are all closed-form; a finite-difference path exists
separately for oracle cross-checks.

Four-argument test functions Phi(x, x*, v, v*) used in the small-angle
sweeps are built symmetric (invariant under swapping the starred and
unstarred slots) and carry a smooth relative-speed guard that vanishes for
|v - v*| below a configurable delta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _pow(base, expo):
    """base**expo for integer expo >= 0, safe at base = 0."""
    if expo == 0:
        return np.ones_like(base)
    return base ** expo


@dataclass(frozen=True)
class Monomial:
    """coef * prod_i x_i^{ax_i} * prod_j v_j^{av_j}."""

    coef: float
    ax: tuple
    av: tuple


class PolyBump:
    """phi(x, v) = P(x, v) * bump(|x|^2) * bump(|v|^2).

    ``radius_x`` / ``radius_v`` of None drop the corresponding bump (useful
    for collision invariants, whose four-point gradient vanishes exactly).
    """

    def __init__(self, terms, radius_x=None, radius_v=None, name=""):
        self.terms = [Monomial(float(c), tuple(ax), tuple(av)) for c, ax, av in terms]
        self.radius_x = radius_x
        self.radius_v = radius_v
        self.name = name
        self.d = len(self.terms[0].ax)

    # radial bump u(s) = (1 - s/R^2)^4 on s = |z|^2 < R^2
    @staticmethod
    def _bump(s, R):
        if R is None:
            one = np.ones_like(s)
            return one, np.zeros_like(s), np.zeros_like(s)
        q = 1.0 - s / (R * R)
        inside = q > 0.0
        q = np.where(inside, q, 0.0)
        u = q ** 4
        du = np.where(inside, -4.0 * q ** 3 / (R * R), 0.0)
        ddu = np.where(inside, 12.0 * q ** 2 / (R * R) ** 2, 0.0)
        return u, du, ddu

    def _poly(self, x, v, want=0):
        """Polynomial part with optional v-gradient (want>=1) and v-Hessian (want>=2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        n, d = v.shape
        val = np.zeros(n)
        grad = np.zeros((n, d)) if want >= 1 else None
        hess = np.zeros((n, d, d)) if want >= 2 else None
        for mono in self.terms:
            xpart = np.ones(n)
            for i, a in enumerate(mono.ax):
                if a:
                    xpart = xpart * _pow(x[:, i], a)
            vparts = [_pow(v[:, j], b) for j, b in enumerate(mono.av)]
            vprod = np.prod(np.stack(vparts, axis=1), axis=1) if d else np.ones(n)
            val += mono.coef * xpart * vprod
            if want >= 1:
                for j, b in enumerate(mono.av):
                    if b == 0:
                        continue
                    rest = xpart * b * _pow(v[:, j], b - 1)
                    for jj, bb in enumerate(mono.av):
                        if jj != j:
                            rest = rest * vparts[jj]
                    grad[:, j] += mono.coef * rest
            if want >= 2:
                for j, b in enumerate(mono.av):
                    for l, bl in enumerate(mono.av):
                        if j == l:
                            if b < 2:
                                continue
                            term = xpart * b * (b - 1) * _pow(v[:, j], b - 2)
                            for jj, bb in enumerate(mono.av):
                                if jj != j:
                                    term = term * vparts[jj]
                        else:
                            if b == 0 or bl == 0:
                                continue
                            term = xpart * b * _pow(v[:, j], b - 1) * bl * _pow(v[:, l], bl - 1)
                            for jj, bb in enumerate(mono.av):
                                if jj not in (j, l):
                                    term = term * vparts[jj]
                        hess[:, j, l] += mono.coef * term
        return val, grad, hess

    def value(self, x, v):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        v2 = np.atleast_2d(np.asarray(v, dtype=float))
        val, _, _ = self._poly(x2, v2, want=0)
        ux, _, _ = self._bump(np.sum(x2 * x2, axis=1), self.radius_x)
        uv, _, _ = self._bump(np.sum(v2 * v2, axis=1), self.radius_v)
        out = val * ux * uv
        return out if np.ndim(x) > 1 else float(out[0])

    def grad_v(self, x, v):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        v2 = np.atleast_2d(np.asarray(v, dtype=float))
        val, gp, _ = self._poly(x2, v2, want=1)
        ux, _, _ = self._bump(np.sum(x2 * x2, axis=1), self.radius_x)
        uv, duv, _ = self._bump(np.sum(v2 * v2, axis=1), self.radius_v)
        out = (gp * uv[:, None] + val[:, None] * duv[:, None] * 2.0 * v2) * ux[:, None]
        return out if np.ndim(x) > 1 else out[0]

    def hess_v(self, x, v):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        v2 = np.atleast_2d(np.asarray(v, dtype=float))
        n, d = v2.shape
        val, gp, hp = self._poly(x2, v2, want=2)
        ux, _, _ = self._bump(np.sum(x2 * x2, axis=1), self.radius_x)
        uv, duv, dduv = self._bump(np.sum(v2 * v2, axis=1), self.radius_v)
        eye = np.eye(d)
        out = hp * uv[:, None, None]
        cross = gp[:, :, None] * v2[:, None, :] + v2[:, :, None] * gp[:, None, :]
        out += 2.0 * duv[:, None, None] * cross
        out += val[:, None, None] * (2.0 * duv[:, None, None] * eye[None, :, :]
                                     + 4.0 * dduv[:, None, None]
                                     * v2[:, :, None] * v2[:, None, :])
        out *= ux[:, None, None]
        return out if np.ndim(x) > 1 else out[0]

    def __call__(self, x, v):
        return self.value(x, v)


def _unit(d, j):
    e = [0] * d
    e[j] = 1
    return tuple(e)


def _zero(d):
    return tuple([0] * d)


def constant_one(d: int) -> PolyBump:
    return PolyBump([(1.0, _zero(d), _zero(d))], name="one")


def velocity_component(d: int, j: int = 0) -> PolyBump:
    return PolyBump([(1.0, _zero(d), _unit(d, j))], name=f"v{j + 1}")


def speed_squared(d: int) -> PolyBump:
    terms = [(1.0, _zero(d), tuple(2 if i == j else 0 for i in range(d))) for j in range(d)]
    return PolyBump(terms, name="|v|^2")


def collision_invariants(d: int):
    """phi in {1, v1, |v|^2}: the four-point gradient vanishes identically."""
    return [constant_one(d), velocity_component(d, 0), speed_squared(d)]


def position_velocity(d: int) -> PolyBump:
    """phi(x, v) = x1 v1 (no bump; used for weak-operator pairings)."""
    return PolyBump([(1.0, _unit(d, 0), _unit(d, 0))], name="x1*v1")


def probe_suite(d: int, radius: float = 4.0):
    """Three compactly supported bump polynomials for the small-angle bounds."""
    suite = [
        PolyBump([(1.0, _zero(d), _unit(d, min(1, d - 1)))],
                 radius_x=radius, radius_v=radius, name="bump*v2"),
        PolyBump([(1.0, _unit(d, 0), _unit(d, 0))],
                 radius_x=radius, radius_v=radius, name="bump*x1v1"),
        PolyBump([(1.0, _zero(d), tuple(1 if i < min(2, d) else 0 for i in range(d))),
                  (0.5, _unit(d, min(1, d - 1)), _zero(d))],
                 radius_x=radius, radius_v=radius, name="bump*(v1v2+x2/2)"),
    ]
    return suite


def smoothstep3(t):
    """C^3 polynomial step: 0 below 0, 1 above 1, 35t^4-84t^5+70t^6-20t^7 between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t ** 3)


@dataclass
class SymmetricPairFunction:
    """Phi(x, x*, v, v*) = [psi(x, v) + psi(x*, v*)] * guard(|v - v*|).

    Symmetric under the simultaneous swap (x, v) <-> (x*, v*); the guard is a
    C^3 step that vanishes for |v - v*| <= delta and equals one above
    2*delta, so the function is supported away from the kinetic singularity.
    The collision map preserves |v - v*|, hence the guard value is invariant
    along every sigma.
    """

    psi: PolyBump
    delta: float = 0.25
    name: str = field(default="")

    def guard(self, v, v_star):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        v_star = np.atleast_2d(np.asarray(v_star, dtype=float))
        r = np.linalg.norm(v - v_star, axis=-1)
        return smoothstep3((r - self.delta) / self.delta)

    def value(self, x, x_star, v, v_star):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        xs2 = np.atleast_2d(np.asarray(x_star, dtype=float))
        v2 = np.atleast_2d(np.asarray(v, dtype=float))
        vs2 = np.atleast_2d(np.asarray(v_star, dtype=float))
        core = self.psi.value(x2, v2) + self.psi.value(xs2, vs2)
        out = core * self.guard(v2, vs2)
        return out if np.ndim(x) > 1 else float(out[0])

    def __call__(self, x, x_star, v, v_star):
        return self.value(x, x_star, v, v_star)


def default_pair_function(d: int, delta: float = 0.25) -> SymmetricPairFunction:
    psi = PolyBump([(1.0, _zero(d), _unit(d, min(1, d - 1)))],
                   radius_x=4.0, radius_v=4.0, name="bump*v2")
    return SymmetricPairFunction(psi, delta=delta, name="sym(bump*v2)")
