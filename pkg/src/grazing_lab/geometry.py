"""Collision geometry on the sphere S^{d-1}, d in {2, 3}.

Implements the elastic two-body collision map

    v' = (v + v*)/2 + |v - v*|/2 sigma,    v*' = (v + v*)/2 - |v - v*|/2 sigma,

the deviation angle theta = arccos(k . sigma) with k = (v - v*)/|v - v*|,
the tangent-sphere parametrisation sigma = k cos(theta) + p sin(theta) with
p in S^{d-2} orthogonal to k, the orthogonal projection onto (v - v*)^perp,
and the two gradients acting on phase-space test functions:

    four-point gradient   phi(x,v') + phi(x*,v*') - phi(x,v) - phi(x*,v*)
    projected gradient    sqrt(A) Pi_{(v-v*)^perp} (grad_v phi - (grad_v phi)*)

with A(r) = A0(r) r^2.  Every function accepts single vectors of shape (d,)
or batches of shape (n, d) and broadcasts; all are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-10
DEGENERATE_TOL = 1e-14


class DegenerateFrameError(ValueError):
    """Raised when v = v* makes the collision frame ill-defined."""


def _norm(a):
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def _check_unit(u, name="sigma", tol=UNIT_TOL):
    n = _norm(u)
    if np.any(np.abs(n - 1.0) > tol):
        raise ValueError(f"{name} must be a unit vector (|{name}| - 1 exceeds {tol:g})")


def perp_sphere_measure(d: int) -> float:
    """Total measure |S^{d-2}| of the tangent sphere: 2 for d=2, 2*pi for d=3."""
    if d == 2:
        return 2.0
    if d == 3:
        return 2.0 * np.pi
    raise ValueError("only d in {2, 3} is supported")


def relative_direction(v, v_star):
    """Unit vector k = (v - v*)/|v - v*|; degenerate pairs raise."""
    w = np.asarray(v, dtype=float) - np.asarray(v_star, dtype=float)
    r = _norm(w)
    scale = _norm(v) + _norm(v_star) + 1.0
    if np.any(r <= DEGENERATE_TOL * scale):
        raise DegenerateFrameError("v = v*: relative direction undefined")
    return w / r[..., None]


def post_collision(v, v_star, sigma):
    """Momentum- and energy-conserving collision map (v, v*, sigma) -> (v', v*')."""
    _check_unit(sigma)
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    centre = 0.5 * (v + v_star)
    half = 0.5 * _norm(v - v_star)[..., None] * sigma
    return centre + half, centre - half


def deviation_angle(v, v_star, sigma):
    """arccos(k . sigma), clamped to [0, pi].  Kernels restrict to [0, pi/2]."""
    _check_unit(sigma)
    k = relative_direction(v, v_star)
    dot = np.clip(np.sum(k * np.asarray(sigma, dtype=float), axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def tangent_frame(k, angle_or_sign):
    """A unit vector p orthogonal to k.

    d=2: the two-point set {(k2,-k1), (-k2,k1)}; nonnegative sign selects the
    first.  d=3: the point on the unit circle in k^perp at the given angle,
    with the convention that k=(0,0,1), angle=0 gives (1,0,0).
    """
    k = np.asarray(k, dtype=float)
    _check_unit(k, "k")
    d = k.shape[-1]
    if d == 2:
        s = np.where(np.asarray(angle_or_sign, dtype=float) >= 0.0, 1.0, -1.0)
        p = np.stack([k[..., 1], -k[..., 0]], axis=-1)
        return s[..., None] * p if np.ndim(s) else s * p
    if d == 3:
        e1, e2 = perp_basis(k)
        a = np.asarray(angle_or_sign, dtype=float)[..., None]
        return np.cos(a) * e1 + np.sin(a) * e2
    raise ValueError("only d in {2, 3} is supported")


def perp_basis(k):
    """Deterministic orthonormal basis (e1, e2) of k^perp for d=3.

    The reference axis is the coordinate direction least aligned with k
    (lowest index on ties), so k=(0,0,1) gives e1=(1,0,0), e2=(0,1,0).
    """
    k = np.asarray(k, dtype=float)
    squeeze = k.ndim == 1
    kk = np.atleast_2d(k)
    idx = np.argmin(np.abs(kk), axis=-1)
    axis = np.zeros_like(kk)
    axis[np.arange(kk.shape[0]), idx] = 1.0
    e1 = axis - np.sum(axis * kk, axis=-1, keepdims=True) * kk
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(kk, e1)
    if squeeze:
        return e1[0], e2[0]
    return e1, e2


def sigma_from_angles(k, theta, p):
    """Reconstruct sigma = k cos(theta) + p sin(theta)."""
    theta = np.asarray(theta, dtype=float)[..., None]
    return np.asarray(k, dtype=float) * np.cos(theta) + np.asarray(p, dtype=float) * np.sin(theta)


def sample_p(k, rng, n=None):
    """Uniform samples on S^{d-2}_{k^perp} (two points for d=2, circle for d=3)."""
    k = np.asarray(k, dtype=float)
    d = k.shape[-1]
    size = k.shape[0] if k.ndim == 2 else n
    if d == 2:
        signs = rng.integers(0, 2, size=size) * 2.0 - 1.0
        return tangent_frame(k, signs)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return tangent_frame(k, angles)


def p_average_nodes(k, m: int = 64):
    """Deterministic nodes/weights for the p-integral over S^{d-2}_{k^perp}.

    Weights sum to |S^{d-2}|.  d=2: the two points with unit weight; d=3:
    m-point trapezoid on the circle (spectrally accurate for smooth
    integrands, exact for trigonometric polynomials of degree < m).
    """
    k = np.asarray(k, dtype=float)
    d = k.shape[-1]
    if d == 2:
        pts = np.stack([tangent_frame(k, 1.0), tangent_frame(k, -1.0)])
        return pts, np.array([1.0, 1.0])
    angles = 2.0 * np.pi * np.arange(m) / m
    pts = np.stack([tangent_frame(k, a) for a in angles])
    return pts, np.full(m, 2.0 * np.pi / m)


def projection(v, v_star):
    """Pi = Id - w w^T / |w|^2 with w = v - v*: symmetric, idempotent, Pi w = 0."""
    w = np.asarray(v, dtype=float) - np.asarray(v_star, dtype=float)
    r2 = np.sum(w * w, axis=-1)
    scale = _norm(v) + _norm(v_star) + 1.0
    if np.any(np.sqrt(r2) <= DEGENERATE_TOL * scale):
        raise DegenerateFrameError("v = v*: projection undefined")
    d = w.shape[-1]
    eye = np.eye(d)
    outer = w[..., :, None] * w[..., None, :]
    return eye - outer / r2[..., None, None]


@dataclass
class CollisionFrame:
    """One collision sample (x, x*, v, v*, sigma) with derived quantities."""

    x: np.ndarray
    x_star: np.ndarray
    v: np.ndarray
    v_star: np.ndarray
    sigma: np.ndarray
    theta: float
    k: np.ndarray
    p: np.ndarray
    v_prime: np.ndarray
    v_star_prime: np.ndarray

    @classmethod
    def from_sigma(cls, x, x_star, v, v_star, sigma):
        k = relative_direction(v, v_star)
        theta = float(deviation_angle(v, v_star, sigma))
        # p is the normalised tangential part of sigma; at theta ~ 0 any
        # tangent direction works, pick a deterministic one.
        tang = np.asarray(sigma, dtype=float) - np.cos(theta) * k
        tn = _norm(tang)
        if tn > 1e-12:
            p = tang / tn
        else:
            p = tangent_frame(k, 1.0) if k.shape[-1] == 2 else tangent_frame(k, 0.0)
        vp, vsp = post_collision(v, v_star, sigma)
        return cls(np.asarray(x, float), np.asarray(x_star, float),
                   np.asarray(v, float), np.asarray(v_star, float),
                   np.asarray(sigma, float), theta, k, p, vp, vsp)

    @classmethod
    def from_angles(cls, x, x_star, v, v_star, theta, p):
        k = relative_direction(v, v_star)
        sigma = sigma_from_angles(k, theta, np.asarray(p, dtype=float))
        vp, vsp = post_collision(v, v_star, sigma)
        return cls(np.asarray(x, float), np.asarray(x_star, float),
                   np.asarray(v, float), np.asarray(v_star, float),
                   sigma, float(theta), k, np.asarray(p, float), vp, vsp)

    @property
    def relative_speed(self):
        return float(_norm(self.v - self.v_star))


def _phi_value(phi, x, v):
    return phi.value(x, v) if hasattr(phi, "value") else phi(x, v)


def _phi_grad_v(phi, x, v, step=1e-5):
    if hasattr(phi, "grad_v"):
        return np.asarray(phi.grad_v(x, v), dtype=float)
    return grad_v_fd(phi, x, v, step)


def grad_v_fd(phi, x, v, step=1e-5):
    """Central finite-difference velocity gradient (oracle cross-checks only)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    for i in range(v.shape[-1]):
        e = np.zeros_like(v)
        e[..., i] = step
        out[..., i] = (_phi_value(phi, x, v + e) - _phi_value(phi, x, v - e)) / (2 * step)
    return out


def boltzmann_gradient(phi, frame: CollisionFrame) -> float:
    """Four-point difference phi(x,v') + phi(x*,v*') - phi(x,v) - phi(x*,v*)."""
    return float(
        _phi_value(phi, frame.x, frame.v_prime)
        + _phi_value(phi, frame.x_star, frame.v_star_prime)
        - _phi_value(phi, frame.x, frame.v)
        - _phi_value(phi, frame.x_star, frame.v_star)
    )


def boltzmann_gradient_points(phi, x, x_star, v, v_star, v_prime, v_star_prime):
    """Batched four-point difference on precomputed collision points."""
    return (
        _phi_value(phi, x, v_prime)
        + _phi_value(phi, x_star, v_star_prime)
        - _phi_value(phi, x, v)
        - _phi_value(phi, x_star, v_star)
    )


def landau_gradient(phi, x, x_star, v, v_star, a0):
    """sqrt(A) Pi_{(v-v*)^perp} (grad_v phi(x,v) - grad_v phi(x*,v*)), A = A0 r^2."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    w = v - v_star
    r = _norm(w)
    scale = _norm(v) + _norm(v_star) + 1.0
    if np.any(r <= DEGENERATE_TOL * scale):
        raise DegenerateFrameError("v = v*: projected gradient undefined")
    diff = _phi_grad_v(phi, x, v) - _phi_grad_v(phi, x_star, v_star)
    proj = diff - (np.sum(diff * w, axis=-1) / (r * r))[..., None] * w
    amp = np.sqrt(np.asarray(a0(r), dtype=float) * r * r)
    return amp[..., None] * proj


def _pair_value(Phi, x, x_star, v, v_star):
    return Phi.value(x, x_star, v, v_star) if hasattr(Phi, "value") else Phi(x, x_star, v, v_star)


def pair_grad_fd(Phi, x, x_star, v, v_star, step=1e-5):
    """Central finite differences of Phi(x, x*, v, v*) in v and v*."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    gv = np.zeros_like(v)
    gvs = np.zeros_like(v_star)
    for i in range(v.shape[-1]):
        e = np.zeros_like(v)
        e[..., i] = step
        gv[..., i] = (_pair_value(Phi, x, x_star, v + e, v_star)
                      - _pair_value(Phi, x, x_star, v - e, v_star)) / (2 * step)
        gvs[..., i] = (_pair_value(Phi, x, x_star, v, v_star + e)
                       - _pair_value(Phi, x, x_star, v, v_star - e)) / (2 * step)
    return gv, gvs


def pair_nabla0(Phi, x, x_star, v, v_star, step=1e-5):
    """(grad_v - grad_{v*})(Phi + Phi_swap), Phi_swap(x,x*,v,v*) = Phi(x*,x,v*,v).

    Uses the function's own gradient callbacks when present, else central
    finite differences.
    """
    if hasattr(Phi, "grad_v") and hasattr(Phi, "grad_v_star"):
        gv = np.asarray(Phi.grad_v(x, x_star, v, v_star), dtype=float)
        gvs = np.asarray(Phi.grad_v_star(x, x_star, v, v_star), dtype=float)
        swap_gv = np.asarray(Phi.grad_v_star(x_star, x, v_star, v), dtype=float)
        swap_gvs = np.asarray(Phi.grad_v(x_star, x, v_star, v), dtype=float)
    else:
        gv, gvs = pair_grad_fd(Phi, x, x_star, v, v_star, step)
        sgvs, sgv = pair_grad_fd(Phi, x_star, x, v_star, v, step)
        # swap: d/dv of Phi(x*, x, v*, v) is the second-slot gradient there
        swap_gv, swap_gvs = sgv, sgvs
    return (gv + swap_gv) - (gvs + swap_gvs)


def landau_gradient_ext(Phi, x, x_star, v, v_star, a0, step=1e-5):
    """Projected gradient of a four-argument test function:

        (sqrt(A)/2) Pi_{(v-v*)^perp} (grad_v - grad_{v*}) (Phi + Phi_swap),

    where Phi_swap(x, x*, v, v*) = Phi(x*, x, v*, v).  For symmetric Phi this
    reduces to sqrt(A) Pi (grad_v - grad_{v*}) Phi.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    w = v - v_star
    r = _norm(w)
    scale = _norm(v) + _norm(v_star) + 1.0
    if np.any(r <= DEGENERATE_TOL * scale):
        raise DegenerateFrameError("v = v*: projected gradient undefined")
    nabla0 = pair_nabla0(Phi, x, x_star, v, v_star, step)
    proj = nabla0 - (np.sum(nabla0 * w, axis=-1) / (r * r))[..., None] * w
    amp = 0.5 * np.sqrt(np.asarray(a0(r), dtype=float) * r * r)
    return amp[..., None] * proj
