"""Self-contained verification reports for the geometry layer.

Used by the ``check-geometry`` CLI subcommand and the matching service
endpoint; the heavier functional checks live in the test suite.
"""

from __future__ import annotations

import numpy as np

from . import geometry as geo


def geometry_report(dim: int = 2, n_frames: int = 100_000, seed: int = 0) -> dict:
    """Random-frame verification of the collision map and the tangent sphere.

    Checks, with machine tolerances: momentum/energy conservation of the
    collision map, reconstruction of sigma from (theta, p), the size
    estimates |sigma - k| <= 2 theta and |sigma - k|^2 = 2(1 - cos theta)
    <= theta^2, idempotency of the projection, and the Monte Carlo
    second-moment identity int p (x) p dp = |S^{d-2}|/(d-1) Pi within three
    standard errors.
    """
    rng = np.random.default_rng(seed)
    d = dim
    v = rng.normal(size=(n_frames, d))
    vs = rng.normal(size=(n_frames, d))
    r = np.linalg.norm(v - vs, axis=1)
    keep = r > 1e-8
    v, vs = v[keep], vs[keep]
    k = (v - vs) / np.linalg.norm(v - vs, axis=1, keepdims=True)
    theta = rng.uniform(0.0, np.pi / 2, size=v.shape[0])
    p = geo.sample_p(k, rng)
    sigma = geo.sigma_from_angles(k, theta, p)
    vp, vsp = geo.post_collision(v, vs, sigma)

    checks = {}

    mom = np.linalg.norm((vp + vsp) - (v + vs), axis=1)
    mom_scale = np.linalg.norm(v + vs, axis=1) + 1.0
    checks["momentum_conservation"] = {
        "worst": float(np.max(mom / mom_scale)), "tol": 1e-12}

    en = np.abs(np.sum(vp * vp + vsp * vsp - v * v - vs * vs, axis=1))
    en_scale = np.sum(v * v + vs * vs, axis=1)
    checks["energy_conservation"] = {
        "worst": float(np.max(en / en_scale)), "tol": 1e-12}

    rec = np.linalg.norm(sigma - (np.cos(theta)[:, None] * k
                                  + np.sin(theta)[:, None] * p), axis=1)
    checks["sigma_reconstruction"] = {"worst": float(np.max(rec)), "tol": 1e-12}

    gap = np.linalg.norm(sigma - k, axis=1)
    checks["sigma_k_linear_bound"] = {
        "worst": float(np.max(gap - 2.0 * theta)), "tol": 1e-12}
    sq_identity = np.abs(gap ** 2 - 2.0 * (1.0 - np.cos(theta)))
    checks["sigma_k_square_identity"] = {
        "worst": float(np.max(sq_identity)), "tol": 1e-12}
    checks["sigma_k_square_bound"] = {
        "worst": float(np.max(gap ** 2 - theta ** 2)), "tol": 1e-12}

    pi = geo.projection(v[:1000], vs[:1000])
    idem = np.max(np.abs(np.einsum("nij,njk->nik", pi, pi) - pi))
    checks["projection_idempotent"] = {"worst": float(idem), "tol": 1e-12}

    # second moment of p over the tangent sphere against the projection
    k0 = k[0]
    m = 200_000
    p_mc = geo.sample_p(np.broadcast_to(k0, (m, d)).copy(), rng)
    outer = p_mc[:, :, None] * p_mc[:, None, :]
    mean = outer.mean(axis=0) * geo.perp_sphere_measure(d)
    se = outer.std(axis=0, ddof=1) / np.sqrt(m) * geo.perp_sphere_measure(d)
    target = geo.perp_sphere_measure(d) / (d - 1) * (np.eye(d) - np.outer(k0, k0))
    # d=2 has zero true variance (both tangent points share one outer
    # product); floor the error bar so the z-score degrades to an
    # exact-match test there instead of dividing round-off by round-off.
    floor = 1e-12 * (np.abs(target) + 1.0)
    z = np.abs(mean - target) / np.maximum(se, floor)
    checks["tangent_second_moment_3sigma"] = {
        "worst": float(np.max(z)), "tol": 3.0}

    passed = all(c["worst"] <= c["tol"] for c in checks.values())
    return {"dim": dim, "n_frames": int(v.shape[0]), "passed": bool(passed),
            "checks": {k_: {"worst": c["worst"], "tol": c["tol"],
                            "passed": bool(c["worst"] <= c["tol"])}
                       for k_, c in checks.items()}}
