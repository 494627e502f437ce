"""Analytic phase-space densities and particle-ensemble entropy estimation.

Densities are Gaussian mixtures on R^{2d} whose components factorise into an
x-block and a v-block (means may differ per component, so mixtures can still
correlate position and velocity).  Single components have closed forms for
value, log-density, velocity score, entropy and low-order bracket moments;
mixtures fall back to Monte Carlo with error bars.

Ensemble entropy uses the Kozachenko-Leonenko k-nearest-neighbour estimator
of int f log f with a grouped-jackknife error bar.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln

from .results import Estimate

LOG_ZERO = -np.inf  # sentinel for log of a vanishing density


def _as_cov(c, d):
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        c = np.full(d, float(c))
    if c.ndim == 1:
        if c.shape != (d,):
            raise ValueError("diagonal covariance has wrong length")
        return np.diag(c)
    if c.shape != (d, d):
        raise ValueError("covariance has wrong shape")
    return 0.5 * (c + c.T)


class GaussianMixture:
    """Weighted Gaussian mixture on R^m with exact score and sampling."""

    def __init__(self, means, covs, weights):
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.k, self.m = self.means.shape
        self.covs = np.asarray(covs, dtype=float).reshape(self.k, self.m, self.m)
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (self.k,):
            raise ValueError("one weight per component required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        self._chol = np.linalg.cholesky(self.covs)
        self._inv = np.stack([np.linalg.inv(c) for c in self.covs])
        # inverse Cholesky factors: quad form via one BLAS matmul per component
        self._inv_chol = np.stack([np.linalg.inv(c) for c in self._chol])
        self._logdet = np.array([2.0 * np.log(np.diag(c)).sum() for c in self._chol])
        self._lognorm = -0.5 * (self.m * math.log(2 * math.pi) + self._logdet)

    def _comp_logpdf(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.empty((z.shape[0], self.k))
        for j in range(self.k):
            y = (z - self.means[j]) @ self._inv_chol[j].T
            out[:, j] = self._lognorm[j] - 0.5 * np.einsum("ni,ni->n", y, y)
        return out

    def logpdf(self, z):
        comp = self._comp_logpdf(z) + np.log(self.weights)[None, :]
        mx = comp.max(axis=1)
        out = mx + np.log(np.exp(comp - mx[:, None]).sum(axis=1))
        out = np.where(np.isfinite(mx), out, LOG_ZERO)
        return out

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def grad_log(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        comp = self._comp_logpdf(z) + np.log(self.weights)[None, :]
        mx = comp.max(axis=1, keepdims=True)
        resp = np.exp(comp - mx)
        resp /= resp.sum(axis=1, keepdims=True)
        diff = z[:, None, :] - self.means[None, :, :]
        scores = -np.einsum("kij,nkj->nki", self._inv, diff)
        return np.einsum("nk,nki->ni", resp, scores)

    def sample(self, n, rng):
        idx = rng.choice(self.k, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.m))
        return self.means[idx] + np.einsum("nij,nj->ni", self._chol[idx], eps)

    def entropy_closed(self):
        """int f log f for a single component; None for true mixtures."""
        if self.k != 1:
            return None
        return -0.5 * self.m * (1.0 + math.log(2 * math.pi)) - 0.5 * self._logdet[0]

    def mean_square_norm(self):
        """E |z|^2 = sum_k w_k (tr cov_k + |mu_k|^2)."""
        return float(np.sum(self.weights * (
            np.trace(self.covs, axis1=1, axis2=2) + np.sum(self.means ** 2, axis=1))))

    def widened(self, factor):
        return GaussianMixture(self.means, self.covs * factor ** 2, self.weights)


@dataclass(frozen=True)
class GaussianComponent:
    """One mixture component: independent Gaussian blocks in x and in v."""

    mean_x: np.ndarray
    mean_v: np.ndarray
    cov_x: np.ndarray
    cov_v: np.ndarray
    weight: float = 1.0

    @classmethod
    def make(cls, mean_x, mean_v, cov_x, cov_v, weight=1.0):
        mean_x = np.asarray(mean_x, dtype=float)
        mean_v = np.asarray(mean_v, dtype=float)
        d = mean_x.shape[0]
        if mean_v.shape != (d,):
            raise ValueError("x and v blocks must share the dimension")
        return cls(mean_x, mean_v, _as_cov(cov_x, d), _as_cov(cov_v, d), float(weight))


class DensityModel:
    """Gaussian-mixture phase-space density f(x, v) on R^{2d}."""

    def __init__(self, components):
        if not components:
            raise ValueError("at least one component required")
        self.components = list(components)
        self.d = self.components[0].mean_x.shape[0]
        w = np.array([c.weight for c in self.components], dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        w = w / w.sum()
        d = self.d
        means = np.stack([np.concatenate([c.mean_x, c.mean_v]) for c in self.components])
        covs = np.zeros((len(self.components), 2 * d, 2 * d))
        for i, c in enumerate(self.components):
            covs[i, :d, :d] = c.cov_x
            covs[i, d:, d:] = c.cov_v
        self.joint = GaussianMixture(means, covs, w)
        self.weights = w

    # -- evaluation ---------------------------------------------------------
    def _join(self, x, v):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return np.concatenate([x, v], axis=-1)

    def eval(self, x, v):
        out = self.joint.pdf(self._join(x, v))
        return out if np.ndim(x) > 1 else float(out[0])

    def log_eval(self, x, v):
        out = self.joint.logpdf(self._join(x, v))
        return out if np.ndim(x) > 1 else float(out[0])

    def grad_v_log(self, x, v):
        out = self.joint.grad_log(self._join(x, v))[:, self.d:]
        return out if np.ndim(x) > 1 else out[0]

    def sample(self, n, rng):
        z = self.joint.sample(n, rng)
        return z[:, :self.d], z[:, self.d:]

    # -- marginals and structure --------------------------------------------
    def v_marginal(self) -> GaussianMixture:
        return GaussianMixture(
            np.stack([c.mean_v for c in self.components]),
            np.stack([c.cov_v for c in self.components]),
            self.weights,
        )

    def x_marginal(self) -> GaussianMixture:
        return GaussianMixture(
            np.stack([c.mean_x for c in self.components]),
            np.stack([c.cov_x for c in self.components]),
            self.weights,
        )

    @property
    def factorized_in_x(self) -> bool:
        """True when every component shares one x-block: f = rho(x) g(v)."""
        c0 = self.components[0]
        return all(
            np.array_equal(c.mean_x, c0.mean_x) and np.array_equal(c.cov_x, c0.cov_x)
            for c in self.components[1:]
        )

    # -- closed-form and MC functionals --------------------------------------
    def entropy(self, n_mc: int = 200_000, seed: int = 0) -> Estimate:
        """H(f) = int f log f; exact for single Gaussians, MC for mixtures."""
        closed = self.joint.entropy_closed()
        if closed is not None:
            return Estimate(closed, 0.0, 1, method="tensor_grid")
        rng = np.random.default_rng(seed)
        x, v = self.sample(n_mc, rng)
        vals = self.log_eval(x, v)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc)),
                        n_mc, method="monte_carlo")

    def moment_l1(self, a: float, b: float, n_mc: int = 200_000, seed: int = 0) -> Estimate:
        """int (<x>^a + <v>^b) f; closed form for a, b in {0, 2}, else MC."""
        if a in (0.0, 2.0) and b in (0.0, 2.0):
            def bracket_moment(marg, power):
                return 1.0 if power == 0.0 else 1.0 + marg.mean_square_norm()
            val = bracket_moment(self.x_marginal(), a) + bracket_moment(self.v_marginal(), b)
            return Estimate(val, 0.0, 1, method="tensor_grid")
        rng = np.random.default_rng(seed)
        x, v = self.sample(n_mc, rng)
        vals = (1.0 + np.sum(x * x, axis=1)) ** (a / 2) + (1.0 + np.sum(v * v, axis=1)) ** (b / 2)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc)),
                        n_mc, method="monte_carlo")

    def energy(self) -> float:
        """E(f) = (1/2) int |v|^2 f, closed form."""
        return 0.5 * self.v_marginal().mean_square_norm()


# -- canonical test densities -------------------------------------------------

def standard_gaussian(d: int = 2) -> DensityModel:
    return DensityModel([GaussianComponent.make(np.zeros(d), np.zeros(d), 1.0, 1.0)])


def maxwellian_factorized(d: int = 2, x_cov=1.0, v_cov=1.0) -> DensityModel:
    """rho(x) M(v) with isotropic Maxwellian M; equilibrium for the collision step."""
    return DensityModel([GaussianComponent.make(np.zeros(d), np.zeros(d), x_cov, float(v_cov))])


def anisotropic_gaussian(d: int = 2, v_diag=(1.0, 4.0)) -> DensityModel:
    """Standard x-block, anisotropic velocity block diag(v_diag)."""
    v_diag = np.asarray(v_diag, dtype=float)
    if v_diag.shape != (d,):
        raise ValueError("need one velocity variance per dimension")
    return DensityModel([GaussianComponent.make(np.zeros(d), np.zeros(d), 1.0, v_diag)])


def correlated_mixture(d: int = 2, offset: float = 1.0) -> DensityModel:
    """Two equal components at +-(offset, ..., offset) in both x and v.

    Positions and velocities are correlated (Cov(x_i, v_j) = offset^2), which
    makes first-moment weak-operator pairings such as <Q f, x1 v1> nonzero.
    """
    mx = np.full(d, offset)
    return DensityModel([
        GaussianComponent.make(mx, mx, 1.0, 1.0, 0.5),
        GaussianComponent.make(-mx, -mx, 1.0, 1.0, 0.5),
    ])


# -- particle ensembles -------------------------------------------------------

@dataclass
class ParticleEnsemble:
    """N uniformly weighted particles (x_i, v_i) at a common time stamp."""

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.x.shape != self.v.shape or self.x.ndim != 2:
            raise ValueError("x and v must both have shape (N, d)")
        if self.x.shape[0] < 2:
            raise ValueError("an ensemble needs at least two particles")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("non-finite particle coordinates")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def phase_points(self):
        return np.concatenate([self.x, self.v], axis=1)

    @classmethod
    def from_model(cls, model: DensityModel, n: int, rng) -> "ParticleEnsemble":
        x, v = model.sample(n, rng)
        return cls(x, v, 0.0)


def ensemble_moments(ens: ParticleEnsemble):
    """(mass, momentum, kinetic energy) per unit mass of the ensemble."""
    momentum = ens.v.mean(axis=0)
    energy = 0.5 * float(np.mean(np.sum(ens.v * ens.v, axis=1)))
    return 1.0, momentum, energy


def gaussian_refit(ens: ParticleEnsemble) -> DensityModel:
    """Moment-matched single Gaussian with independent x and v blocks."""
    cov_x = np.cov(ens.x, rowvar=False)
    cov_v = np.cov(ens.v, rowvar=False)
    return DensityModel([GaussianComponent.make(
        ens.x.mean(axis=0), ens.v.mean(axis=0), cov_x, cov_v)])


def entropy_knn(points, k: int = 4, n_jackknife: int = 10) -> Estimate:
    """Kozachenko-Leonenko estimate of H = int f log f (note the sign: the
    differential entropy enters with a minus).

    Zero nearest-neighbour distances (duplicate points) are replaced by the
    smallest positive distance, with a warning.  The error bar comes from a
    grouped jackknife over ``n_jackknife`` blocks.
    """
    if isinstance(points, ParticleEnsemble):
        pts = points.phase_points()
    else:
        pts = np.asarray(points, dtype=float)
    n, dim = pts.shape
    if not (1 <= k < n):
        raise ValueError("need N > k >= 1")

    def kl_estimate(sample):
        nn, ndim = sample.shape
        tree = cKDTree(sample)
        dist, _ = tree.query(sample, k=k + 1, workers=-1)
        radii = dist[:, k]
        if np.any(radii == 0.0):
            pos = radii[radii > 0.0]
            if pos.size == 0:
                raise ValueError("all points coincide")
            warnings.warn("duplicate points in entropy_knn; ties broken by the "
                          "minimum positive distance")
            radii = np.where(radii == 0.0, pos.min(), radii)
        log_ball = 0.5 * ndim * math.log(math.pi) - gammaln(0.5 * ndim + 1.0)
        h_diff = (digamma(nn) - digamma(k) + log_ball
                  + ndim * float(np.mean(np.log(radii))))
        return -h_diff

    full = kl_estimate(pts)
    blocks = np.array_split(np.arange(n), n_jackknife)
    loo = []
    for b in blocks:
        mask = np.ones(n, dtype=bool)
        mask[b] = False
        loo.append(kl_estimate(pts[mask]))
    loo = np.asarray(loo)
    m = len(loo)
    se = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    return Estimate(full, se, n, method="monte_carlo")
