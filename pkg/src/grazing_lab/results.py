"""Estimate containers shared by the Monte Carlo and grid integrators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Estimate:
    """A quadrature result with an error bar.

    ``std_error`` is zero only for deterministic (tensor-grid) results.  For
    Monte Carlo results it is the standard error of the weighted sample mean.
    """

    value: float
    std_error: float
    n_samples: int
    method: str = "monte_carlo"  # "monte_carlo" | "tensor_grid"
    n_rejected: int = 0
    unreliable: bool = False

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        if self.method == "tensor_grid" and self.std_error != 0.0:
            raise ValueError("tensor_grid estimates carry no std_error")

    def within(self, other, n_sigma: float = 3.0, extra: float = 0.0) -> bool:
        """True if this estimate and ``other`` agree within combined error bars.

        ``other`` may be a plain float (treated as exact) or an Estimate.
        ``extra`` widens the band by an absolute amount.
        """
        if isinstance(other, Estimate):
            gap = abs(self.value - other.value)
            band = n_sigma * (self.std_error + other.std_error) + extra
        else:
            gap = abs(self.value - float(other))
            band = n_sigma * self.std_error + extra
        return gap <= band

    def scaled(self, a: float) -> "Estimate":
        return replace(self, value=a * self.value, std_error=abs(a) * self.std_error)

    def __repr__(self):
        if self.method == "tensor_grid":
            return f"Estimate({self.value:.6g}, grid, n={self.n_samples})"
        return f"Estimate({self.value:.6g} ± {self.std_error:.2g}, n={self.n_samples})"


class RunningMoments:
    """Streaming weighted mean/variance accumulator (chunked Welford).

    Chunks are merged with the parallel-variance combine rule, so the result
    is deterministic for a fixed chunking layout.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.n_rejected = 0

    def push(self, values, n_rejected: int = 0):
        import numpy as np

        values = np.asarray(values, dtype=float)
        good = np.isfinite(values)
        n_bad = int(values.size - good.sum())
        if n_bad:
            values = values[good]
        self.n_rejected += n_rejected + n_bad
        k = values.size
        if k == 0:
            return
        m = float(values.mean())
        s = float(((values - m) ** 2).sum())
        if self.n == 0:
            self.n, self.mean, self.m2 = k, m, s
            return
        delta = m - self.mean
        tot = self.n + k
        self.mean += delta * k / tot
        self.m2 += s + delta * delta * self.n * k / tot
        self.n = tot

    def to_estimate(self, max_reject_frac: float = 1e-3) -> Estimate:
        if self.n == 0:
            raise ZeroDivisionError("all samples rejected")
        var = self.m2 / self.n if self.n > 1 else 0.0
        se = math.sqrt(max(var, 0.0) / self.n)
        frac = self.n_rejected / (self.n + self.n_rejected)
        return Estimate(
            value=self.mean,
            std_error=se,
            n_samples=self.n,
            method="monte_carlo",
            n_rejected=self.n_rejected,
            unreliable=frac > max_reject_frac,
        )


@dataclass
class FunctionalResult:
    """One evaluated functional together with the configuration snapshot."""

    kind: str
    estimate: Estimate
    epsilon: float
    pair: str = ""
    gamma: float = 0.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {
            "functional": self.kind,
            "pair": self.pair,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "seed": self.seed,
            "value": self.estimate.value,
            "value_stderr": self.estimate.std_error,
            "n_samples": self.estimate.n_samples,
            "method": self.estimate.method,
            "unreliable": int(self.estimate.unreliable),
        }
        row.update(self.extra)
        return row
