"""Stochastic first-order oracles and statistical assumption validators.

Randomness is addressed counter-style: every oracle is keyed by a 64-bit seed
and a replication stream id, and all draws for one run come from a Philox
generator keyed by (seed, stream).  Replications therefore need no shared
mutable state and are reproducible independently of scheduling order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSample",
    "SampleBuffer",
    "FiniteSumOracle",
    "AdditiveNoiseOracle",
    "validate_assumptions",
    "AssumptionReport",
]


@dataclass(frozen=True)
class NoiseSample:
    """Realized stochastic subgradient g and its deviation delta = g - exact."""

    g: np.ndarray
    delta: np.ndarray | None


@dataclass(frozen=True)
class SampleBuffer:
    """Pre-drawn randomness for one run: component indices and/or noise rows.

    Pre-drawing in one batch pins the exact generator consumption pattern, so
    the jitted kernel path and the step-by-step path see identical draws.
    """

    indices: np.ndarray | None
    noise: np.ndarray | None

    def __len__(self):
        if self.indices is not None:
            return len(self.indices)
        return 0 if self.noise is None else len(self.noise)


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


class FiniteSumOracle:
    """Uniform component sampling over a finite-sum objective.

    The wrapped function must expose n, component_grad and grad (the exact
    subgradient is the average of component subgradients, so delta is always
    available).
    """

    bounded = True  # finitely many components on a compact set

    def __init__(self, theta1, seed: int = 0, stream: int = 0):
        self.theta1 = theta1
        self.seed = int(seed)
        self.stream = int(stream)
        self._rng = _generator(self.seed, self.stream)

    def clone(self, stream: int) -> "FiniteSumOracle":
        return FiniteSumOracle(self.theta1, seed=self.seed, stream=stream)

    def presample(self, t: int) -> SampleBuffer:
        idx = self._rng.integers(0, self.theta1.n, size=t, dtype=np.int64)
        return SampleBuffer(indices=idx, noise=None)

    def sample_subgradient(self, x: np.ndarray, k: int | None = None,
                           buffer: SampleBuffer | None = None) -> NoiseSample:
        if buffer is not None:
            i = int(buffer.indices[k])
        else:
            i = int(self._rng.integers(0, self.theta1.n, dtype=np.int64))
        g = self.theta1.component_grad(x, i)
        return NoiseSample(g=g, delta=g - self.theta1.subgrad(x))

    def exact_subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.theta1.subgrad(x)


class AdditiveNoiseOracle:
    """Exact subgradient of a base convex function plus zero-mean noise.

    kind 'gaussian' draws N(0, sigma^2/d * I); 'uniform' draws componentwise
    uniform noise with total variance sigma^2 (bounded support, so the
    sub-Gaussian moment condition holds by construction); 'none' is the
    zero-noise degenerate oracle.
    """

    def __init__(self, theta1, sigma: float, kind: str = "gaussian",
                 seed: int = 0, stream: int = 0):
        if kind not in ("gaussian", "uniform", "none"):
            raise ValueError(f"unknown noise kind {kind!r}")
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.theta1 = theta1
        self.sigma = float(sigma)
        self.kind = "none" if sigma == 0 else kind
        self.seed = int(seed)
        self.stream = int(stream)
        self._rng = _generator(self.seed, self.stream)

    @property
    def bounded(self) -> bool:
        return self.kind in ("uniform", "none")

    def clone(self, stream: int) -> "AdditiveNoiseOracle":
        return AdditiveNoiseOracle(self.theta1, self.sigma, kind=self.kind,
                                   seed=self.seed, stream=stream)

    def _dim(self) -> int:
        return self.theta1.dim

    def _draw_noise(self, size: int) -> np.ndarray:
        d = self._dim()
        if self.kind == "none":
            return np.zeros((size, d))
        if self.kind == "gaussian":
            return self._rng.standard_normal((size, d)) * (self.sigma / math.sqrt(d))
        # uniform on [-a, a]^d with a chosen so the total variance is sigma^2
        a = self.sigma * math.sqrt(3.0 / d)
        return self._rng.uniform(-a, a, size=(size, d))

    def presample(self, t: int) -> SampleBuffer:
        return SampleBuffer(indices=None, noise=self._draw_noise(t))

    def sample_subgradient(self, x: np.ndarray, k: int | None = None,
                           buffer: SampleBuffer | None = None) -> NoiseSample:
        if buffer is not None:
            delta = buffer.noise[k]
        else:
            delta = self._draw_noise(1)[0]
        return NoiseSample(g=self.theta1.subgrad(x) + delta, delta=delta)

    def exact_subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.theta1.subgrad(x)


@dataclass(frozen=True)
class AssumptionReport:
    sup_second_moment: float
    second_moment_ci: float
    sup_variance: float
    variance_ci: float
    declared_M2: float | None
    declared_sigma2: float | None
    second_moment_ok: bool
    variance_ok: bool


def validate_assumptions(oracle, X, n_samples: int, n_points: int = 10,
                         declared_M: float | None = None,
                         declared_sigma: float | None = None,
                         seed: int = 1234) -> AssumptionReport:
    """Empirically probe the moment bounds the analysis relies on.

    At n_points random points of X, estimates E||g||^2 and E||delta||^2 over
    n_samples draws each and reports the sup over points together with a
    normal-approximation confidence radius (3 standard errors).  Report-only:
    a flagged violation never raises.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1e3 for a meaningful estimate")
    rng = np.random.default_rng(seed)
    probe = oracle.clone(stream=2**32 + 1)  # isolated stream for validation
    sup_m2 = sup_var = 0.0
    ci_m2 = ci_var = 0.0
    for _ in range(n_points):
        x = X.project(X.sample(rng))
        g2 = np.empty(n_samples)
        d2 = np.empty(n_samples)
        for j in range(n_samples):
            s = probe.sample_subgradient(x)
            g2[j] = s.g @ s.g
            d2[j] = 0.0 if s.delta is None else s.delta @ s.delta
        m2 = float(np.mean(g2))
        var = float(np.mean(d2))
        if m2 >= sup_m2:
            sup_m2 = m2
            ci_m2 = 3.0 * float(np.std(g2, ddof=1)) / math.sqrt(n_samples)
        if var >= sup_var:
            sup_var = var
            ci_var = 3.0 * float(np.std(d2, ddof=1)) / math.sqrt(n_samples)
    M2 = None if declared_M is None else declared_M**2
    s2 = None if declared_sigma is None else declared_sigma**2
    return AssumptionReport(
        sup_second_moment=sup_m2,
        second_moment_ci=ci_m2,
        sup_variance=sup_var,
        variance_ci=ci_var,
        declared_M2=M2,
        declared_sigma2=s2,
        second_moment_ok=(M2 is None or sup_m2 - ci_m2 <= M2),
        variance_ok=(s2 is None or sup_var - ci_var <= s2),
    )
