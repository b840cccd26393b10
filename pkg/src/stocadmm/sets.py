"""Feasible-set descriptors with exact projections and exact diameters.

Three set families are supported: the whole space (with an optional
user-declared diameter, needed by the convex stepsize schedule), an
origin-centered Euclidean ball, and an axis-aligned box.  All of them admit
closed-form Euclidean projections, which keeps every subproblem solve exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["WholeSpace", "Ball", "Box", "SetDescriptor"]


@dataclass(frozen=True)
class WholeSpace:
    dim: int
    declared_diameter: float | None = None

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float)

    def contains(self, z: np.ndarray, tol: float = 0.0) -> bool:
        return len(z) == self.dim

    @property
    def diameter(self) -> float:
        if self.declared_diameter is None:
            raise ValueError(
                "whole-space set has no declared diameter; pass declared_diameter "
                "if a stepsize schedule needs one"
            )
        if not (self.declared_diameter > 0 and np.isfinite(self.declared_diameter)):
            raise ValueError("declared diameter must be positive and finite")
        return self.declared_diameter

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(self.dim)


@dataclass(frozen=True)
class Ball:
    """Origin-centered Euclidean ball of the given radius."""

    dim: int
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError("ball radius must be positive and finite")

    def project(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        nz = np.linalg.norm(z)
        if nz <= self.radius:
            return z
        return z * (self.radius / nz)

    def contains(self, z: np.ndarray, tol: float = 1e-12) -> bool:
        return np.linalg.norm(z) <= self.radius * (1 + tol)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        # uniform on the ball: gaussian direction, radius ~ U^{1/d}
        v = rng.standard_normal(self.dim)
        v /= max(np.linalg.norm(v), 1e-300)
        r = self.radius * rng.uniform() ** (1.0 / self.dim)
        return r * v


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {z : lo <= z <= hi} (componentwise)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(z, dtype=float), self.lo, self.hi)

    def contains(self, z: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(z >= self.lo - tol) and np.all(z <= self.hi + tol))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)


SetDescriptor = WholeSpace | Ball | Box
