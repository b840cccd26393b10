"""Reproducible synthetic problem presets for the experiment harness.

Each preset generates data deterministically from its seed, wraps it in a
ProblemSpec with certified structural constants, and knows how to build
per-replication oracles.  Identity-split presets (A = I, B = -I, b = 0) also
carry the flat arrays the jitted kernel path consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .functions import (HingeLoss, L1Norm, LeastSquares, SquaredL2Penalty,
                        soft_threshold)
from .oracle import AdditiveNoiseOracle, FiniteSumOracle
from .problem import ProblemSpec, StructuralConstants
from .sets import Ball, WholeSpace

__all__ = ["Preset", "KernelInputs", "build_preset", "PRESET_NAMES"]

PRESET_NAMES = (
    "lasso-split",
    "strongly-convex-lasso",
    "fused-lasso-graph",
    "hinge-svm-split",
)

# oracle streams are offset from data-generation streams to keep them disjoint
_ORACLE_SEED_OFFSET = 0x9E3779B9


@dataclass(frozen=True)
class KernelInputs:
    data: np.ndarray
    targets: np.ndarray
    theta1_kind: int
    mu: float
    theta2_coef: float
    theta2_kind: int
    radius: float  # <= 0 means whole-space


@dataclass(frozen=True)
class Preset:
    name: str
    spec: ProblemSpec
    params: dict
    seed: int
    oracle_mode: str  # finite-sum | exact
    kernel: KernelInputs | None = None
    supports_reference: bool = True

    def make_oracle(self, stream: int = 0):
        oseed = (self.seed + _ORACLE_SEED_OFFSET) % 2**63
        if self.oracle_mode == "exact":
            return AdditiveNoiseOracle(self.spec.theta1, sigma=0.0, kind="none",
                                       seed=oseed, stream=stream)
        return FiniteSumOracle(self.spec.theta1, seed=oseed, stream=stream)


def _fista_reduced_lasso(design, targets, lam_reg, mu, iters=3000):
    """Unconstrained solve of the collapsed (x = y) lasso, used only to size
    the feasible ball around the solution."""
    n, d = design.shape
    H_lip = float(np.linalg.eigvalsh(design.T @ design / n)[-1]) + mu
    step = 1.0 / H_lip
    x = np.zeros(d)
    z = x.copy()
    s = 1.0
    for _ in range(iters):
        grad = design.T @ (design @ z - targets) / n + mu * z
        x_new = soft_threshold(z - step * grad, step * lam_reg)
        s_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * s * s))
        z = x_new + (s - 1.0) / s_new * (x_new - x)
        x, s = x_new, s_new
    return x


def _make_design(rng, n, d, cond):
    design = rng.standard_normal((n, d))
    if cond > 1:
        design *= np.geomspace(1.0, 1.0 / np.sqrt(cond), num=d)[None, :]
    return design


def _max_quadratic_over_ball(P, q, c, radius):
    """Exact sup of x'Px - 2 q'x + c over ||x|| <= radius (P symmetric psd).

    The maximum of a convex quadratic over a ball sits on the boundary; in
    the eigenbasis of P the stationarity system is separable and reduces to a
    monotone secular equation in the multiplier.
    """
    lam, V = np.linalg.eigh(P)
    qt = V.T @ q
    top = lam[-1]

    def z_norm2(nu):
        return float(np.sum((qt / (lam - nu)) ** 2))

    # multiplier nu > lambda_max: ||z(nu)|| decreases from +inf to 0
    lo = top + 1e-14 * max(top, 1.0)
    if z_norm2(lo) <= radius**2:
        # hard case: no component along the top eigenvector forces the
        # secular root; pad with mass on the top eigenspace
        mask = lam < top - 1e-10 * max(top, 1.0)
        z = np.zeros_like(qt)
        z[mask] = qt[mask] / (lam[mask] - top)
        pad = radius**2 - float(z @ z)
        z[-1] = np.sqrt(max(pad, 0.0))
        zv = z
    else:
        hi = lo + 1.0
        while z_norm2(hi) > radius**2:
            hi = top + 2.0 * (hi - top)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if z_norm2(mid) > radius**2:
                lo = mid
            else:
                hi = mid
        zv = qt / (lam - 0.5 * (lo + hi))
    val = float(zv @ (lam * zv) - 2.0 * qt @ zv + c)
    # interior is dominated by the boundary, but guard the degenerate q = 0 case
    return max(val, c)


def _lsq_constants(design, targets, radius, mu):
    """Certified moment bound for uniform component sampling of a
    least-squares finite sum over an origin-centered ball.

    E||g||^2 at x is itself a quadratic in x, so its sup over the ball is
    computed exactly instead of via the loose per-row worst case.
    """
    n = design.shape[0]
    row2 = np.einsum("ij,ij->i", design, design)
    weights = row2 + 2.0 * mu
    P = design.T @ (design * weights[:, None]) / n + mu**2 * np.eye(design.shape[1])
    q = design.T @ ((row2 + mu) * targets) / n
    c = float(np.sum(row2 * targets**2)) / n
    M2 = _max_quadratic_over_ball(P, q, c, radius)
    M = float(np.sqrt(M2))
    L = float(np.linalg.eigvalsh(design.T @ design / n)[-1]) + mu
    # ||delta|| <= ||g_i|| + ||E g|| <= 2M pointwise
    sigma = 2.0 * M
    return M, sigma, L


def _lasso_like(name, seed, mu, params):
    p = dict(n=200, d=20, cond=10.0, noise=1.0, lam_reg=0.1, sparsity=0.25,
             oracle="finite-sum")
    p.update(params)
    rng = np.random.default_rng(seed)
    n, d = int(p["n"]), int(p["d"])
    design = _make_design(rng, n, d, float(p["cond"]))
    x_true = np.zeros(d)
    k = max(1, int(round(p["sparsity"] * d)))
    idx = rng.choice(d, size=k, replace=False)
    x_true[idx] = rng.choice([-1.0, 1.0], size=k)
    targets = design @ x_true + float(p["noise"]) * rng.standard_normal(n)

    lam_reg = float(p["lam_reg"])
    x_hat = _fista_reduced_lasso(design, targets, lam_reg, mu)
    radius = max(1.0, 2.0 * float(np.linalg.norm(x_hat)))

    theta1 = LeastSquares(design, targets, mu=mu)
    theta2 = L1Norm(lam_reg)
    M, sigma, L = _lsq_constants(design, targets, radius, mu)
    if p["oracle"] == "exact":
        sigma = 0.0
    spec = ProblemSpec(
        theta1=theta1, theta2=theta2,
        A=np.eye(d), B=-np.eye(d), b=np.zeros(d),
        X=Ball(d, radius), Y=WholeSpace(d),
        constants=StructuralConstants(M=M, sigma=sigma, mu=mu, L=L),
    )
    kern = KernelInputs(design, targets, kernels.THETA1_LSQ, mu, lam_reg,
                        kernels.THETA2_L1, radius)
    return Preset(name, spec, p, seed, p["oracle"], kernel=kern)


def _fused_lasso_graph(seed, params):
    p = dict(n=200, d=20, cond=10.0, noise=0.1, lam_reg=0.1, sparsity=0.25,
             oracle="finite-sum", edges=None)
    p.update(params)
    rng = np.random.default_rng(seed)
    n, d = int(p["n"]), int(p["d"])
    design = _make_design(rng, n, d, float(p["cond"]))
    x_true = np.zeros(d)
    k = max(1, int(round(p["sparsity"] * d)))
    x_true[rng.choice(d, size=k, replace=False)] = rng.choice([-1.0, 1.0], size=k)
    targets = design @ x_true + float(p["noise"]) * rng.standard_normal(n)

    edges = p["edges"] or [(i, i + 1) for i in range(d - 1)]  # chain graph default
    m = len(edges)
    A = np.zeros((m, d))
    for r, (i, j) in enumerate(edges):
        A[r, i] = 1.0
        A[r, j] = -1.0

    lam_reg = float(p["lam_reg"])
    radius = max(1.0, 2.0 * float(np.linalg.norm(x_true)) + 1.0)
    theta1 = LeastSquares(design, targets)
    M, sigma, L = _lsq_constants(design, targets, radius, 0.0)
    if p["oracle"] == "exact":
        sigma = 0.0
    spec = ProblemSpec(
        theta1=theta1, theta2=L1Norm(lam_reg),
        A=A, B=-np.eye(m), b=np.zeros(m),
        X=Ball(d, radius), Y=WholeSpace(m),
        constants=StructuralConstants(M=M, sigma=sigma, mu=0.0, L=L),
    )
    return Preset("fused-lasso-graph", spec, p, seed, p["oracle"], kernel=None)


def _hinge_svm_split(seed, params):
    p = dict(n=200, d=20, noise=0.1, lam_reg=0.1, radius=5.0, oracle="finite-sum")
    p.update(params)
    rng = np.random.default_rng(seed)
    n, d = int(p["n"]), int(p["d"])
    design = rng.standard_normal((n, d)) / np.sqrt(d)
    w_true = rng.standard_normal(d)
    w_true /= np.linalg.norm(w_true)
    labels = np.sign(design @ w_true + float(p["noise"]) * rng.standard_normal(n))
    labels[labels == 0] = 1.0

    radius = float(p["radius"])
    lam_reg = float(p["lam_reg"])
    theta1 = HingeLoss(design, labels)
    M = float(np.max(np.linalg.norm(design, axis=1)))
    spec = ProblemSpec(
        theta1=theta1, theta2=SquaredL2Penalty(lam_reg),
        A=np.eye(d), B=-np.eye(d), b=np.zeros(d),
        X=Ball(d, radius), Y=WholeSpace(d),
        constants=StructuralConstants(M=M, sigma=2.0 * M, mu=0.0, L=None),
    )
    kern = KernelInputs(design, labels, kernels.THETA1_HINGE, 0.0, lam_reg,
                        kernels.THETA2_SQL2, radius)
    # exact Line-1 minimization of the hinge sum has no closed form, so the
    # deterministic reference path is unavailable for this preset
    return Preset("hinge-svm-split", spec, p, seed, p["oracle"], kernel=kern,
                  supports_reference=False)


def build_preset(name: str, seed: int = 0, **params) -> Preset:
    if name == "lasso-split":
        return _lasso_like(name, seed, 0.0, params)
    if name == "strongly-convex-lasso":
        mu = float(params.pop("mu", 0.1))
        if mu <= 0:
            raise ValueError("strongly-convex-lasso needs mu > 0")
        return _lasso_like(name, seed, mu, params)
    if name == "fused-lasso-graph":
        return _fused_lasso_graph(seed, params)
    if name == "hinge-svm-split":
        return _hinge_svm_split(seed, params)
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
