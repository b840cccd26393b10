"""Projections, proximal operators and the constrained quadratic x-update.

The x-update of every solver variant is the minimizer over X of

    <g, x> + (beta/2) ||A x + B y_k - b - lam_k/beta||^2 + ||x - x_k||^2 / (2 eta),

a strongly convex quadratic.  Over the whole space this is one linear solve;
over a ball it is solved exactly in the cached eigenbasis of beta*A'A (a
trust-region style scalar root-find on the boundary multiplier); over a box a
projected-gradient inner loop runs to a declared tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import ZeroFunction
from .problem import IterateState, ProblemSpec
from .sets import Ball, Box, SetDescriptor, WholeSpace

__all__ = [
    "project",
    "prox_theta2",
    "solve_x_subproblem",
    "solve_y_update",
    "three_points_check",
    "QuadCache",
    "min_quadratic_over_set",
    "SubproblemError",
]

INNER_TOL = 1e-10
INNER_MAX_ITERS = 10_000


class SubproblemError(RuntimeError):
    """Inner solve failed to reach tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def project(z: np.ndarray, set_desc: SetDescriptor) -> np.ndarray:
    """Euclidean projection onto a supported feasible set."""
    return set_desc.project(z)


def prox_theta2(z: np.ndarray, c: float, theta2, Y: SetDescriptor) -> np.ndarray:
    """argmin_{y in Y} theta2(y) + (c/2)||y - z||^2 for catalog entries.

    Separable entries restricted to a box clamp componentwise; a ball Y is
    only exact for the indicator-only entry (projection).
    """
    if c <= 0:
        raise ValueError("prox scaling c must be positive")
    y = theta2.prox(z, c)
    if isinstance(Y, WholeSpace):
        return y
    if isinstance(Y, Box):
        return Y.project(y)
    if isinstance(Y, Ball):
        if isinstance(theta2, ZeroFunction):
            return Y.project(z)
        raise ValueError(
            "ball-constrained y-update is only exact for the indicator-only "
            "entry; use the inner-solver mode"
        )
    raise TypeError(f"unsupported set descriptor {type(Y).__name__}")


class QuadCache:
    """Per-run factorization cache for x-updates.

    Caches A'A, and per distinct Hessian Q = H0 + (1/eta) I the Cholesky
    factor / eigendecomposition needed by the whole-space and ball solvers.
    H0 (= beta A'A, plus the theta1 Hessian in the deterministic variant) is
    fixed within a run, so only the isotropic shift varies with eta.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.AtA = spec.A.T @ spec.A
        self.Atb_like = None
        self._h0_key = None
        self._eigvals = None
        self._eigvecs = None
        self._chol = None
        self._chol_shift = None

    def _prepare(self, H0: np.ndarray, key):
        if key != self._h0_key:
            self._h0_key = key
            self._H0 = H0
            self._eigvals = None
            self._eigvecs = None
            self._chol = None
            self._chol_shift = None

    def solve_dense(self, H0: np.ndarray, key, shift: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (H0 + shift I) x = rhs, re-factorizing only when shift moves."""
        self._prepare(H0, key)
        redo = (
            self._chol is None
            or abs(shift - self._chol_shift) > 1e-12 * max(abs(shift), 1.0)
        )
        if redo:
            Q = self._H0 + shift * np.eye(self._H0.shape[0])
            self._chol = np.linalg.cholesky(Q)
            self._chol_shift = shift
        w = np.linalg.solve(self._chol, rhs)
        return np.linalg.solve(self._chol.T, w)

    def eigen(self, H0: np.ndarray, key):
        self._prepare(H0, key)
        if self._eigvals is None:
            self._eigvals, self._eigvecs = np.linalg.eigh(self._H0)
        return self._eigvals, self._eigvecs


def _ball_constrained_solve(eigvals, eigvecs, shift, rhs, radius):
    """Exact argmin of x'(Q)x/2 - rhs'x over ||x|| <= radius, Q = V diag(w+shift) V'."""
    q = eigvecs.T @ rhs
    w = eigvals + shift
    x_free = q / w
    if np.sqrt(float(x_free @ x_free)) <= radius:
        return eigvecs @ x_free
    # boundary case: find nu > 0 with ||q / (w + nu)|| = radius; the secular
    # function 1/||x(nu)|| - 1/radius is concave increasing, Newton converges
    nu = 0.0
    for _ in range(200):
        d = w + nu
        x2 = float(np.sum((q / d) ** 2))
        nx = np.sqrt(x2)
        phi = 1.0 / nx - 1.0 / radius
        if abs(phi) < 1e-15 / radius:
            break
        dphi = float(np.sum(q**2 / d**3)) / (nx * x2)
        step = phi / dphi
        nu = max(nu - step, 0.0)
        if step == 0.0:
            break
    return eigvecs @ (q / (w + nu))


def _box_projected_gradient(matvec, lip, rhs, box: Box, x_init: np.ndarray,
                            tol: float = INNER_TOL, max_iters: int = INNER_MAX_ITERS):
    """Projected gradient on x'Qx/2 - rhs'x over a box, monitored by the
    projected-gradient residual."""
    x = box.project(x_init)
    step = 1.0 / lip
    resid = np.inf
    for _ in range(max_iters):
        grad = matvec(x) - rhs
        x_new = box.project(x - step * grad)
        resid = float(np.linalg.norm((x - x_new) / step))
        x = x_new
        if resid <= tol:
            return x
    raise SubproblemError("projected-gradient inner loop did not converge", resid)


def min_quadratic_over_set(H0: np.ndarray, key, shift: float, rhs: np.ndarray,
                           X: SetDescriptor, cache: QuadCache,
                           x_init: np.ndarray | None = None) -> np.ndarray:
    """Minimize x'(H0 + shift I)x/2 - rhs'x over X exactly where possible."""
    if isinstance(X, WholeSpace):
        return cache.solve_dense(H0, key, shift, rhs)
    if isinstance(X, Ball):
        eigvals, eigvecs = cache.eigen(H0, key)
        return _ball_constrained_solve(eigvals, eigvecs, shift, rhs, X.radius)
    if isinstance(X, Box):
        eigvals, _ = cache.eigen(H0, key)
        lip = float(eigvals[-1] + shift)
        matvec = lambda v: H0 @ v + shift * v
        init = rhs / lip if x_init is None else x_init
        return _box_projected_gradient(matvec, lip, rhs, X, init)
    raise TypeError(f"unsupported set descriptor {type(X).__name__}")


def solve_x_subproblem(g: np.ndarray, state: IterateState, spec: ProblemSpec,
                       beta: float, eta: float, cache: QuadCache | None = None) -> np.ndarray:
    """The stochastic/linearized x-update around the current iterate.

    beta = 0 drops the penalty term entirely (plain proximal step on the
    linear model), which over the whole space reduces to x_k - eta * g.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if cache is None:
        cache = QuadCache(spec)
    shift = 1.0 / eta
    rhs = state.x / eta - g
    if beta > 0:
        v = spec.b + state.lam / beta - spec.B @ state.y
        rhs = rhs + beta * (spec.A.T @ v)
        H0 = beta * cache.AtA
    else:
        H0 = np.zeros((spec.d1, spec.d1))
    return min_quadratic_over_set(H0, ("x-sub", beta), shift, rhs, spec.X, cache,
                                  x_init=state.x)


def solve_y_update(x_next: np.ndarray, lam: np.ndarray, spec: ProblemSpec,
                   beta: float) -> np.ndarray:
    """argmin_{y in Y} theta2(y) + (beta/2)||A x_{k+1} + B y - b - lam/beta||^2.

    Requires B to be a (possibly scaled) signed identity so the update is an
    exact prox of theta2; otherwise the catalog has no closed form.
    """
    B = spec.B
    d2 = spec.d2
    diag = np.diag(B)
    s = diag[0] if d2 > 0 else 1.0
    if B.shape[0] != d2 or not np.allclose(B, s * np.eye(d2)) or s == 0:
        raise ValueError(
            "y-update reduces to a prox only for B = s*I; use an inner solver "
            "for general B"
        )
    v = spec.A @ x_next - spec.b - lam / beta
    # beta/2 ||s y + v||^2 = (beta s^2/2) ||y + v/s||^2
    return prox_theta2(-v / s, beta * s * s, spec.theta2, spec.Y)


def three_points_check(x_star: np.ndarray, u: np.ndarray, probe_x: np.ndarray,
                       g_at_xstar: np.ndarray, s: float, tol: float = 1e-9):
    """Bregman 3-points inequality for the Euclidean prox-regularized minimizer.

    Checks  <g(x*), x* - x>  <=  s [ D(x,u) - D(x,x*) - D(x*,u) ] + tol
    with D(a, b) = ||a - b||^2 / 2.  Returns (holds, signed residual).
    """

    def D(a, b):
        d = a - b
        return 0.5 * float(d @ d)

    lhs = float(g_at_xstar @ (x_star - probe_x))
    rhs = s * (D(probe_x, u) - D(probe_x, x_star) - D(x_star, u))
    return lhs <= rhs + tol, lhs - rhs
