"""The three solver loops and their per-iteration invariant checkers.

Variants:

* deterministic: exact alternating minimization of the augmented Lagrangian
  (needs a quadratic-form first-block objective so Line 1 is a linear solve);
* linearized: the quadratic penalty in the x-update is replaced by its
  linearization at x_k plus a G-norm prox term;
* stochastic: the first-block objective is replaced by a first-order model
  built from one sampled subgradient, with an l2 prox term scaled by a
  time-varying stepsize.

All variants share the y-update (an exact prox for B = s*I) and the dual
ascent step lam <- lam - beta*(A x + B y - b), which holds exactly by
construction and is still asserted when checks are enabled.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .oracle import SampleBuffer
from .problem import (IterateState, ProblemSpec, StackedW, eval_F, err_rho,
                      stack)
from .prox import (QuadCache, min_quadratic_over_set, solve_x_subproblem,
                   solve_y_update, three_points_check)
from .sets import Ball, Box, WholeSpace

__all__ = [
    "SolverConfig",
    "Trajectory",
    "step_deterministic",
    "step_linearized",
    "step_stochastic",
    "run",
    "step_inequality_check",
    "check_y_optimality",
    "SolverError",
]


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    variant: str = "stochastic"          # deterministic | linearized | stochastic
    beta: float = 1.0
    schedule: str = "convex"             # convex | strongly-convex | smooth | constant
    eta0: float | None = None            # constant schedule only
    t_max: int = 100
    rho: float = 1.0
    averaging: str | None = None         # eq2-shifted | eq10-aligned
    check_invariants: bool = False
    probe_count: int = 5
    check_tol: float = 1e-9
    G: float | np.ndarray | None = None  # scalar r means G = r*I - beta*A'A
    probe_seed: int = 2024

    def validate(self, spec: ProblemSpec):
        if self.variant not in ("deterministic", "linearized", "stochastic"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        c = spec.constants
        if self.variant == "stochastic":
            if self.schedule == "strongly-convex" and not c.mu > 0:
                raise ValueError(
                    "strongly-convex schedule needs mu > 0 (the 1/(k*mu) "
                    "stepsize is undefined otherwise)"
                )
            if self.schedule == "smooth" and c.L is None:
                raise ValueError("smooth schedule needs a declared L")
            if self.schedule == "constant" and not (self.eta0 and self.eta0 > 0):
                raise ValueError("constant schedule needs a positive eta0")
            if self.schedule in ("convex", "smooth"):
                spec.diameter_x  # raises if whole-space X lacks a declared diameter
        if self.variant == "linearized" and isinstance(self.G, np.ndarray):
            w = np.linalg.eigvalsh((self.G + self.G.T) / 2)
            if w[0] < -1e-10:
                raise ValueError("G must be positive semidefinite")

    def eta(self, k: int, spec: ProblemSpec) -> float:
        """Stepsize used by the step from x_{k-1} to x_k (k >= 1)."""
        c = spec.constants
        if self.schedule == "convex":
            return spec.diameter_x / (c.M * math.sqrt(2.0 * k))
        if self.schedule == "strongly-convex":
            return 1.0 / (k * c.mu)
        if self.schedule == "smooth":
            return 1.0 / (c.L + c.sigma * math.sqrt(2.0 * k) / spec.diameter_x)
        if self.schedule == "constant":
            return float(self.eta0)
        raise ValueError(f"unknown schedule {self.schedule!r}")

    def default_averaging(self) -> str:
        if self.averaging is not None:
            return self.averaging
        if self.variant != "stochastic" or self.schedule == "smooth":
            return "eq10-aligned"
        return "eq2-shifted"


@dataclass
class Trajectory:
    """Per-iteration record of a single solver run."""

    k: np.ndarray
    eta: np.ndarray
    obj_gap_eq2: np.ndarray
    feas_eq2: np.ndarray
    err_rho_eq2: np.ndarray
    obj_gap_eq10: np.ndarray
    feas_eq10: np.ndarray
    err_rho_eq10: np.ndarray
    step_ms: np.ndarray
    final_state: IterateState | None = None
    invariant_log: list = field(default_factory=list)
    max_invariant_residual: float = 0.0
    error: str | None = None

    COLUMNS = ("k", "eta", "obj_gap_eq2", "feas_eq2", "err_rho_eq2",
               "obj_gap_eq10", "feas_eq10", "err_rho_eq10", "step_ms")

    def __len__(self):
        return len(self.k)

    def err_curve(self, averaging: str) -> np.ndarray:
        if averaging == "eq2-shifted":
            return self.err_rho_eq2
        if averaging == "eq10-aligned":
            return self.err_rho_eq10
        raise ValueError(f"unknown averaging {averaging!r}")


def _exact_x_update(state: IterateState, spec: ProblemSpec, beta: float,
                    cache: QuadCache) -> np.ndarray:
    """Line-1 exact minimization for a quadratic-form first-block objective."""
    try:
        H, c, _ = spec.theta1.quadratic_parts()
    except AttributeError as exc:
        raise SolverError(
            "exact x-minimization needs a quadratic first-block objective; "
            "use the linearized or stochastic variant instead"
        ) from exc
    v = spec.b + state.lam / beta - spec.B @ state.y
    H0 = H + beta * cache.AtA
    rhs = beta * (spec.A.T @ v) - c
    return min_quadratic_over_set(H0, ("x-exact", beta), 0.0, rhs, spec.X, cache,
                                  x_init=state.x)


def step_deterministic(state: IterateState, spec: ProblemSpec, cfg: SolverConfig,
                       cache: QuadCache | None = None) -> IterateState:
    cache = cache or QuadCache(spec)
    x_next = _exact_x_update(state, spec, cfg.beta, cache)
    y_next = solve_y_update(x_next, state.lam, spec, cfg.beta)
    lam_next = state.lam - cfg.beta * (spec.A @ x_next + spec.B @ y_next - spec.b)
    state.advance(x_next, y_next, lam_next)
    return state


def _linearized_x_update(state: IterateState, spec: ProblemSpec, cfg: SolverConfig,
                         cache: QuadCache) -> np.ndarray:
    beta = cfg.beta
    G = cfg.G
    if G is None or (np.isscalar(G) and G == 0):
        return _exact_x_update(state, spec, beta, cache)
    v = spec.b + state.lam / beta - spec.B @ state.y
    if np.isscalar(G):
        # G = r*I - beta*A'A: the quadratic term becomes isotropic and the
        # update is the linearized proximal point step
        r = float(G)
        top = beta * np.linalg.eigvalsh(cache.AtA)[-1]
        if r < top - 1e-12:
            raise SolverError(
                f"r = {r} < beta*||A'A||_2 = {top}: G = r*I - beta*A'A is not psd"
            )
        grad_lin = beta * (spec.A.T @ (spec.A @ state.x - v))
        z = state.x - grad_lin / r
        if hasattr(spec.theta1, "prox"):
            if not isinstance(spec.X, WholeSpace):
                raise SolverError(
                    "prox-based linearized x-update supports whole-space X only"
                )
            return spec.theta1.prox(z, r)
        H, c, _ = spec.theta1.quadratic_parts()
        rhs = r * z - c
        return min_quadratic_over_set(H, ("x-lin-r", r), r, rhs, spec.X, cache,
                                      x_init=state.x)
    # general psd matrix G
    try:
        H, c, _ = spec.theta1.quadratic_parts()
    except AttributeError as exc:
        raise SolverError(
            "matrix-G linearized update needs a quadratic first-block objective"
        ) from exc
    Q = H + beta * cache.AtA + G
    rhs = beta * (spec.A.T @ v) - c + G @ state.x
    if not isinstance(spec.X, WholeSpace):
        raise SolverError("matrix-G linearized update supports whole-space X only")
    return np.linalg.solve(Q, rhs)


def step_linearized(state: IterateState, spec: ProblemSpec, cfg: SolverConfig,
                    cache: QuadCache | None = None) -> IterateState:
    cache = cache or QuadCache(spec)
    x_next = _linearized_x_update(state, spec, cfg, cache)
    y_next = solve_y_update(x_next, state.lam, spec, cfg.beta)
    lam_next = state.lam - cfg.beta * (spec.A @ x_next + spec.B @ y_next - spec.b)
    state.advance(x_next, y_next, lam_next)
    return state


def step_stochastic(state: IterateState, spec: ProblemSpec, cfg: SolverConfig,
                    oracle, cache: QuadCache | None = None,
                    buffer: SampleBuffer | None = None) -> IterateState:
    cache = cache or QuadCache(spec)
    eta = cfg.eta(state.k + 1, spec)
    sample = oracle.sample_subgradient(state.x, k=state.k, buffer=buffer)
    x_next = solve_x_subproblem(sample.g, state, spec, cfg.beta, eta, cache)
    y_next = solve_y_update(x_next, state.lam, spec, cfg.beta)
    lam_next = state.lam - cfg.beta * (spec.A @ x_next + spec.B @ y_next - spec.b)
    state.advance(x_next, y_next, lam_next)
    return state


def step_inequality_check(prev: StackedW, curr: StackedW, probe_w: StackedW,
                 g: np.ndarray, delta: np.ndarray, eta: float,
                 spec: ProblemSpec, beta: float):
    """Signed residual of the per-iteration variational bound at one probe.

    The bound compares the linearized Lagrangian decrease against telescoping
    distance terms, the stepsize-weighted subgradient norm and the noise
    pairing term.  Must be <= 0 up to roundoff, for every probe in W.
    Returns (residual, scale) with scale the sum of term magnitudes.
    """
    th1_prev = spec.theta1.value(prev.x)
    th2_curr = spec.theta2.value(curr.y)
    th_probe = spec.theta(probe_w.x, probe_w.y)
    Fw = eval_F(curr, spec)
    lhs = th1_prev + th2_curr - th_probe + (curr - probe_w).dot(Fw)

    def sq(v):
        return float(v @ v)

    t1 = eta * sq(g) / 2.0
    t2 = (sq(prev.x - probe_w.x) - sq(curr.x - probe_w.x)) / (2.0 * eta)
    r_prev = spec.A @ probe_w.x + spec.B @ prev.y - spec.b
    r_curr = spec.A @ probe_w.x + spec.B @ curr.y - spec.b
    t3 = beta * (sq(r_prev) - sq(r_curr)) / 2.0
    t4 = float(delta @ (probe_w.x - prev.x))
    t5 = (sq(probe_w.lam - prev.lam) - sq(probe_w.lam - curr.lam)) / (2.0 * beta)
    rhs = t1 + t2 + t3 + t4 + t5
    scale = 1.0 + abs(lhs) + abs(t1) + abs(t2) + abs(t3) + abs(t4) + abs(t5)
    return lhs - rhs, scale


def check_y_optimality(curr: StackedW, spec: ProblemSpec, rng: np.random.Generator,
                       probes: int = 20):
    """Max signed residual of the y-update optimality inequality over probes.

    For the exact y-minimizer, th2(y_{k+1}) - th2(y') + <y_{k+1} - y',
    -B'lam_{k+1}> <= 0 for every y' in Y.  Returns (max residual, scale).
    """
    grad_term = -spec.B.T @ curr.lam
    worst = -np.inf
    scale = 1.0 + abs(spec.theta2.value(curr.y)) + float(np.linalg.norm(grad_term))
    for _ in range(probes):
        y_probe = spec.Y.project(spec.Y.sample(rng, scale=1.0 + np.linalg.norm(curr.y)))
        res = (spec.theta2.value(curr.y) - spec.theta2.value(y_probe)
               + float((curr.y - y_probe) @ grad_term))
        worst = max(worst, res)
    return worst, scale


def _probe_w(spec: ProblemSpec, rng: np.random.Generator, lam_scale: float) -> StackedW:
    x = spec.X.project(spec.X.sample(rng))
    y = spec.Y.project(spec.Y.sample(rng))
    lam = lam_scale * rng.standard_normal(spec.m)
    return StackedW(x, y, lam)


def run(spec: ProblemSpec, cfg: SolverConfig, oracle=None,
        x0: np.ndarray | None = None, y0: np.ndarray | None = None,
        theta_star: float | None = None,
        record_at: np.ndarray | None = None) -> Trajectory:
    """Execute t_max steps and record the trajectory.

    record_at restricts metric rows to the given iteration counts (sorted,
    1-based); by default every iteration is recorded.  Objective gaps need
    theta_star; without it only feasibility is populated.
    """
    cfg.validate(spec)
    state = IterateState(
        np.zeros(spec.d1) if x0 is None else spec.X.project(np.asarray(x0, float)),
        np.zeros(spec.d2) if y0 is None else np.asarray(y0, dtype=float),
        np.zeros(spec.m),
    )
    cache = QuadCache(spec)
    if cfg.variant == "stochastic" and oracle is None:
        raise ValueError("stochastic variant needs an oracle")
    buffer = oracle.presample(cfg.t_max) if (oracle is not None and cfg.t_max) else None
    record_set = None if record_at is None else set(int(t) for t in record_at)
    rng = np.random.default_rng(cfg.probe_seed)

    rows = {name: [] for name in Trajectory.COLUMNS}
    inv_log = []
    max_resid = 0.0
    error = None

    for k in range(cfg.t_max):
        t0 = time.perf_counter()
        prev_w = state.as_w()
        eta = cfg.eta(k + 1, spec) if cfg.variant == "stochastic" else math.nan
        try:
            if cfg.variant == "deterministic":
                step_deterministic(state, spec, cfg, cache)
                sample = None
            elif cfg.variant == "linearized":
                step_linearized(state, spec, cfg, cache)
                sample = None
            else:
                sample = oracle.sample_subgradient(state.x, k=k, buffer=buffer)
                x_next = solve_x_subproblem(sample.g, state, spec, cfg.beta, eta, cache)
                y_next = solve_y_update(x_next, state.lam, spec, cfg.beta)
                lam_next = state.lam - cfg.beta * spec.residual(x_next, y_next)
                state.advance(x_next, y_next, lam_next)
        except Exception as exc:  # return the partial trajectory with the error
            error = f"iteration {k}: {exc}"
            break
        step_ms = (time.perf_counter() - t0) * 1e3

        if cfg.check_invariants:
            max_resid = max(
                max_resid,
                _run_checks(prev_w, state, spec, cfg, sample, eta, rng, inv_log),
            )

        t = k + 1
        if record_set is None or t in record_set:
            _record_row(rows, state, spec, cfg, eta, theta_star, step_ms)

    traj = Trajectory(
        **{name: np.asarray(vals) for name, vals in rows.items()},
        final_state=state,
        invariant_log=inv_log,
        max_invariant_residual=max_resid,
        error=error,
    )
    return traj


def _record_row(rows, state, spec, cfg, eta, theta_star, step_ms):
    rows["k"].append(state.k)
    rows["eta"].append(eta)
    rows["step_ms"].append(step_ms)
    for tag, u_bar in (("eq2", state.u_bar_shifted()), ("eq10", state.u_bar_aligned())):
        feas = float(np.linalg.norm(spec.residual(*u_bar)))
        if theta_star is None:
            gap = math.nan
            err = math.nan
        else:
            err, gap, feas = err_rho(u_bar, spec, theta_star, cfg.rho)
        rows[f"obj_gap_{tag}"].append(gap)
        rows[f"feas_{tag}"].append(feas)
        rows[f"err_rho_{tag}"].append(err)


def _run_checks(prev_w, state, spec, cfg, sample, eta, rng, inv_log) -> float:
    """All enabled per-iteration invariants; returns the worst scaled residual."""
    curr = state.as_w()
    beta = cfg.beta
    worst = 0.0

    # dual-update identity: exact by construction
    dual_res = float(np.linalg.norm(
        curr.lam - prev_w.lam + beta * spec.residual(curr.x, curr.y)))
    worst = max(worst, dual_res)
    if dual_res > 1e-12 * (1.0 + np.linalg.norm(curr.lam)):
        inv_log.append((state.k, "dual-identity", dual_res))

    yres, yscale = check_y_optimality(curr, spec, rng, probes=max(cfg.probe_count, 20))
    worst = max(worst, yres / yscale)
    if yres > cfg.check_tol * yscale:
        inv_log.append((state.k, "y-optimality", yres))

    if sample is not None:
        # 3-points relation at the realized x-update
        v = spec.b + prev_w.lam / beta - spec.B @ prev_w.y
        g_l = sample.g + beta * (spec.A.T @ (spec.A @ curr.x - v))
        for _ in range(cfg.probe_count):
            xp = spec.X.project(spec.X.sample(rng))
            ok, res = three_points_check(curr.x, prev_w.x, xp, g_l, 1.0 / eta,
                                         tol=cfg.check_tol)
            worst = max(worst, res)
            if not ok:
                inv_log.append((state.k, "three-points", res))
        # per-iteration variational bound at random probes
        if sample.delta is not None:
            lam_scale = 1.0 + float(np.linalg.norm(curr.lam))
            for _ in range(cfg.probe_count):
                w_probe = _probe_w(spec, rng, lam_scale)
                res, scale = step_inequality_check(prev_w, curr, w_probe, sample.g,
                                          sample.delta, eta, spec, beta)
                worst = max(worst, res / scale)
                if res > cfg.check_tol * scale:
                    inv_log.append((state.k, "step-inequality", res))
    return worst
