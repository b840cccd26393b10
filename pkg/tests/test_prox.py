"""Projections, proximal operators and the constrained quadratic x-update.

Expected values come from independent references: closed forms checked by
hand, 1-D grid minimization, or dense brute force on tiny instances.
"""

import numpy as np
import pytest

from stocadmm.functions import (HingeSumPenalty, L1Norm, SquaredL2Penalty,
                                ZeroFunction, soft_threshold)
from stocadmm.problem import IterateState
from stocadmm.prox import (QuadCache, min_quadratic_over_set, project,
                           prox_theta2, solve_x_subproblem, solve_y_update,
                           three_points_check)
from stocadmm.sets import Ball, Box, WholeSpace

from conftest import scalar_split_spec, ridge_split_spec, small_lasso_preset


# ---------------------------------------------------------------------------
# projections


def test_ball_projection_hand_example():
    assert np.allclose(project(np.array([3.0, 4.0]), Ball(2, 1.0)), [0.6, 0.8])


def test_box_projection_clamps():
    box = Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert np.allclose(project(np.array([-3.0, 5.0]), box), [-1.0, 2.0])


def test_projection_is_idempotent():
    rng = np.random.default_rng(0)
    for s in (Ball(4, 2.0), Box(-np.ones(4), np.ones(4))):
        for _ in range(20):
            p = project(rng.standard_normal(4) * 3, s)
            assert np.allclose(project(p, s), p, rtol=0, atol=1e-14)
            assert s.contains(p)


# ---------------------------------------------------------------------------
# proximal operators


def test_soft_threshold_hand_example():
    out = soft_threshold(np.array([2.0, -0.5, -3.0]), 1.0)
    assert np.allclose(out, [1.0, 0.0, -2.0])


def test_l1_prox_equals_soft_threshold():
    z = np.array([2.0, -0.5, -3.0])
    out = prox_theta2(z, 1.0, L1Norm(1.0), WholeSpace(3))
    assert np.allclose(out, [1.0, 0.0, -2.0])


def test_hinge_sum_prox_against_grid_search():
    f = HingeSumPenalty(1.0)
    ys = np.arange(-6.0, 6.0, 1e-6)
    hinge = np.maximum(0.0, 1.0 - ys)
    for z, c in ((0.0, 1.0), (0.5, 2.0), (1.5, 1.0), (-2.0, 0.5), (0.9, 10.0)):
        got = f.prox(np.array([z]), c)[0]
        ref = ys[np.argmin(hinge + 0.5 * c * (ys - z) ** 2)]
        assert got == pytest.approx(ref, abs=2e-6)
    # hand value: z = 0, c = 1 moves to the kink point
    assert f.prox(np.array([0.0]), 1.0)[0] == pytest.approx(1.0)


def test_squared_l2_prox_closed_form():
    f = SquaredL2Penalty(3.0)
    z = np.array([2.0, -4.0])
    # argmin (3/2)||y||^2 + (c/2)||y - z||^2 = c z / (c + 3)
    assert np.allclose(f.prox(z, 1.0), z / 4.0)


def test_prox_is_firmly_nonexpansive():
    rng = np.random.default_rng(3)
    for f in (L1Norm(0.7), SquaredL2Penalty(2.0), HingeSumPenalty(1.3)):
        for _ in range(50):
            a, b = rng.standard_normal(5) * 3, rng.standard_normal(5) * 3
            pa, pb = f.prox(a, 1.5), f.prox(b, 1.5)
            lhs = float((pa - pb) @ (pa - pb))
            rhs = float((a - b) @ (pa - pb))
            assert lhs <= rhs + 1e-12


def test_prox_theta2_box_restriction_clamps():
    box = Box(np.array([0.0]), np.array([0.5]))
    out = prox_theta2(np.array([2.0]), 1.0, L1Norm(1.0), box)
    # unconstrained prox gives 1.0, the box clamps to 0.5; verify against grid
    assert out[0] == pytest.approx(0.5)
    ys = np.arange(0.0, 0.5 + 1e-6, 1e-6)
    vals = np.abs(ys) + 0.5 * (ys - 2.0) ** 2
    assert out[0] == pytest.approx(ys[np.argmin(vals)], abs=2e-6)


def test_prox_theta2_ball_only_for_indicator():
    ball = Ball(2, 1.0)
    out = prox_theta2(np.array([3.0, 4.0]), 1.0, ZeroFunction(), ball)
    assert np.allclose(out, [0.6, 0.8])
    with pytest.raises(ValueError, match="indicator-only"):
        prox_theta2(np.array([3.0, 4.0]), 1.0, L1Norm(1.0), ball)


def test_prox_requires_positive_scaling():
    with pytest.raises(ValueError, match="positive"):
        prox_theta2(np.zeros(2), 0.0, L1Norm(1.0), WholeSpace(2))


# ---------------------------------------------------------------------------
# constrained quadratic minimization


def _quad_val(H0, shift, rhs, x):
    return 0.5 * x @ (H0 @ x) + 0.5 * shift * x @ x - rhs @ x


def test_scalar_subproblem_hand_example():
    # (1 + 1) x = -1  =>  x = -1/2
    spec = scalar_split_spec()
    state = IterateState.zeros(spec)
    x = solve_x_subproblem(np.array([1.0]), state, spec, beta=1.0, eta=1.0)
    assert x[0] == pytest.approx(-0.5, abs=1e-12)


def test_beta_zero_reduces_to_gradient_step():
    spec = ridge_split_spec()
    state = IterateState.zeros(spec)
    state.x = np.linspace(-1, 1, spec.d1)
    g = np.arange(spec.d1, dtype=float)
    out = solve_x_subproblem(g, state, spec, beta=0.0, eta=0.3)
    assert np.allclose(out, state.x - 0.3 * g, atol=1e-12)


def test_ball_solve_matches_brute_force_2d():
    rng = np.random.default_rng(8)
    H0 = np.array([[2.0, 0.3], [0.3, 1.0]])
    cache_spec = scalar_split_spec()
    cache = QuadCache(cache_spec)
    ball = Ball(2, 1.0)
    grid = np.arange(-1.0, 1.0 + 5e-4, 1e-3)
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    for _ in range(5):
        rhs = rng.standard_normal(2) * 3
        shift = float(rng.uniform(0.1, 2.0))
        x = min_quadratic_over_set(H0, ("t", shift, tuple(rhs)), shift, rhs,
                                   ball, cache)
        assert np.linalg.norm(x) <= 1.0 + 1e-12
        vals = (0.5 * np.einsum("ij,jk,ik->i", pts, H0, pts)
                + 0.5 * shift * np.einsum("ij,ij->i", pts, pts) - pts @ rhs)
        assert _quad_val(H0, shift, rhs, x) <= vals.min() + 1e-6


def test_box_solve_satisfies_stationarity():
    rng = np.random.default_rng(9)
    H0 = np.array([[3.0, 0.5, 0.0], [0.5, 2.0, 0.1], [0.0, 0.1, 1.0]])
    box = Box(-np.ones(3) * 0.5, np.ones(3) * 0.5)
    cache = QuadCache(scalar_split_spec())
    for _ in range(5):
        rhs = rng.standard_normal(3) * 2
        x = min_quadratic_over_set(H0, ("box", tuple(rhs)), 1.0, rhs, box, cache)
        grad = H0 @ x + x - rhs
        resid = np.linalg.norm(x - box.project(x - grad))
        assert resid <= 1e-8


def test_whole_space_solve_is_the_linear_solve():
    H0 = np.array([[2.0, 0.0], [0.0, 4.0]])
    cache = QuadCache(scalar_split_spec())
    rhs = np.array([1.0, -2.0])
    x = min_quadratic_over_set(H0, "ws", 1.0, rhs, WholeSpace(2), cache)
    assert np.allclose(x, np.linalg.solve(H0 + np.eye(2), rhs), atol=1e-12)


def test_cache_refactorizes_when_shift_moves():
    H0 = np.eye(2)
    cache = QuadCache(scalar_split_spec())
    rhs = np.array([1.0, 1.0])
    a = min_quadratic_over_set(H0, "k", 1.0, rhs, WholeSpace(2), cache)
    b = min_quadratic_over_set(H0, "k", 3.0, rhs, WholeSpace(2), cache)
    assert np.allclose(a, rhs / 2.0)
    assert np.allclose(b, rhs / 4.0)


def test_x_subproblem_validates_inputs():
    spec = scalar_split_spec()
    state = IterateState.zeros(spec)
    with pytest.raises(ValueError, match="eta must be positive"):
        solve_x_subproblem(np.zeros(1), state, spec, beta=1.0, eta=0.0)
    with pytest.raises(ValueError, match="beta must be nonnegative"):
        solve_x_subproblem(np.zeros(1), state, spec, beta=-1.0, eta=1.0)


def test_y_update_requires_scaled_identity_b():
    spec = ridge_split_spec()
    bad = type(spec)(
        theta1=spec.theta1, theta2=spec.theta2,
        A=spec.A, B=np.triu(np.ones((spec.d2, spec.d2))), b=spec.b,
        X=spec.X, Y=spec.Y, constants=spec.constants)
    with pytest.raises(ValueError, match="B = s\\*I"):
        solve_y_update(np.zeros(spec.d1), np.zeros(spec.m), bad, beta=1.0)


def test_y_update_matches_grid_search_1d():
    spec = scalar_split_spec(l1=0.4)
    lam = np.array([0.7])
    x_next = np.array([1.2])
    beta = 2.0
    y = solve_y_update(x_next, lam, spec, beta)
    ys = np.arange(-5.0, 5.0, 1e-6)
    vals = 0.4 * np.abs(ys) + 0.5 * beta * (x_next[0] - ys - lam[0] / beta) ** 2
    assert y[0] == pytest.approx(ys[np.argmin(vals)], abs=2e-6)


# ---------------------------------------------------------------------------
# optimality certificates


def test_three_points_relation_at_ball_solutions():
    preset = small_lasso_preset()
    spec = preset.spec
    rng = np.random.default_rng(12)
    state = IterateState.zeros(spec)
    state.x = spec.X.project(rng.standard_normal(spec.d1))
    state.y = rng.standard_normal(spec.d2)
    state.lam = rng.standard_normal(spec.m)
    cache = QuadCache(spec)
    beta, eta = 1.0, 0.05
    g = spec.theta1.subgrad(state.x) + rng.standard_normal(spec.d1)
    x_star = solve_x_subproblem(g, state, spec, beta, eta, cache)
    # effective gradient of the full subproblem objective at the minimizer
    v = spec.b + state.lam / beta - spec.B @ state.y
    g_eff = g + beta * (spec.A.T @ (spec.A @ x_star - v))
    for _ in range(20):
        probe = spec.X.project(spec.X.sample(rng))
        holds, resid = three_points_check(x_star, state.x, probe, g_eff,
                                          1.0 / eta, tol=1e-9)
        assert holds, f"residual {resid}"
        # first-order optimality over the set
        assert g_eff @ (probe - x_star) + (x_star - state.x) @ (probe - x_star) / eta >= -1e-8


def test_three_points_detects_a_non_minimizer():
    x_bad = np.array([1.0])
    u = np.array([0.0])
    g = np.array([5.0])  # steep ascent direction: moving back is better
    holds, resid = three_points_check(x_bad, u, np.array([-1.0]), g, 1.0)
    assert not holds and resid > 0
