"""Fused iteration kernel: fallback equivalence and agreement with the
step-by-step solver path."""

import numpy as np
import pytest

from stocadmm import kernels
from stocadmm.harness import run_replication
from stocadmm.presets import build_preset
from stocadmm.solvers import SolverConfig, run


def _kernel_args(preset, solver, stream=0):
    spec = preset.spec
    ki = preset.kernel
    t = solver.t_max
    etas = np.array([solver.eta(k + 1, spec) for k in range(t)])
    buf = preset.make_oracle(stream).presample(t)
    idx = buf.indices if buf.indices is not None else np.full(t, -1, np.int64)
    noise = buf.noise if buf.noise is not None else np.zeros((t, spec.d1))
    grid = np.arange(1, t + 1, dtype=np.int64)
    return (ki.data, ki.targets, ki.theta1_kind, ki.mu, ki.theta2_coef,
            ki.theta2_kind, ki.radius, solver.beta, etas, idx, noise, grid,
            np.zeros(spec.d1), np.zeros(spec.d2))


@pytest.mark.parametrize("name", ["lasso-split", "strongly-convex-lasso",
                                  "hinge-svm-split"])
def test_jitted_kernel_matches_numpy_fallback(name):
    preset = build_preset(name, seed=2, n=30, d=4)
    solver = SolverConfig(variant="stochastic", schedule="convex", t_max=300)
    args = _kernel_args(preset, solver)
    out_py = kernels.admm_identity_split_py(*args)
    out_jit = kernels.admm_identity_split(*args)
    for a, b in zip(out_py, out_jit):
        assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= 1e-13


@pytest.mark.parametrize("name", ["lasso-split", "hinge-svm-split"])
def test_kernel_agrees_with_step_by_step_solver(name):
    preset = build_preset(name, seed=2, n=30, d=4)
    spec = preset.spec
    solver = SolverConfig(variant="stochastic", schedule="convex", t_max=200)
    grid = np.arange(1, 201)
    kern = run_replication(preset, solver, 3, grid, theta_star=0.0)
    general = run(spec, solver, oracle=preset.make_oracle(3), theta_star=0.0,
                  record_at=grid)
    assert np.max(np.abs(kern.err_rho_eq2 - general.err_rho_eq2)) <= 1e-10
    assert np.max(np.abs(kern.err_rho_eq10 - general.err_rho_eq10)) <= 1e-10
    assert np.max(np.abs(kern.final_state.x - general.final_state.x)) <= 1e-12
    assert np.max(np.abs(kern.final_state.lam - general.final_state.lam)) <= 1e-12


def test_kernel_snapshot_grid_positions():
    preset = build_preset("lasso-split", seed=1, n=20, d=3)
    solver = SolverConfig(variant="stochastic", schedule="convex", t_max=50)
    args = list(_kernel_args(preset, solver))
    args[11] = np.array([10, 50], dtype=np.int64)  # sparse snapshot grid
    xb2, xb10, yb, x, y, lam = kernels.admm_identity_split_py(*args)
    full = kernels.admm_identity_split_py(*_kernel_args(preset, solver))
    assert np.allclose(xb2[0], full[0][9], atol=1e-14)
    assert np.allclose(xb2[1], full[0][49], atol=1e-14)
    assert np.allclose(yb[1], full[2][49], atol=1e-14)


def test_exact_oracle_sentinel_uses_full_gradient():
    preset = build_preset("lasso-split", seed=1, n=20, d=3, oracle="exact")
    spec = preset.spec
    solver = SolverConfig(variant="stochastic", schedule="constant", eta0=0.1,
                          t_max=5)
    args = _kernel_args(preset, solver)
    assert np.all(np.asarray(args[9]) == -1)
    out = kernels.admm_identity_split_py(*args)
    general = run(spec, solver, oracle=preset.make_oracle(0), theta_star=None)
    assert np.allclose(out[3], general.final_state.x, atol=1e-13)


def test_numba_flag_is_exposed():
    assert isinstance(kernels.NUMBA_ENABLED, bool)
