"""Hot inner loops for identity-split problems (A = I, B = -I, b = 0).

The stochastic solver spends essentially all its time in a tight per-iteration
loop of O(d) vector work.  For the identity-split presets every subproblem has
a closed form, so the whole run collapses into one kernel that consumes
pre-drawn randomness and emits running-average snapshots at requested
iteration counts.

The kernel is JIT-compiled with numba when available; setting the environment
variable ``STOCADMM_NO_NUMBA=1`` (or installing without numba) selects the
pure-numpy fallback, which executes the identical Python function body.  Both
paths consume the same pre-drawn random buffers, so trajectories agree to the
last bit.  ``benchmarks/benchmark_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "admm_identity_split",
    "admm_identity_split_py",
    "THETA1_LSQ",
    "THETA1_HINGE",
    "THETA2_L1",
    "THETA2_SQL2",
]

THETA1_LSQ = 0
THETA1_HINGE = 1
THETA2_L1 = 0
THETA2_SQL2 = 1


def _admm_identity_split(data, targets, theta1_kind, mu, theta2_coef, theta2_kind,
                         radius, beta, etas, idx, noise, grid, x0, y0):
    """Run t = len(etas) stochastic ADMM steps on an identity-split problem.

    data/targets: n x d design and per-row targets (labels for the hinge).
    idx[k] selects the sampled component for step k; idx[k] = -1 means the
    exact averaged (sub)gradient.  noise[k] is added to the subgradient.
    radius <= 0 means whole-space X, otherwise an origin-centered ball.
    grid holds sorted 1-based iteration counts at which running averages of
    both conventions are snapshotted.

    Returns (xbar_shifted, xbar_aligned, ybar, x, y, lam) with the snapshot
    arrays shaped (len(grid), d).
    """
    n, d = data.shape
    t = etas.shape[0]
    x = x0.copy()
    y = y0.copy()
    lam = np.zeros(d)
    sx_shift = np.zeros(d)
    sx_align = np.zeros(d)
    sy = np.zeros(d)
    n_grid = grid.shape[0]
    xbar_shift = np.zeros((n_grid, d))
    xbar_align = np.zeros((n_grid, d))
    ybar = np.zeros((n_grid, d))
    p = 0
    for k in range(t):
        sx_shift += x
        i = idx[k]
        # sampled (or exact) subgradient of the first block at x
        if theta1_kind == THETA1_LSQ:
            if i >= 0:
                r = np.dot(data[i], x) - targets[i]
                g = data[i] * r + mu * x
            else:
                g = (data.T @ (data @ x - targets)) / n + mu * x
        else:
            if i >= 0:
                if targets[i] * np.dot(data[i], x) < 1.0:
                    g = -targets[i] * data[i] + mu * x
                else:
                    g = mu * x
            else:
                g = mu * x
                for j in range(n):
                    if targets[j] * np.dot(data[j], x) < 1.0:
                        g = g - targets[j] * data[j] / n
        g = g + noise[k]
        eta = etas[k]
        # x-update: isotropic quadratic, then exact ball projection
        c = beta + 1.0 / eta
        z = (beta * y + lam + x / eta - g) / c
        if radius > 0.0:
            nz = np.sqrt(np.dot(z, z))
            if nz > radius:
                z = z * (radius / nz)
        x = z
        # y-update: exact prox of the second block
        zy = x - lam / beta
        if theta2_kind == THETA2_L1:
            tau = theta2_coef / beta
            y = np.sign(zy) * np.maximum(np.abs(zy) - tau, 0.0)
        else:
            y = beta * zy / (beta + theta2_coef)
        # dual ascent
        lam = lam - beta * (x - y)
        sx_align += x
        sy += y
        if p < n_grid and k + 1 == grid[p]:
            inv = 1.0 / (k + 1)
            xbar_shift[p] = sx_shift * inv
            xbar_align[p] = sx_align * inv
            ybar[p] = sy * inv
            p += 1
    return xbar_shift, xbar_align, ybar, x, y, lam


admm_identity_split_py = _admm_identity_split

_disabled = os.environ.get("STOCADMM_NO_NUMBA", "").lower() in ("1", "true", "yes")
NUMBA_ENABLED = False
if not _disabled:
    try:
        import numba

        admm_identity_split = numba.njit(cache=True, nogil=True)(_admm_identity_split)
        NUMBA_ENABLED = True
    except ImportError:
        admm_identity_split = _admm_identity_split
else:
    admm_identity_split = _admm_identity_split
