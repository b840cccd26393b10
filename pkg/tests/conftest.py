"""Shared problem builders for the test suite."""

import numpy as np
import pytest

from stocadmm.functions import (L1Norm, LeastSquares, Quadratic,
                                SquaredL2Penalty)
from stocadmm.problem import ProblemSpec, StructuralConstants
from stocadmm.sets import Ball, WholeSpace


def scalar_split_spec(h=1.0, c=-1.0, l1=0.5, M=2.0, radius=None, mu=0.0):
    """1-D identity-split problem: h x^2/2 + c x on the first block, an l1
    penalty on the second, constraint x = y."""
    X = WholeSpace(1, declared_diameter=4.0) if radius is None else Ball(1, radius)
    return ProblemSpec(
        theta1=Quadratic(np.array([[h]]), np.array([c])),
        theta2=L1Norm(l1),
        A=np.eye(1), B=-np.eye(1), b=np.zeros(1),
        X=X, Y=WholeSpace(1),
        constants=StructuralConstants(M=M, sigma=0.0, mu=mu),
    )


def ridge_split_spec(d=4, n=30, seed=7, lam_reg=0.3):
    """Fully quadratic split problem (least squares + squared l2), both sets
    unconstrained, so the direct stationarity solve applies."""
    rng = np.random.default_rng(seed)
    design = rng.standard_normal((n, d))
    targets = design @ rng.standard_normal(d) + 0.1 * rng.standard_normal(n)
    theta1 = LeastSquares(design, targets)
    L = float(np.linalg.eigvalsh(theta1.hessian())[-1])
    return ProblemSpec(
        theta1=theta1, theta2=SquaredL2Penalty(lam_reg),
        A=np.eye(d), B=-np.eye(d), b=np.zeros(d),
        X=WholeSpace(d, declared_diameter=20.0), Y=WholeSpace(d),
        constants=StructuralConstants(M=10.0, sigma=0.0, L=L),
    )


def small_lasso_preset(**params):
    from stocadmm.presets import build_preset
    defaults = dict(n=40, d=5)
    defaults.update(params)
    return build_preset("lasso-split", seed=3, **defaults)


@pytest.fixture(scope="session")
def lasso_preset():
    return small_lasso_preset()
