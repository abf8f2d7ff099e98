import math

import numpy as np
import pytest

from ctmkit.coefficient_ops import (CoefficientVector, FormOperator, apply_R, apply_T, bound_monotone_from,
                                    dense_matrix, measured_decay_constant, neumann_solve, probe_norms,
                                    product_bound_min, product_bound_value, random_smooth_vector,
                                    reflection_annihilation_check, theoretical_bound)
from ctmkit.errors import ConfigError
from ctmkit.spectral import ScatteringData

K = np.arange(-20.0, 20.0, 1 / 16)


def weak(k):
    return 0.2 * np.exp(-k**2)


def op3(form=1, r=weak):
    return FormOperator(form, K, [1.0, 0.0, -1.0], [r] * 3, [1.0] * 3)


def test_shapes_and_validation():
    op = op3()
    assert op.m == 3 and op.ncomp == 4 and op.c_gap == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        FormOperator(1, K, [0.0, 1.0], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        FormOperator(3, K, [1.0, 0.0], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        CoefficientVector(K, np.full((4, K.size), np.nan))


@pytest.mark.parametrize("form", [1, 2])
def test_R_is_linear_and_T_is_id_minus_R(form):
    op = op3(form)
    rng = np.random.default_rng(1)
    a, b = random_smooth_vector(op, rng), random_smooth_vector(op, rng)
    lhs = apply_R(op, 2.0 * a + b)
    rhs = 2.0 * apply_R(op, a) + apply_R(op, b)
    assert np.max(np.abs(lhs.g - rhs.g)) < 1e-12
    assert np.max(np.abs(apply_T(op, a).g - (a - apply_R(op, a)).g)) < 1e-14


@pytest.mark.parametrize("form", [1, 2])
@pytest.mark.parametrize("m", [2, 3, 4])
def test_zero_reflection_makes_R_nilpotent(form, m):
    v = np.linspace(1.0, -1.0, m)
    op = FormOperator(form, K, v, [0.3] * m, [0.8] * m)
    g = random_smooth_vector(op, np.random.default_rng(m))
    assert reflection_annihilation_check(op, g) <= 1e-12


def test_neumann_solution_inverts_T():
    op = op3()
    rhs = random_smooth_vector(op, np.random.default_rng(2))
    res = neumann_solve(op, rhs, tol=1e-12)
    resid = (apply_T(op, res.g) - rhs).norm() / rhs.norm()
    assert resid < 1e-10 and res.iterations <= 200


def test_dense_matrix_agrees_with_apply():
    op = FormOperator(1, np.arange(-20.0, 20.0, 0.5), [1.0, -1.0], [weak] * 2, [1.0] * 2)
    g = random_smooth_vector(op, np.random.default_rng(3))
    T = dense_matrix(op)
    assert np.max(np.abs(T @ g.g.ravel() - apply_T(op, g).g.ravel())) < 1e-12


def test_theoretical_bound_closed_forms():
    # j = 1, m = 2: both branches equal j m C(m) with C(m) = 2 C / min(c, 1)
    assert theoretical_bound(2, 1, 1.5, 0.25) == pytest.approx(2 * 2 * 1.5 / 0.25)
    # j = 7, m = 3, c = 1: Cm = 4 C; factorial branch 7! vs (2!)^2 = 4
    C = 0.5
    A = 7 * 3 * (4 * C) ** 7
    assert theoretical_bound(3, 7, C, 1.0) == pytest.approx(A / max(math.factorial(7), 4.0))
    with pytest.raises(ConfigError):
        theoretical_bound(2, 1, -1.0, 1.0)


def test_bound_eventually_decreasing():
    j0 = bound_monotone_from(3, 2.0, 0.5)
    b = [theoretical_bound(3, j, 2.0, 0.5) for j in range(j0, j0 + 40)]
    assert all(b[i + 2] < b[i] for i in range(len(b) - 2))


def test_probe_norms_below_bound():
    op = op3()
    C = measured_decay_constant([ScatteringData(K, weak(K) + 0j, np.ones(K.size, complex))])
    meas = probe_norms(op, j_max=4, n_probe=5, seed=0)
    bound = np.array([theoretical_bound(3, j, C, op.c_gap) for j in range(1, 5)])
    assert np.all(meas <= bound)


def test_measured_decay_constant_of_rational_coefficient():
    k = np.linspace(-50, 50, 20001)
    d = ScatteringData(k, 1.0 / (1.0 + k**2) + 0j, np.ones(k.size, complex))
    # the n = 0 term peaks at (1 + sqrt 2) / 2 < 2
    # (1+|k|)^2 |d/dk (1+k^2)^-1| = 2|k|(1+|k|)^2/(1+k^2)^2 peaks at k = 1 with value 2
    assert measured_decay_constant([d]) == pytest.approx(2.0, rel=1e-4)


def test_product_bound_two_points():
    # sup_k 1/((1+|k+1|)(1+|k|)) = 1/2, attained at k = 0 and k = -1
    meas, bound = product_bound_min(np.array([1.0, 0.0]))[:2]
    assert meas == pytest.approx(0.5)
    assert product_bound_value([1.0, 0.0]) == pytest.approx(1.0) and bound == pytest.approx(1.0)


def test_product_bound_rejects_unsorted():
    with pytest.raises(ConfigError):
        product_bound_min(np.array([0.0, 1.0]))
