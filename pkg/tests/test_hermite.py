import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_hermite, gammaln

from grushin.errors import ConfigError, QuadratureError
from grushin.hermite import (
    HermiteBasis,
    derivative_matrix,
    eval_scaled,
    gauss_hermite_lebesgue,
    hermite_function,
    hermite_values,
    multi_indices,
    multiplicity,
    position_matrix,
)

# reference values computed with 40-digit arbitrary-precision arithmetic
# (hermite polynomial times gaussian, normalized), frozen here
ORACLE = {
    (0, 0.0): 0.7511255444649424829,
    (3, 1.5): 0.3167766271877350522,
    (12, 0.25): 0.112569801584213711,
    (50, 20.0): 4.391027182574152316e-48,
    (120, 3.0): -0.1360493195883293374,
    (200, 25.0): 8.686156931994076725e-23,
    (500, 31.0): -0.0986232153064751855,
}


def test_frozen_point_values():
    for (n, x), ref in ORACLE.items():
        got = hermite_function(n, np.array([x]))[0]
        assert got == pytest.approx(ref, rel=1e-12), (n, x)


def test_against_scipy_polynomials():
    # independent route: physicists' polynomial + explicit normalization
    x = np.linspace(-4.0, 4.0, 41)
    for n in [0, 1, 2, 5, 9, 16, 23]:
        lognorm = 0.5 * (n * math.log(2.0) + gammaln(n + 1) + 0.5 * math.log(math.pi))
        ref = eval_hermite(n, x) * np.exp(-0.5 * x * x - lognorm)
        got = hermite_values(n, x)[n]
        assert np.allclose(got, ref, rtol=1e-11, atol=1e-13)


def test_values_matrix_consistent_with_single():
    x = np.linspace(-9.0, 9.0, 37)
    table = hermite_values(60, x)
    for n in [0, 7, 33, 60]:
        assert np.array_equal(table[n], hermite_function(n, x))


def test_parity():
    x = np.linspace(0.1, 12.0, 25)
    vals_plus = hermite_values(31, x)
    vals_minus = hermite_values(31, -x)
    signs = (-1.0) ** np.arange(32)
    assert np.array_equal(vals_plus * signs[:, None], vals_minus)


def test_deep_tail_no_overflow():
    x = np.array([60.0, 90.0])
    vals = hermite_values(300, x)
    assert np.all(np.isfinite(vals))
    # at x = 90 every retained mode is far below the double floor
    assert np.all(vals[:, 1] == 0.0)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(min_value=0, max_value=80),
    x=st.floats(min_value=-15.0, max_value=15.0, allow_nan=False),
)
def test_uniform_bound(n, x):
    # normalized Hermite functions are uniformly bounded (Cramer bound)
    val = hermite_function(n, np.array([x]))[0]
    assert abs(val) <= 0.8161


def test_weights_match_classical_rule_small_n():
    # for small order the textbook correction w * exp(x^2) is safe: compare
    for n in [1, 2, 5, 12, 40]:
        x_np, w_np = np.polynomial.hermite.hermgauss(n)
        nodes, w = gauss_hermite_lebesgue(n)
        assert np.allclose(nodes, x_np, atol=1e-12)
        assert np.allclose(w, w_np * np.exp(x_np**2), rtol=1e-10)


def test_weights_large_order_finite():
    nodes, w = gauss_hermite_lebesgue(900)
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    # Lebesgue weights approximate the local node spacing
    spacing = np.diff(nodes)
    mid = slice(300, 600)
    assert np.allclose(w[mid], 0.5 * (spacing[:-1] + spacing[1:])[mid], rtol=5e-3)


def test_quadrature_polynomial_exactness():
    nodes, w = gauss_hermite_lebesgue(6)
    val = np.sum(w * nodes**4 * np.exp(-(nodes**2)))
    assert val == pytest.approx(1.32934038817913702, rel=1e-13)  # 3 sqrt(pi) / 4


def test_gaussian_l2_norm():
    nodes, w = gauss_hermite_lebesgue(32)
    val = math.sqrt(np.sum(w * np.exp(-2.0 * nodes**2)))
    assert val == pytest.approx((math.pi / 2.0) ** 0.25, rel=1e-12)


def test_orthonormality_moderate_order():
    m_max = 40
    nodes, w = gauss_hermite_lebesgue(2 * (m_max + 1))
    vals = hermite_values(m_max, nodes)
    gram = (vals * w) @ vals.T
    assert np.max(np.abs(gram - np.eye(m_max + 1))) < 1e-12


def test_orthonormality_large_order():
    m_max = 500
    nodes, w = gauss_hermite_lebesgue(2 * (m_max + 1) + 8)
    vals = hermite_values(m_max, nodes)
    gram = (vals * w) @ vals.T
    assert np.max(np.abs(gram - np.eye(m_max + 1))) < 1e-9


def test_eigen_relation_via_ladder_matrices():
    # -h'' + x^2 h = (2n+1) h, checked on the truncated operator matrices
    n = 24
    k = -derivative_matrix(n) @ derivative_matrix(n) + position_matrix(n) @ position_matrix(n)
    diag = np.diag(k)
    assert np.allclose(diag[: n - 1], 2.0 * np.arange(n - 1) + 1.0, atol=1e-13)
    off = k - np.diag(diag)
    # truncation touches only the top corner two entries
    off[: n - 2, : n - 2] = np.where(np.eye(n - 2, dtype=bool), 0.0, off[: n - 2, : n - 2])
    assert np.max(np.abs(off[: n - 2, : n - 2])) < 1e-13


def test_recurrence_matches_ladder_action():
    # x h_n = sqrt((n+1)/2) h_{n+1} + sqrt(n/2) h_{n-1} at sample points
    x = np.linspace(-3.0, 3.0, 13)
    vals = hermite_values(12, x)
    for n in range(1, 11):
        lhs = x * vals[n]
        rhs = math.sqrt((n + 1) / 2.0) * vals[n + 1] + math.sqrt(n / 2.0) * vals[n - 1]
        assert np.allclose(lhs, rhs, atol=1e-13)


def test_multi_index_counts():
    assert multi_indices(3, 1) == [(3,)]
    assert multi_indices(3, 2) == [(0, 3), (1, 2), (2, 1), (3, 0)]
    assert multiplicity(3, 2) == 4
    assert multiplicity(3, 3) == 10
    for d1 in (1, 2, 3):
        for m in range(7):
            idx = multi_indices(m, d1)
            assert len(idx) == multiplicity(m, d1)
            assert all(sum(a) == m for a in idx)
            assert idx == sorted(idx)


def test_eval_scaled_frozen_values():
    # |eta|^{1/4} h_0(0) at eta = 4
    assert eval_scaled(0.0, 0, 0, 4.0) == pytest.approx(1.062251932027196914, rel=1e-13)
    assert eval_scaled(0.7, 3, 0, 2.5) == pytest.approx(-0.1799128860581331567, rel=1e-12)
    # vector frequency: only |eta| enters
    assert eval_scaled(0.0, 0, 0, np.array([0.0, 4.0])) == pytest.approx(
        eval_scaled(0.0, 0, 0, 4.0), rel=1e-14
    )


def test_eval_scaled_rejects_zero_frequency():
    with pytest.raises(ConfigError, match="degenerate frequency"):
        eval_scaled(0.3, 1, 0, 0.0)


def test_eval_scaled_tensor_product():
    # d1 = 2: product structure against 1d evaluations
    pt = np.array([[0.4, -1.1]])
    val = eval_scaled(pt, 3, 1, 2.0, d1=2)
    alpha = multi_indices(3, 2)[1]
    ref = 2.0**0.5  # |eta|^{2/4}
    for j, a in enumerate(alpha):
        ref *= hermite_function(a, np.array([math.sqrt(2.0) * pt[0, j]]))[0]
    assert val == pytest.approx(ref, rel=1e-13)


def test_basis_quad_order_guard():
    with pytest.raises(QuadratureError, match="quadrature underresolved"):
        HermiteBasis(1, 10, quad_order=21)
    b = HermiteBasis(1, 10)
    assert b.quad_order == 44
    assert b.n_modes == 11
    b2 = HermiteBasis(2, 3)
    assert b2.n_modes == 1 + 2 + 3 + 4


def test_basis_axis_matrix_orthonormal_across_scales():
    b = HermiteBasis(1, 8, quad_order=72)
    for eta_eff in [0.6, 1.0, 2.0]:
        p = b.axis_matrix(eta_eff)
        gram = (p * b.weights[:, None]).T @ p
        assert np.max(np.abs(gram - np.eye(9))) < 1e-12


@settings(max_examples=20, deadline=None)
@given(m=st.integers(min_value=0, max_value=9), d1=st.integers(min_value=1, max_value=3))
def test_multiplicity_pascal_identity(m, d1):
    # stacking degrees reproduces the simplex count
    total = sum(multiplicity(j, d1) for j in range(m + 1))
    assert total == multiplicity(m, d1 + 1)
