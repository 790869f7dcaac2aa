from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from tensortomo import coeffs

dims = st.integers(min_value=2, max_value=12)
degrees = st.integers(min_value=1, max_value=400)


def test_alpha_worked_values():
    # (2l+d-2)(l+d-1)/(l+d-2) at d=3, l=2 is 5*4/3
    assert coeffs.alpha(3, 2, exact=True) == Fraction(20, 3)
    assert coeffs.alpha(2, 0) == 1.0
    assert coeffs.alpha(2, -1) == 0.0
    for l in range(1, 8):
        assert coeffs.alpha(2, l, exact=True) == 2 * (l + 1)
        assert coeffs.beta(2, l + 1, exact=True) == 2 * l


def test_lambda_values():
    assert coeffs.lam(2, 3) == 9.0
    assert coeffs.lam(3, 2) == 6.0
    assert coeffs.lam(5, 0) == 0.0


@given(dims, degrees)
def test_alpha_closed_form_exact(d, l):
    assert coeffs.alpha(d, l, exact=True) == coeffs.alpha_closed_form(d, l, exact=True)


@given(dims, degrees)
def test_miraculous_identity_is_exact(d, l):
    assert coeffs.miraculous_identity_residual(d, l, exact=True) == 0


@given(dims, degrees)
def test_beta_factored_form(d, l):
    assert coeffs.beta(d, l, exact=True) == Fraction((2 * l + d - 2) * (l - 1), l)


@given(dims, st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=40))
@settings(max_examples=60)
def test_gamma_bounded_by_c(d, m, j):
    assert coeffs.gamma(d, m, j) <= coeffs.c(d) * (1 + 1e-12)


@given(dims, st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=60))
@settings(max_examples=60)
def test_b_table_matches_scalar_and_bound(d, m, k):
    table = coeffs.CoeffContext(d, m).b_table(k)
    assert table[k] == pytest.approx(coeffs.b(d, m, k), rel=1e-13)
    assert coeffs.lam(d, m + k) * table[k] ** 2 <= 1 + 1e-12


def test_b_table_exact_small():
    ctx = coeffs.CoeffContext(3, 2, exact=True)
    table = ctx.b_table(6)
    assert all(isinstance(v, Fraction) for v in table)
    assert table == [coeffs.b(3, 2, k, exact=True) for k in range(7)]


@pytest.mark.parametrize("d,cap", [(2, Fraction(1, 4)), (3, Fraction(1, 3)), (4, Fraction(1, 3)),
                                   (5, Fraction(1, 3)), (6, Fraction(1, 4)), (9, Fraction(1, 4))])
def test_case_bounds_exact(d, cap):
    for k in range(2, 200):
        assert coeffs.lam(d, k, exact=True) / coeffs.alpha(d, k - 1, exact=True) ** 2 <= cap


def test_d2_sequence_is_sharp():
    # the even b sequence attains lambda b^2 = 1 for d = 2
    table = coeffs.CoeffContext(2, 1).b_table(4000)
    assert coeffs.lam(2, 1 + 4000) * table[4000] ** 2 == pytest.approx(1.0, rel=1e-12)


def test_identity_suite_small_residuals():
    out = coeffs.identity_suite(4, 2000, k_max=2000)
    for key in ("alpha_closed_form", "beta", "miraculous", "d_squared"):
        assert out[key] < 1e-13
    assert out["gamma_excess"] <= 1e-12
    assert out["lambda_b2_excess"] <= 1e-12
    assert out["case_bound_excess"] <= 1e-12


@pytest.mark.parametrize("call", [
    lambda: coeffs.lam(1, 2),
    lambda: coeffs.alpha(2, -2),
    lambda: coeffs.beta(3, 0),
    lambda: coeffs.d_squared(3, 0),
    lambda: coeffs.b(3, 0, 1),
    lambda: coeffs.gamma(3, 0, 1),
    lambda: coeffs.alpha_closed_form(3, 0),
    lambda: coeffs.CoeffContext(1),
])
def test_invalid_arguments(call):
    with pytest.raises(ValueError):
        call()


def test_c_values():
    assert coeffs.c(2) == 2.0
    assert coeffs.c(3) == 1.28
    assert coeffs.c(7) == 1.0


def test_tabulated_values():
    assert coeffs.lam(3, 1) == 2.0
    assert coeffs.alpha(2, 1) == 4.0
    assert [coeffs.beta(2, l) for l in (1, 2, 3)] == [0.0, 2.0, 4.0]
    assert coeffs.d_squared(2, 1) == pytest.approx(2.0)
    assert coeffs.d_squared(2, 2) == pytest.approx(1.0)
    assert coeffs.gamma(5, 3, 0) == 1.0
    assert coeffs.gamma(2, 1, 1) == pytest.approx(2.0)
    assert coeffs.gamma(4, 2, 50, exact=True) == 1
    assert coeffs.b(2, 1, 2, exact=True) == Fraction(1, 3)
    assert coeffs.b(2, 2, 1, exact=True) == Fraction(1, 6)
    assert abs(coeffs.miraculous_identity_residual(3, 1000)) <= 1e-12 * coeffs.lam(3, 1000)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_first_b_value(d):
    assert coeffs.b(d, 1, 0, exact=True) == Fraction(1, d - 1)
    assert coeffs.lam(d, 1, exact=True) * coeffs.b(d, 1, 0, exact=True) ** 2 == Fraction(1, d - 1)


def test_d_squared_at_most_one_from_four_dimensions():
    for d in (4, 5, 8):
        assert max(coeffs.d_squared(d, l, exact=True) for l in range(1, 101)) <= 1
