"""Coefficient sequences of the frequency-localized Pestov machinery.

Every function takes the dimension ``d`` explicitly and works for any
``d >= 2``.  Passing ``exact=True`` evaluates in rational arithmetic
(:class:`fractions.Fraction`), which turns the polynomial identities into
zero-residual oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "lam",
    "alpha",
    "alpha_closed_form",
    "beta",
    "miraculous_identity_residual",
    "d_squared",
    "gamma",
    "c",
    "b",
    "CoeffContext",
    "identity_suite",
]


def _check_d(d: int) -> None:
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")


def _num(value, exact: bool):
    return Fraction(value) if exact else float(value)


def lam(d: int, l: int, exact: bool = False):
    """Eigenvalue ``l(l+d-2)`` of the vertical Laplacian on degree-``l`` harmonics."""
    _check_d(d)
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    return _num(l * (l + d - 2), exact)


def alpha(d: int, l: int, exact: bool = False):
    """Weight multiplying ``||X_- u||^2`` in the Pestov identity.

    ``alpha(d, -1)`` is exactly zero by convention.  For ``l = 0`` the
    bracketed term is multiplied by ``lambda_0 = 0`` and the value is
    ``d - 1`` (this also covers ``d = 2`` where ``1/(l+d-2)`` is singular).
    """
    _check_d(d)
    if l < -1:
        raise ValueError(f"alpha is defined for l >= -1, got {l}")
    if l == -1:
        return _num(0, exact)
    if l == 0:
        return _num(d - 1, exact)
    one = Fraction(1) if exact else 1.0
    x = one / (l + d - 2)
    # (1 + x)^2 - 1 expanded to avoid cancellation at large l
    return lam(d, l, exact) * (2 * x + x * x) + (d - 1)


def alpha_closed_form(d: int, l: int, exact: bool = False):
    """``(2l+d-2)(l+d-1)/(l+d-2)``, valid for ``l >= 1``."""
    _check_d(d)
    if l < 1:
        raise ValueError("closed form holds for l >= 1")
    num = (2 * l + d - 2) * (l + d - 1)
    if exact:
        return Fraction(num, l + d - 2)
    return num / (l + d - 2)


def beta(d: int, l: int, exact: bool = False):
    """Weight multiplying ``||X_+ u||^2`` in the Pestov identity (``l >= 1``)."""
    _check_d(d)
    if l < 1:
        raise ValueError(f"beta needs l >= 1 (formula contains 1/l), got {l}")
    one = Fraction(1) if exact else 1.0
    y = one / l
    return lam(d, l, exact) * (2 * y - y * y) - (d - 1)


def miraculous_identity_residual(d: int, l: int, exact: bool = False):
    """``lambda_l (1-1/l)(1+1/(l+d-2)) - (lambda_l - (d-1))``; zero for all valid inputs."""
    _check_d(d)
    if l < 1:
        raise ValueError("identity is stated for l >= 1")
    one = Fraction(1) if exact else 1.0
    lm = lam(d, l, exact)
    return lm * (one - one / l) * (one + one / (l + d - 2)) - (lm - (d - 1))


def d_squared(d: int, l: int, exact: bool = False):
    """``beta_{l+1} / alpha_{l-1}``."""
    _check_d(d)
    if l < 1:
        raise ValueError("d_squared needs l >= 1 (alpha_{-1} = 0)")
    return beta(d, l + 1, exact) / alpha(d, l - 1, exact)


def gamma(d: int, m: int, j: int, exact: bool = False):
    """Product ``prod_{k<j} D_d(m+2k)^2`` (empty product is 1)."""
    _check_d(d)
    if m < 1 or j < 0:
        raise ValueError("gamma needs m >= 1 and j >= 0")
    out = _num(1, exact)
    for k in range(j):
        out *= d_squared(d, m + 2 * k, exact)
    return out


def c(d: int):
    """Uniform upper bound for ``gamma(d, m, j)``."""
    _check_d(d)
    if d == 2:
        return 2.0
    if d == 3:
        return 1.28
    return 1.0


def b(d: int, m: int, k: int, exact: bool = False):
    """Multiplier of fiber degree ``m + k`` in the operator ``B_m``.

    Even ``k = 2j`` uses ``gamma(d, m, j) / alpha_{m-1+2j}``; odd ``k = 2j+1``
    uses ``gamma(d, m+1, j) / alpha_{m+2j}``.  ``m = 0`` is rejected: the
    degree-zero estimate uses the ``m = 1`` sequence, which callers must
    request explicitly.
    """
    _check_d(d)
    if m < 1:
        raise ValueError("b is defined for m >= 1; request m=1 for the degree-zero case")
    if k < 0:
        raise ValueError("k must be >= 0")
    j, odd = divmod(k, 2)
    if odd:
        return gamma(d, m + 1, j, exact) / alpha(d, m + 2 * j, exact)
    return gamma(d, m, j, exact) / alpha(d, m - 1 + 2 * j, exact)


@dataclass(frozen=True)
class CoeffContext:
    """Coefficient tables for a fixed dimension ``d`` and tensor degree ``m``.

    Values are memoised per instance.  ``b`` values are built incrementally
    from running products, so long tables stay linear in cost.
    """

    d: int
    m: int = 1
    exact: bool = False

    def __post_init__(self):
        _check_d(self.d)
        if self.m < 0:
            raise ValueError("m must be >= 0")

    def lam(self, l):
        return lam(self.d, l, self.exact)

    def alpha(self, l):
        return alpha(self.d, l, self.exact)

    def beta(self, l):
        return beta(self.d, l, self.exact)

    def d_squared(self, l):
        return d_squared(self.d, l, self.exact)

    def c(self):
        return c(self.d)

    def b_table(self, k_max: int) -> list:
        """``[b(d, m, k) for k in 0..k_max]`` computed with running products."""
        return list(_b_table(self.d, self.m, k_max, self.exact))


@lru_cache(maxsize=256)
def _b_table(d: int, m: int, k_max: int, exact: bool) -> tuple:
    if m < 1:
        raise ValueError("b is defined for m >= 1")
    out = []
    g_even = _num(1, exact)
    g_odd = _num(1, exact)
    for k in range(k_max + 1):
        j, odd = divmod(k, 2)
        if odd:
            if j > 0:
                g_odd *= d_squared(d, m + 1 + 2 * (j - 1), exact)
            out.append(g_odd / alpha(d, m + 2 * j, exact))
        else:
            if j > 0:
                g_even *= d_squared(d, m + 2 * (j - 1), exact)
            out.append(g_even / alpha(d, m - 1 + 2 * j, exact))
    return tuple(out)


def relative_gap(value, reference) -> float:
    """``|value - reference| / max(1, |reference|)`` as a float."""
    return abs(float(value) - float(reference)) / max(1.0, abs(float(reference)))


def is_close_rel(a, b_, rtol: float) -> bool:
    return math.isclose(float(a), float(b_), rel_tol=rtol, abs_tol=rtol)


def identity_suite(d: int, l_max: int, m_values=(1, 2, 3), k_max: int | None = None) -> dict:
    """Vectorised identity and bound residuals over ``l = 1..l_max``.

    The reference values come from the factored closed forms
    ``alpha_l = (2l+d-2)(l+d-1)/(l+d-2)`` and ``beta_l = (2l+d-2)(l-1)/l``
    rather than from the defining recursions, so comparing the two is a
    genuine check.  All entries are relative quantities; bound entries are
    the excess over the bound (``<= 0`` means satisfied).
    """
    _check_d(d)
    if l_max < 2:
        raise ValueError("l_max must be >= 2")
    k_max = l_max if k_max is None else k_max
    n = max(l_max, k_max) + 2 * max(m_values) + 4
    l = np.arange(n + 1, dtype=float)
    lam_ = l * (l + d - 2)
    alpha_ = np.empty_like(l)
    alpha_[0] = d - 1
    alpha_[1:] = (2 * l[1:] + d - 2) * (l[1:] + d - 1) / (l[1:] + d - 2)
    beta_ = np.zeros_like(l)
    beta_[1:] = (2 * l[1:] + d - 2) * (l[1:] - 1) / l[1:]
    dsq = np.zeros_like(l)
    dsq[1:-1] = beta_[2:] / alpha_[:-2]

    idx = np.arange(1, l_max + 1)
    a_rec = np.array([alpha(d, int(k)) for k in idx])
    b_rec = np.array([beta(d, int(k)) for k in idx])
    mir = np.array([miraculous_identity_residual(d, int(k)) for k in idx])
    d_rec = np.array([d_squared(d, int(k)) for k in idx])
    out = {
        "alpha_closed_form": float(np.max(np.abs(a_rec - alpha_[idx]) / alpha_[idx])),
        "beta": float(np.max(np.abs(b_rec - beta_[idx]) / np.maximum(beta_[idx], 1.0))),
        "miraculous": float(np.max(np.abs(mir) / np.maximum(lam_[idx], 1.0))),
        "d_squared": float(np.max(np.abs(d_rec - dsq[idx]) / dsq[idx])),
    }
    cap = 0.25 if d == 2 or d >= 6 else 1.0 / 3.0
    k = np.arange(2, l_max + 2)
    out["case_bound_excess"] = float(np.max(lam_[k] / alpha_[k - 1] ** 2 / cap - 1.0))

    gamma_excess = -np.inf
    lamb_excess = -np.inf
    for m in m_values:
        j = np.arange((k_max + 1) // 2 + 1)
        g_even = np.concatenate([[1.0], np.cumprod(dsq[m + 2 * j[:-1]])])
        g_odd = np.concatenate([[1.0], np.cumprod(dsq[m + 1 + 2 * j[:-1]])])
        gamma_excess = max(gamma_excess, float(np.max(np.r_[g_even, g_odd] / c(d) - 1.0)))
        kk = np.arange(k_max + 1)
        jj = kk // 2
        b_ref = np.where(kk % 2 == 1, g_odd[jj] / alpha_[m + 2 * jj],
                         g_even[jj] / alpha_[np.maximum(m - 1 + 2 * jj, 0)])
        table = np.asarray(_b_table(d, m, k_max, False))
        out[f"b_table_m{m}"] = float(np.max(np.abs(table - b_ref) / b_ref))
        lamb_excess = max(lamb_excess, float(np.max(lam_[m + kk] * table ** 2 - 1.0)))
    out["gamma_excess"] = gamma_excess
    out["lambda_b2_excess"] = lamb_excess
    return out
