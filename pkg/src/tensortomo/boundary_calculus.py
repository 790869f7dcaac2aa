"""Functions on the boundary of the unit circle bundle.

A :class:`BoundaryFunction` lives on a uniform periodic lattice in the
boundary ``g``-arclength ``s`` (period ``L``) and the global direction angle
``theta`` (period ``2 pi``).  Both directions are handled spectrally.

The horizontal lift of the unit boundary tangent acts as::

    T u = d_s u + c(s) d_theta u,      c(s) = -exp(-phi) d_r phi

(``c = 0`` on the Euclidean disc).  Since ``c`` does not depend on
``theta``, ``T`` commutes with the fiber Fourier decomposition, which makes
the bilinear form ``P`` and the ``H^1_T`` norm split over fiber modes.

Half-order norms use the Fourier multiplier ``(1 + k_s^2)^{+-1/4}`` in the
arclength variable at each fixed fiber angle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coeffs
from .geometry import BoundaryChart, MetricDisc

__all__ = [
    "BoundaryFunction",
    "tangential_T",
    "p_form",
    "apply_B",
    "h1t_norm",
    "hs_t_norm",
    "extend_zero",
    "h_half_inequality_check",
    "KEY_INEQUALITY_SLACK",
    "random_boundary_function",
]

#: Frozen slack for the sampled key inequality; see ``calibration/key_inequality.json``.
KEY_INEQUALITY_SLACK = 1.0


@dataclass
class BoundaryFunction:
    """Real samples ``u(s_i, theta_j)`` on ``[0, L) x [0, 2 pi)``.

    Attributes
    ----------
    values : ndarray, shape (n_s, n_theta)
    length : float
        ``g``-length ``L`` of the boundary circle.
    """

    values: np.ndarray
    length: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("boundary values must be a 2-D (s, theta) array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary values must be finite")

    @property
    def n_s(self) -> int:
        return self.values.shape[0]

    @property
    def n_theta(self) -> int:
        return self.values.shape[1]

    @property
    def s(self) -> np.ndarray:
        return self.length * np.arange(self.n_s) / self.n_s

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def cell(self) -> float:
        """Quadrature weight ``ds dtheta`` of one lattice cell."""
        return self.length / self.n_s * 2 * np.pi / self.n_theta

    @classmethod
    def from_callable(cls, func, length: float, n_s: int, n_theta: int) -> "BoundaryFunction":
        s = length * np.arange(n_s) / n_s
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        S, TH = np.meshgrid(s, th, indexing="ij")
        return cls(np.asarray(func(S, TH), dtype=float), length)

    def like(self, values) -> "BoundaryFunction":
        return BoundaryFunction(values, self.length)

    def inner(self, other: "BoundaryFunction") -> float:
        """``L^2(dSM)`` product with the measure ``ds_g dtheta``."""
        return float(np.sum(self.values * other.values) * self.cell)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def fiber_modes(self) -> np.ndarray:
        """Fiber Fourier coefficients ``u_k(s)``, axis 1 in ``np.fft`` order."""
        return np.fft.fft(self.values, axis=1) / self.n_theta

    def fiber_degree(self, k: int) -> "BoundaryFunction":
        """Projection onto fiber degree ``|k|`` (modes ``+-k``)."""
        kk = np.abs(np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)).astype(int)
        spec = np.fft.fft(self.values, axis=1)
        spec[:, kk != abs(k)] = 0
        return self.like(np.real(np.fft.ifft(spec, axis=1)))

    def d_s(self) -> np.ndarray:
        k = 2 * np.pi * np.fft.fftfreq(self.n_s, self.length / self.n_s)
        if self.n_s % 2 == 0:
            k[self.n_s // 2] = 0.0
        return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(self.values, axis=0), axis=0))

    def d_theta(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)
        if self.n_theta % 2 == 0:
            k[self.n_theta // 2] = 0.0
        return np.real(np.fft.ifft(1j * k[None, :] * np.fft.fft(self.values, axis=1), axis=1))

    def resample_s(self, n_s: int) -> "BoundaryFunction":
        """Trigonometric interpolation to ``n_s`` uniform arclength nodes."""
        spec = np.fft.rfft(self.values, axis=0)
        return self.like(np.fft.irfft(spec, n=n_s, axis=0) * n_s / self.n_s)


def _torsion(metric: MetricDisc | None, u: BoundaryFunction) -> np.ndarray:
    if metric is None:
        return np.zeros(u.n_s)
    return BoundaryChart(metric).torsion_coefficient(u.s)


def tangential_T(metric: MetricDisc | None, u: BoundaryFunction) -> BoundaryFunction:
    """Scalar representative ``T u = d_s u + c(s) d_theta u``.

    ``metric=None`` means the Euclidean disc (``c = 0``).
    """
    c_s = _torsion(metric, u)
    return u.like(u.d_s() + c_s[:, None] * u.d_theta())


def p_form(metric: MetricDisc | None, u: BoundaryFunction, w: BoundaryFunction) -> float:
    """Boundary form ``P(u, w) = (T u, V w)`` on ``dSM``."""
    return float(np.sum(tangential_T(metric, u).values * w.d_theta()) * u.cell)


def apply_B(m: int, d: int, u: BoundaryFunction) -> BoundaryFunction:
    """Multiply fiber degree ``m + l`` by ``b(d, m, l)``; degrees below ``m`` are removed."""
    if m < 1:
        raise ValueError("B is defined for m >= 1")
    n = u.n_theta
    kk = np.abs(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    table = coeffs.CoeffContext(d, m).b_table(max(int(kk.max()) - m, 0))
    mult = np.array([table[k - m] if k >= m else 0.0 for k in kk])
    if n % 2 == 0:
        mult[n // 2] = 0.0  # unpaired Nyquist mode
    spec = np.fft.fft(u.values, axis=1) * mult[None, :]
    return u.like(np.real(np.fft.ifft(spec, axis=1)))


def h1t_norm(metric: MetricDisc | None, u: BoundaryFunction) -> float:
    """Squared norm ``||u||^2 + ||T u||^2`` on ``dSM``."""
    tu = tangential_T(metric, u)
    return u.inner(u) + tu.inner(tu)


def _s_frequencies(u: BoundaryFunction) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(u.n_s, u.length / u.n_s)


def hs_t_norm(u: BoundaryFunction, exponent: float = 0.5) -> float:
    """Multiplier norm ``||(1 + k_s^2)^{exponent/2} u_hat||`` with ``k_s = 2 pi n / L``.

    Only ``exponent`` in ``{+1/2, -1/2}`` is meaningful here, but any real
    exponent is accepted.
    """
    k = _s_frequencies(u)
    spec = np.fft.fft(u.values, axis=0)
    weight = (1 + k * k) ** (exponent / 2)
    energy = np.sum((weight[:, None] * np.abs(spec)) ** 2) / u.n_s
    return float(np.sqrt(energy * u.cell))


def extend_zero(values, incoming_mask, length: float) -> BoundaryFunction:
    """Extension by zero from the incoming set.

    Parameters
    ----------
    values : array (n_s, n_theta)
        Samples; only entries with ``incoming_mask`` are used.
    incoming_mask : bool array (n_s, n_theta)
        Nodes with ``mu <= 0``.
    """
    values = np.asarray(values, dtype=float)
    mask = np.asarray(incoming_mask, dtype=bool)
    return BoundaryFunction(np.where(mask, values, 0.0), length)


def h_half_inequality_check(metric: MetricDisc | None, m: int, u: BoundaryFunction, d: int = 2):
    """Return ``(|(T u, V B u)|, ||u||^2_{H^{1/2}_T})``."""
    if d != 2:
        raise ValueError("the boundary lattice is two-dimensional; only d = 2 is supported")
    bu = apply_B(m, d, u)
    lhs = abs(p_form(metric, u, bu))
    rhs = hs_t_norm(u, 0.5) ** 2
    return lhs, rhs


def random_boundary_function(rng: np.random.Generator, length: float, n_s: int = 64,
                             n_theta: int = 64, max_s_freq: int = 8, max_degree: int = 8,
                             decay: float = 1.5) -> BoundaryFunction:
    """Seeded smooth trigonometric polynomial on ``dSM``.

    Coefficients of ``exp(i (2 pi n s / L + k theta))`` are complex normal
    with standard deviation ``(1 + |n| + |k|)^-decay``; the real part is kept.
    """
    if max_s_freq >= n_s // 2 or max_degree >= n_theta // 2:
        raise ValueError("lattice too coarse for the requested frequencies")
    n = np.arange(-max_s_freq, max_s_freq + 1)
    k = np.arange(-max_degree, max_degree + 1)
    amp = (1.0 + np.abs(n)[:, None] + np.abs(k)[None, :]) ** (-decay)
    c = (rng.normal(size=amp.shape) + 1j * rng.normal(size=amp.shape)) * amp
    s = length * np.arange(n_s) / n_s
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    es = np.exp(2j * np.pi * np.outer(s, n) / length)
    et = np.exp(1j * np.outer(k, th))
    return BoundaryFunction(np.real(es @ c @ et), length)
