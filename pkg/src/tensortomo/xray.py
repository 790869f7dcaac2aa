"""Geodesic X-ray transform, parallel-beam Radon transform and stability ratios.

Fourier conventions are unitary throughout::

    h~(sigma) = (2 pi)^{-1/2} int exp(-i s sigma) h(s) ds
    f^(xi)    = (2 pi)^{-1}   int exp(-i x.xi) f(x) dx

so that the slice theorem reads ``(Rf)~(sigma, v) = (2 pi)^{1/2} f^(sigma v)``
and ``||f||^2 = (4 pi)^{-1} int int |(Rf)~(sigma, v)|^2 |sigma| dsigma dv``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .boundary_calculus import BoundaryFunction, extend_zero, hs_t_norm
from .geometry import BoundaryChart, MetricDisc, trace_rays
from .grid import DiscGrid
from .tensor_fields import (AnalyticTensor, SymTensorField, contract, norm,
                            solenoidal_decompose)

__all__ = [
    "FanBeamLattice",
    "Sinogram",
    "xray_transform",
    "ParallelGrid",
    "radon_parallel",
    "fourier_transform_2d",
    "fourier_slice_residual",
    "radon_sharp_identity",
    "StabilityRecord",
    "stability_ratio",
    "stability_ratios",
    "GLANCING_GUARD",
]

GLANCING_GUARD = 0.02


class FanBeamLattice:
    """Boundary lattice ``(s_i, theta_j)`` with the fan-beam angle of every node.

    ``s`` is uniform in ``g``-arclength and ``theta`` (the global direction
    angle) is uniform on the circle.  The fan-beam angle is
    ``alpha = psi(s) + pi - theta`` wrapped to ``(-pi, pi]``; nodes with
    ``|alpha| < pi/2 - guard`` are traced, all others are treated as zero.
    """

    def __init__(self, metric: MetricDisc, n_s: int, n_theta: int, guard: float = GLANCING_GUARD):
        self.metric = metric
        self.chart = BoundaryChart(metric)
        self.n_s, self.n_theta, self.guard = int(n_s), int(n_theta), float(guard)
        self.uniform = True
        s = self.chart.length * np.arange(self.n_s) / self.n_s
        self._setup(s, self.chart.psi_of_s(s), 2 * np.pi * np.arange(self.n_theta) / self.n_theta)

    @classmethod
    def at_boundary_nodes(cls, metric: MetricDisc, psi, theta, guard: float = GLANCING_GUARD):
        """Lattice on given polar angles ``psi`` of boundary points and directions ``theta``.

        Such lattices are for pointwise comparisons only; norms need the
        uniform arclength lattice.
        """
        self = cls.__new__(cls)
        self.metric = metric
        self.chart = BoundaryChart(metric)
        psi = np.asarray(psi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        self.n_s, self.n_theta, self.guard = psi.size, theta.size, float(guard)
        self.uniform = False
        self._setup(self.chart.s_of_psi(psi), psi, theta)
        return self

    def _setup(self, s, psi, theta):
        self.s, self.psi, self.theta = s, psi, theta
        S, TH = np.meshgrid(s, theta, indexing="ij")
        PSI = np.broadcast_to(psi[:, None], S.shape)
        self.alpha = np.mod(PSI + np.pi - TH + np.pi, 2 * np.pi) - np.pi
        self.mu = -np.cos(self.alpha)
        self.traced = np.abs(self.alpha) < np.pi / 2 - self.guard
        self.x = self.metric.radius * np.cos(PSI)
        self.y = self.metric.radius * np.sin(PSI)
        self.TH = TH

    @property
    def length(self) -> float:
        return self.chart.length

    @property
    def shape(self) -> tuple:
        return (self.n_s, self.n_theta)

    def key(self) -> dict:
        return {"n_s": self.n_s, "n_theta": self.n_theta, "guard": self.guard}


@dataclass
class Sinogram:
    """``I_m f`` on a :class:`FanBeamLattice`; zero off the traced nodes."""

    values: np.ndarray
    lattice: FanBeamLattice
    m: int
    metric_hash: str
    meta: dict = field(default_factory=dict)

    def extend_zero(self) -> BoundaryFunction:
        if not self.lattice.uniform:
            raise ValueError("boundary functions need the uniform arclength lattice")
        return extend_zero(self.values, self.lattice.traced, self.lattice.length)

    def incoming_l2(self) -> float:
        """``L^2`` norm over the incoming set with ``ds dtheta``."""
        return self.extend_zero().l2_norm()


def _pointwise(field_):
    if isinstance(field_, SymTensorField):
        return field_.evaluate, field_.m
    if isinstance(field_, AnalyticTensor):
        return field_, field_.m
    raise TypeError("expected SymTensorField or AnalyticTensor")


def xray_transform(metric: MetricDisc, fields, lattice: FanBeamLattice, step: float = 0.01):
    """Geodesic X-ray transform of one field or a list of fields.

    All fields share a single ray trace; each contributes one running
    integral to the RK4 state.

    Returns
    -------
    Sinogram or list of Sinogram
    """
    single = not isinstance(fields, (list, tuple))
    flist = [fields] if single else list(fields)
    evals = [_pointwise(f) for f in flist]

    def integrand(x, y, th):
        inv = np.exp(-metric.phi(x, y))
        return np.stack([contract(ev(x, y), metric, x, y, th, inv) for ev, _ in evals])

    mask = lattice.traced
    res = trace_rays(metric, lattice.x[mask], lattice.y[mask], lattice.TH[mask], step,
                     integrand=integrand)
    out = []
    for i, (_, m) in enumerate(evals):
        vals = np.zeros(lattice.shape)
        vals[mask] = res.integrals[i]
        out.append(Sinogram(vals, lattice, m, metric.hash(), {"step": step, **lattice.key()}))
    return out[0] if single else out


# -- parallel beam ---------------------------------------------------------
@dataclass
class ParallelGrid:
    """``n x n`` cell-centred grid on ``[-a, a]^2``."""

    n: int
    half_width: float

    @property
    def h(self) -> float:
        return 2 * self.half_width / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.h * (np.arange(self.n) + 0.5)

    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def sample(self, func) -> np.ndarray:
        X, Y = self.mesh()
        return np.asarray(func(X, Y), dtype=float)


def radon_parallel(f, grid: ParallelGrid, n_angles: int, n_s: int | None = None,
                   spline_order: int = 5):
    """Parallel-beam transform ``Rf(s, v) = int f(s v + t v_perp) dt``.

    Parameters
    ----------
    f : array (n, n) or callable
        Grid samples (interpolated with a spline of ``spline_order``) or a
        function ``f(x, y)`` evaluated directly on the quadrature nodes.
    n_angles : int
        Angles ``phi_j = 2 pi j / n_angles``, ``v = (cos phi, sin phi)``.

    Returns
    -------
    s, phi, values : arrays, ``values`` of shape ``(n_s, n_angles)``
    """
    a = grid.half_width
    n_s = n_s or grid.n
    ds = 2 * a / n_s
    s = -a + ds * (np.arange(n_s) + 0.5)
    t = s.copy()
    phi = 2 * np.pi * np.arange(n_angles) / n_angles
    if callable(f):
        sampler = f
    else:
        coeffs = ndimage.spline_filter(np.asarray(f, dtype=float), order=spline_order, mode="constant")

        def sampler(x, y):
            idx = (np.stack([x, y]) + a) / grid.h - 0.5
            return ndimage.map_coordinates(coeffs, idx.reshape(2, -1), order=spline_order,
                                           mode="constant", cval=0.0, prefilter=False).reshape(x.shape)
    out = np.empty((n_s, n_angles))
    for j, ang in enumerate(phi):
        c, sn = np.cos(ang), np.sin(ang)
        X = s[:, None] * c - t[None, :] * sn
        Y = s[:, None] * sn + t[None, :] * c
        out[:, j] = sampler(X, Y).sum(axis=1) * ds
    return s, phi, out


def fourier_transform_2d(values: np.ndarray, grid: ParallelGrid, xi1, xi2) -> np.ndarray:
    """Unitary 2D transform at arbitrary frequencies by separable quadrature."""
    ax = grid.axis
    xi1 = np.asarray(xi1, dtype=float).ravel()
    xi2 = np.asarray(xi2, dtype=float).ravel()
    ex = np.exp(-1j * np.outer(xi1, ax))
    ey = np.exp(-1j * np.outer(xi2, ax))
    return np.sum((ex @ values) * ey, axis=1) * grid.h ** 2 / (2 * np.pi)


def _radon_spectrum(s, rf, pad: int):
    """``(Rf)~(sigma, v)`` on the zero-padded FFT frequency lattice."""
    n_s = s.size
    ds = s[1] - s[0]
    n_pad = pad * n_s
    spec = np.fft.fft(rf, n=n_pad, axis=0)
    sigma = 2 * np.pi * np.fft.fftfreq(n_pad, ds)
    phase = np.exp(-1j * sigma * s[0])
    return sigma, spec * phase[:, None] * ds / np.sqrt(2 * np.pi)


def fourier_slice_residual(f_values: np.ndarray, grid: ParallelGrid, s, phi, rf,
                           n_sigma: int = 48, sigma_max: float | None = None) -> float:
    """``max |(Rf)~(sigma, v) - (2 pi)^{1/2} f^(sigma v)| / max |f^|`` over sampled ``(sigma, v)``.

    The 1D transform of each projection is evaluated by direct quadrature at
    ``n_sigma`` frequencies in ``[-sigma_max, sigma_max]``; the 2D transform of
    ``f`` is computed independently from the grid samples.
    """
    if not np.any(f_values):
        return 0.0
    sigma_max = sigma_max if sigma_max is not None else 0.5 * np.pi / grid.h
    sig = np.linspace(-sigma_max, sigma_max, n_sigma)
    ds = s[1] - s[0]
    e = np.exp(-1j * np.outer(sig, s)) * ds / np.sqrt(2 * np.pi)
    lhs = e @ rf  # (n_sigma, n_angles)
    XI1 = np.outer(sig, np.cos(phi))
    XI2 = np.outer(sig, np.sin(phi))
    fhat = fourier_transform_2d(f_values, grid, XI1, XI2).reshape(lhs.shape)
    scale = np.max(np.abs(fourier_transform_2d(f_values, grid, [0.0], [0.0])))
    scale = max(scale, np.max(np.abs(fhat)))
    return float(np.max(np.abs(lhs - np.sqrt(2 * np.pi) * fhat)) / scale)


def radon_sharp_identity(f_values: np.ndarray, grid: ParallelGrid, n_angles: int = 64,
                         pad: int = 8, rf=None) -> dict:
    """Both sides of ``||f||^2 = (4 pi)^{-1} int int |(Rf)~|^2 |sigma|``.

    The ``sigma`` integral uses the trapezoid rule on the padded FFT lattice
    plus the leading Euler-Maclaurin correction for the kink of ``|sigma|`` at
    zero.  Also reports the half-order right-hand side
    ``(4 pi)^{-1} int int |(Rf)~|^2 (1 + sigma^2)^{1/2}`` and its margin over
    the left-hand side.
    """
    if rf is None:
        s, phi, rf = radon_parallel(f_values, grid, n_angles)
    else:
        s, phi, rf = rf
    lhs = float(np.sum(f_values ** 2) * grid.h ** 2)
    if lhs == 0.0:
        return {"lhs": 0.0, "rhs": 0.0, "rhs_half": 0.0, "relative_gap": 0.0, "margin": 0.0}
    sigma, spec = _radon_spectrum(s, rf, pad)
    dsig = sigma[1] - sigma[0]
    dphi = 2 * np.pi / phi.size
    power = np.abs(spec) ** 2
    trap = np.sum(power * np.abs(sigma)[:, None], axis=0) * dsig
    # trapezoid minus integral is -(dsig^2 / 6) g(0) for g |sigma| with g even
    correction = dsig ** 2 / 6 * power[0]
    rhs = float(np.sum(trap + correction) * dphi / (4 * np.pi))
    half = float(np.sum(power * np.sqrt(1 + sigma ** 2)[:, None]) * dsig * dphi / (4 * np.pi))
    return {
        "lhs": lhs,
        "rhs": rhs,
        "rhs_half": half,
        "relative_gap": abs(lhs - rhs) / lhs,
        "margin": half - lhs,
    }


# -- stability -------------------------------------------------------------
@dataclass
class StabilityRecord:
    """``num = ||f_s||``, ``den = ||E_0 I_m f||_{H^{1/2}_T}`` and their ratio."""

    num: float
    den: float
    ratio: float | None
    flag: str
    m: int
    metric: str

    def as_dict(self) -> dict:
        return asdict(self)


def _classify(num: float, den: float, f_norm: float, pot_tol: float, m: int, metric_hash: str):
    if num <= pot_tol * max(f_norm, np.finfo(float).tiny):
        return StabilityRecord(num, den, None, "pure potential", m, metric_hash)
    if den < 1e-12 * max(f_norm, 1.0):
        return StabilityRecord(num, den, None, "violation", m, metric_hash)
    ratio = num / den
    flag = "ok" if np.isfinite(ratio) else "violation"
    return StabilityRecord(num, den, float(ratio), flag, m, metric_hash)


def stability_ratios(metric: MetricDisc, fields, grid: DiscGrid, lattice: FanBeamLattice,
                     step: float = 0.01, pot_tol: float = 1e-4, degree: int = 20) -> list:
    """:class:`StabilityRecord` for every field, sharing one ray trace.

    ``fields`` are :class:`AnalyticTensor` or :class:`SymTensorField`
    instances of equal rank.  ``f_s`` comes from
    :func:`~tensortomo.tensor_fields.solenoidal_decompose` on ``grid``.
    """
    grid_fields = [f if isinstance(f, SymTensorField) else SymTensorField.from_analytic(grid, f)
                   for f in fields]
    sinos = xray_transform(metric, grid_fields, lattice, step)
    out = []
    for f, sino in zip(grid_fields, sinos):
        fs, _, _ = solenoidal_decompose(f, metric, degree=degree)
        num = norm(fs, metric)
        den = hs_t_norm(sino.extend_zero(), 0.5)
        out.append(_classify(num, den, norm(f, metric), pot_tol, f.m, metric.hash()))
    return out


def stability_ratio(metric: MetricDisc, f, grid: DiscGrid, lattice: FanBeamLattice,
                    step: float = 0.01, pot_tol: float = 1e-4) -> StabilityRecord:
    """Single-field version of :func:`stability_ratios`."""
    return stability_ratios(metric, [f], grid, lattice, step, pot_tol)[0]
