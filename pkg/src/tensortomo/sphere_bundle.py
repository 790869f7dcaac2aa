"""Functions on the unit circle bundle of a conformal disc.

With ``v = exp(-phi) (cos theta, sin theta)`` the canonical frame is::

    X      = exp(-phi) ( cos theta d_x + sin theta d_y + (-phi_x sin theta + phi_y cos theta) d_theta)
    X_perp = exp(-phi) (-sin theta d_x + cos theta d_y - ( phi_x cos theta + phi_y sin theta) d_theta)
    V      = d_theta

with ``[V, X] = X_perp``, ``[V, X_perp] = -X`` and ``[X, X_perp] = K V``.
``L^2(SM)`` uses ``exp(2 phi) dx dy dtheta``.  Fiber harmonics of degree
``l`` are the modes ``exp(+-i l theta)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import coeffs
from .boundary_calculus import BoundaryFunction, p_form
from .geometry import BoundaryChart, MetricDisc, trace_rays
from .grid import DiscGrid
from .tensor_fields import SymTensorField, contract

__all__ = [
    "FiberFunction",
    "SpectralGuardError",
    "ModePurityError",
    "apply_X",
    "apply_X_perp",
    "apply_V",
    "split_X",
    "z_project",
    "solve_transport",
    "PestovReport",
    "LocalizedReport",
    "pestov_check",
    "pestov_localized_check",
    "cross_terms",
]


class SpectralGuardError(ValueError):
    """Too much energy in the upper half of the resolved fiber modes."""


class ModePurityError(ValueError):
    """Input was required to be a single fiber degree."""


class FiberFunction:
    """Real function on ``SM`` sampled on ``DiscGrid x theta_j``.

    ``values`` has shape ``(n_r + 1, n_psi, n_theta)`` and ``theta_j = 2 pi j / n_theta``.
    """

    def __init__(self, grid: DiscGrid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[:2] != grid.shape:
            raise ValueError(f"expected shape {grid.shape} + (n_theta,), got {values.shape}")
        self.grid = grid
        self.values = values

    @property
    def n_theta(self) -> int:
        return self.values.shape[2]

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @classmethod
    def from_callable(cls, grid: DiscGrid, func, n_theta: int) -> "FiberFunction":
        """Sample ``func(x, y, theta)`` on every node."""
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        vals = func(grid.x[..., None], grid.y[..., None], th[None, None, :])
        return cls(grid, np.broadcast_to(vals, grid.shape + (n_theta,)).astype(float))

    def like(self, values) -> "FiberFunction":
        return FiberFunction(self.grid, values)

    def __add__(self, other):
        return self.like(self.values + other.values)

    def __sub__(self, other):
        return self.like(self.values - other.values)

    def __mul__(self, scalar):
        return self.like(self.values * scalar)

    __rmul__ = __mul__

    # -- fiber Fourier access -------------------------------------------
    def modes(self) -> np.ndarray:
        """Complex coefficients ``u_k(x)`` in ``np.fft`` order along the last axis."""
        return np.fft.fft(self.values, axis=-1) / self.n_theta

    def _degrees(self) -> np.ndarray:
        return np.abs(np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)).astype(int)

    def degree(self, l: int) -> "FiberFunction":
        """Projection onto fiber degree ``l`` (modes ``+-l``)."""
        spec = np.fft.fft(self.values, axis=-1)
        spec[..., self._degrees() != abs(l)] = 0
        return self.like(np.real(np.fft.ifft(spec, axis=-1)))

    def degree_energy(self) -> np.ndarray:
        """Energy per fiber degree, indexed ``0 .. n_theta/2``."""
        spec = np.abs(np.fft.fft(self.values, axis=-1)) ** 2
        per_mode = self.grid.integrate(spec) / self.n_theta
        return np.bincount(self._degrees(), weights=per_mode)

    def guard_fraction(self) -> float:
        """Fraction of energy carried by degrees above ``n_theta / 4``."""
        e = self.degree_energy()
        total = e.sum()
        return float(e[self.n_theta // 4 + 1:].sum() / total) if total > 0 else 0.0

    def check_guard(self, tol: float = 1e-8) -> None:
        frac = self.guard_fraction()
        if frac >= tol:
            raise SpectralGuardError(f"{frac:.2e} of the energy sits above degree {self.n_theta // 4}")

    def pure_degree(self, tol: float = 1e-12) -> int:
        """Return ``l`` if all energy lies in degree ``l``; raise otherwise."""
        e = self.degree_energy()
        total = e.sum()
        if total == 0:
            return 0
        l = int(np.argmax(e))
        if (total - e[l]) > tol * total:
            raise ModePurityError(f"energy outside degree {l}: {(total - e[l]) / total:.2e}")
        return l

    # -- quadrature ------------------------------------------------------
    def inner(self, other: "FiberFunction", metric: MetricDisc) -> float:
        """``L^2(SM)`` product."""
        dens = np.exp(2 * metric.phi(self.grid.x, self.grid.y))
        fib = np.sum(self.values * other.values, axis=-1) * (2 * np.pi / self.n_theta)
        return float(self.grid.integrate(fib, dens))

    def norm_sq(self, metric: MetricDisc) -> float:
        return self.inner(self, metric)

    def boundary_trace(self, metric: MetricDisc, n_s: int | None = None) -> BoundaryFunction:
        """Restriction to ``dSM`` resampled to uniform ``g``-arclength nodes."""
        ring = self.values[-1]
        n_psi = ring.shape[0]
        n_s = n_s or n_psi
        chart = BoundaryChart(metric)
        s = chart.length * np.arange(n_s) / n_s
        psi = chart.psi_of_s(s)
        spec = np.fft.fft(ring, axis=0) / n_psi
        k = np.fft.fftfreq(n_psi, 1.0 / n_psi)
        if n_psi % 2 == 0:
            spec[n_psi // 2] *= 0.0
        basis = np.exp(1j * np.outer(psi, k))
        return BoundaryFunction(np.real(basis @ spec), chart.length)


def _vertical(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.real(np.fft.ifft(1j * k * np.fft.fft(values, axis=-1), axis=-1))


def _frame_terms(metric: MetricDisc, u: FiberFunction):
    g = u.grid
    th = u.theta[None, None, :]
    x, y = g.x[..., None], g.y[..., None]
    e = np.exp(-metric.phi(x, y))
    px, py = metric.grad_phi(x, y)
    ux, uy = g.gradient(u.values)
    ut = _vertical(u.values)
    return e, np.cos(th), np.sin(th), px, py, ux, uy, ut


def apply_X(metric: MetricDisc, u: FiberFunction) -> FiberFunction:
    """Geodesic vector field."""
    e, c, s, px, py, ux, uy, ut = _frame_terms(metric, u)
    return u.like(e * (c * ux + s * uy + (-px * s + py * c) * ut))


def apply_X_perp(metric: MetricDisc, u: FiberFunction) -> FiberFunction:
    """Horizontal field ``X_perp = [V, X]``."""
    e, c, s, px, py, ux, uy, ut = _frame_terms(metric, u)
    return u.like(e * (-s * ux + c * uy - (px * c + py * s) * ut))


def apply_V(u: FiberFunction) -> FiberFunction:
    """Vertical derivative ``d_theta`` (spectral)."""
    return u.like(_vertical(u.values))


def split_X(metric: MetricDisc, u: FiberFunction, tol: float = 1e-12):
    """``(X_+ u, X_- u)`` for ``u`` of a single fiber degree ``l``.

    ``X_+ u`` is the degree ``l + 1`` part of ``X u`` and ``X_- u`` the
    degree ``l - 1`` part (zero when ``l = 0``).

    Raises
    ------
    ModePurityError
        If ``u`` is not concentrated in one degree.
    """
    l = u.pure_degree(tol)
    xu = apply_X(metric, u)
    plus = xu.degree(l + 1)
    minus = xu.degree(l - 1) if l >= 1 else xu * 0.0
    return plus, minus


def z_project(metric: MetricDisc, u: FiberFunction) -> np.ndarray:
    """Fiber mean of ``X_perp u`` as a spatial array."""
    return np.mean(apply_X_perp(metric, u).values, axis=-1)


def _z_inner(metric: MetricDisc, grid: DiscGrid, za: np.ndarray, zb: np.ndarray) -> float:
    dens = np.exp(2 * metric.phi(grid.x, grid.y))
    return float(2 * np.pi * grid.integrate(za * zb, dens))


def _curvature_inner(metric: MetricDisc, a: FiberFunction, b_: FiberFunction) -> float:
    """``(K a, b)`` on ``SM``."""
    K = metric.curvature(a.grid.x, a.grid.y)
    return a.like(a.values * K[..., None]).inner(b_, metric)


def solve_transport(metric: MetricDisc, f: SymTensorField, n_theta: int, step: float = 0.01,
                    chunk: int = 200_000) -> FiberFunction:
    """``u^f(x, v) = int_0^tau f(phi_t(x, v)) dt`` at every node of ``f.grid``.

    Each node is traced forward independently.  Outgoing boundary nodes get
    ``u^f = 0`` because their exit time is zero.
    """
    grid = f.grid
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    X = np.broadcast_to(grid.x[..., None], grid.shape + (n_theta,)).ravel()
    Y = np.broadcast_to(grid.y[..., None], grid.shape + (n_theta,)).ravel()
    TH = np.broadcast_to(th, grid.shape + (n_theta,)).ravel()

    def integrand(x, y, t):
        return contract(f.evaluate(x, y), metric, x, y, t)[None]

    out = np.empty(X.size)
    for lo in range(0, X.size, chunk):
        sl = slice(lo, lo + chunk)
        res = trace_rays(metric, X[sl], Y[sl], TH[sl], step, integrand=integrand)
        out[sl] = res.integrals[0]
    return FiberFunction(grid, out.reshape(grid.shape + (n_theta,)))


@dataclass
class PestovReport:
    """Terms of ``||VXu||^2 = ||XVu||^2 - (K Vu, Vu) + ||Xu||^2 + P(u, u)``."""

    vxu: float
    xvu: float
    curvature: float
    xu: float
    boundary: float
    residual: float
    relative_residual: float

    def as_dict(self) -> dict:
        return asdict(self)


def pestov_check(metric: MetricDisc, u: FiberFunction, guard_tol: float = 1e-8) -> PestovReport:
    """Evaluate every term of the Pestov identity with boundary term.

    ``curvature`` is the signed term ``-(K Vu, Vu)`` (non-negative when
    ``K <= 0``).  ``relative_residual`` divides by the sum of the term
    magnitudes.
    """
    u.check_guard(guard_tol)
    vu = apply_V(u)
    xu = apply_X(metric, u)
    vxu = apply_V(xu).norm_sq(metric)
    xvu = apply_X(metric, vu).norm_sq(metric)
    curv = -_curvature_inner(metric, vu, vu)
    xu2 = xu.norm_sq(metric)
    tr = u.boundary_trace(metric)
    P = p_form(metric, tr, tr)
    res = vxu - (xvu + curv + xu2 + P)
    scale = abs(vxu) + abs(xvu) + abs(curv) + abs(xu2) + abs(P)
    return PestovReport(vxu, xvu, curv, xu2, P, res, abs(res) / scale if scale > 0 else 0.0)


@dataclass
class LocalizedReport:
    """Terms of ``alpha_{l-1}||X_-u||^2 - (K Vu, Vu) + ||Z u||^2 + P = beta_{l+1}||X_+u||^2``."""

    l: int
    alpha_term: float
    curvature: float
    z_term: float
    boundary: float
    beta_term: float
    residual: float
    relative_residual: float

    def as_dict(self) -> dict:
        return asdict(self)


def pestov_localized_check(metric: MetricDisc, l: int, u: FiberFunction,
                           purity_tol: float = 1e-12) -> LocalizedReport:
    """Localized Pestov identity for ``u`` of pure fiber degree ``l`` (``d = 2``).

    ``relative_residual`` divides by the sum of the term magnitudes plus
    ``||Xu||^2``.
    """
    found = u.pure_degree(purity_tol)
    if found != l and u.degree_energy().sum() > 0:
        raise ModePurityError(f"input has degree {found}, expected {l}")
    plus, minus = split_X(metric, u, purity_tol)
    vu = apply_V(u)
    a = float(coeffs.alpha(2, l - 1)) * minus.norm_sq(metric)
    curv = -_curvature_inner(metric, vu, vu)
    z = z_project(metric, u)
    zz = _z_inner(metric, u.grid, z, z)
    tr = u.boundary_trace(metric)
    P = p_form(metric, tr, tr)
    bterm = float(coeffs.beta(2, l + 1)) * plus.norm_sq(metric)
    res = a + curv + zz + P - bterm
    # for l = 0 every term vanishes; ||Xu||^2 keeps the scale meaningful
    scale = abs(a) + abs(curv) + abs(zz) + abs(P) + abs(bterm) + apply_X(metric, u).norm_sq(metric)
    return LocalizedReport(l, a, curv, zz, P, bterm, res, abs(res) / scale if scale > 0 else 0.0)


def cross_terms(metric: MetricDisc, u: FiberFunction, w: FiberFunction) -> dict:
    """Relative size of ``P(u, w)``, ``(K Vu, Vw)`` and ``(Z u, Z w)``.

    Each is divided by the matching geometric mean of the diagonal terms
    (or of ``||Vu|| ||Vw||`` style scales when a diagonal vanishes).
    """
    vu, vw = apply_V(u), apply_V(w)
    tu, tw = u.boundary_trace(metric), w.boundary_trace(metric)
    zu, zw = z_project(metric, u), z_project(metric, w)
    from .boundary_calculus import h1t_norm

    scale_p = np.sqrt(h1t_norm(metric, tu) * h1t_norm(metric, tw))
    K = np.abs(metric.curvature(u.grid.x, u.grid.y))
    scale_k = np.sqrt(vu.like(vu.values * K[..., None]).inner(vu, metric)
                      * vw.like(vw.values * K[..., None]).inner(vw, metric))
    scale_k = max(scale_k, np.sqrt(vu.norm_sq(metric) * vw.norm_sq(metric)))
    xu2 = apply_X_perp(metric, u).norm_sq(metric)
    xw2 = apply_X_perp(metric, w).norm_sq(metric)
    scale_z = np.sqrt(xu2 * xw2)

    def rel(v, sc):
        return abs(v) / sc if sc > 0 else abs(v)

    return {
        "boundary": rel(p_form(metric, tu, tw), scale_p),
        "curvature": rel(_curvature_inner(metric, vu, vw), scale_k),
        "z": rel(_z_inner(metric, u.grid, zu, zw), scale_z),
    }
