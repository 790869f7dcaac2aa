"""Symmetric tensor fields of rank 0, 1, 2 on a conformal disc.

Covariant components are stored in Cartesian coordinates, independent
components only: ``f``; ``(f_1, f_2)``; ``(f_11, f_12, f_22)``.  For
``g = exp(2 phi) delta`` the Christoffel symbols are
``Gamma^k_ij = delta^k_i phi_j + delta^k_j phi_i - delta_ij phi_k``, which
gives the closed forms used below::

    (d^s p)_11 = d_1 p_1 - p_1 phi_1 + p_2 phi_2
    (d^s p)_22 = d_2 p_2 - p_2 phi_2 + p_1 phi_1
    (d^s p)_12 = (d_1 p_2 + d_2 p_1) / 2 - p_1 phi_2 - p_2 phi_1

    (delta^s f)   = exp(-2 phi) (d_1 f_1 + d_2 f_2)                    (m = 1)
    (delta^s f)_j = exp(-2 phi) (d_i f_ij - phi_j (f_11 + f_22))       (m = 2)

With these signs ``(d^s p, f) = -(p, delta^s f)`` whenever ``p`` vanishes on
the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp
from numpy.polynomial import chebyshev as cheb
from scipy.interpolate import RectBivariateSpline

from .geometry import MetricDisc
from .grid import DiscGrid

__all__ = [
    "AnalyticTensor",
    "GaussianPolynomial",
    "random_tensor",
    "SymTensorField",
    "contract",
    "ell_m",
    "sym_derivative",
    "divergence",
    "inner",
    "norm",
    "h1_norm",
    "solenoidal_decompose",
    "DecompositionError",
    "DecompositionReport",
]

_MULTIPLICITY = {0: (1.0,), 1: (1.0, 1.0), 2: (1.0, 2.0, 1.0)}


class DecompositionError(RuntimeError):
    """The potential/solenoidal least-squares solve did not meet its tolerance."""


class AnalyticTensor:
    """Pointwise-evaluable tensor field with optional Cartesian Jacobian.

    Parameters
    ----------
    m : int
        Rank.
    value : callable
        ``value(x, y) -> array (m+1, *x.shape)``.
    jacobian : callable, optional
        ``jacobian(x, y) -> array (m+1, 2, *x.shape)`` of component derivatives.
    """

    def __init__(self, m: int, value, jacobian=None, label: str = ""):
        if m not in (0, 1, 2):
            raise ValueError("rank must be 0, 1 or 2")
        self.m = m
        self._value = value
        self._jacobian = jacobian
        self.label = label

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(self._value(x, y), dtype=float)
        return np.broadcast_to(out, (self.m + 1,) + np.broadcast_shapes(x.shape, y.shape))

    def jacobian(self, x, y):
        if self._jacobian is None:
            raise ValueError(f"no derivatives available for {self.label or 'this field'}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(self._jacobian(x, y), dtype=float)
        return np.broadcast_to(out, (self.m + 1, 2) + np.broadcast_shapes(x.shape, y.shape))

    @property
    def has_jacobian(self) -> bool:
        return self._jacobian is not None

    @classmethod
    def from_expressions(cls, m: int, exprs, label: str = "") -> "AnalyticTensor":
        """Build from sympy-parsable strings in ``x`` and ``y``, one per component."""
        xs, ys = sp.symbols("x y", real=True)
        exprs = [sp.sympify(e, locals={"x": xs, "y": ys}) for e in exprs]
        if len(exprs) != m + 1:
            raise ValueError(f"rank {m} needs {m + 1} components, got {len(exprs)}")
        vals = [sp.lambdify((xs, ys), e, "numpy") for e in exprs]
        grads = [[sp.lambdify((xs, ys), sp.diff(e, v), "numpy") for v in (xs, ys)] for e in exprs]

        def value(x, y):
            shape = np.broadcast_shapes(np.shape(x), np.shape(y))
            return np.stack([np.broadcast_to(np.asarray(f(x, y), dtype=float), shape) for f in vals])

        def jac(x, y):
            shape = np.broadcast_shapes(np.shape(x), np.shape(y))
            return np.stack([np.stack([np.broadcast_to(np.asarray(g(x, y), dtype=float), shape)
                                       for g in row]) for row in grads])

        return cls(m, value, jac, label or ",".join(map(str, exprs)))

    def __sub__(self, other: "AnalyticTensor") -> "AnalyticTensor":
        if other.m != self.m:
            raise ValueError("rank mismatch")
        jac = None
        if self.has_jacobian and other.has_jacobian:
            def jac(x, y):
                return self.jacobian(x, y) - other.jacobian(x, y)
        return AnalyticTensor(self.m, lambda x, y: self(x, y) - other(x, y), jac,
                              f"({self.label})-({other.label})")


@dataclass
class GaussianPolynomial:
    """Scalar ``P(x, y) exp(-|x - c|^2 / w^2)``, optionally times ``R^2 - |x|^2``.

    ``coef[a, b]`` multiplies ``x^a y^b``.
    """

    coef: np.ndarray
    center: tuple = (0.0, 0.0)
    width: float = 0.5
    bubble_radius: float | None = None

    def _parts(self, x, y):
        cx, cy = self.center
        w2 = self.width ** 2
        e = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / w2)
        ex = -2 * (x - cx) / w2 * e
        ey = -2 * (y - cy) / w2 * e
        p = np.zeros_like(x)
        px = np.zeros_like(x)
        py = np.zeros_like(x)
        na, nb = self.coef.shape
        for a in range(na):
            for b_ in range(nb):
                cab = self.coef[a, b_]
                if cab == 0:
                    continue
                p = p + cab * x ** a * y ** b_
                if a:
                    px = px + cab * a * x ** (a - 1) * y ** b_
                if b_:
                    py = py + cab * b_ * x ** a * y ** (b_ - 1)
        if self.bubble_radius is None:
            bb, bx, by = 1.0, 0.0, 0.0
        else:
            bb = self.bubble_radius ** 2 - x * x - y * y
            bx, by = -2 * x, -2 * y
        return p, px, py, e, ex, ey, bb, bx, by

    def value(self, x, y):
        p, _, _, e, _, _, bb, _, _ = self._parts(x, y)
        return p * e * bb

    def gradient(self, x, y):
        p, px, py, e, ex, ey, bb, bx, by = self._parts(x, y)
        gx = px * e * bb + p * ex * bb + p * e * bx
        gy = py * e * bb + p * ey * bb + p * e * by
        return gx, gy


def random_tensor(m: int, rng: np.random.Generator, radius: float = 1.0, degree: int = 2,
                  vanish_on_boundary: bool = False, label: str = "") -> AnalyticTensor:
    """Seeded random field: each component is a polynomial times a Gaussian bump.

    With ``vanish_on_boundary`` every component carries the factor
    ``R^2 - |x|^2`` so the field is zero on the boundary circle.
    """
    n = m + 1
    coef = np.zeros((n, degree + 1, degree + 1))
    centers = np.zeros((n, 2))
    widths = np.zeros(n)
    for c_ in range(n):
        for a in range(degree + 1):
            for b_ in range(degree + 1 - a):
                coef[c_, a, b_] = rng.normal() / (1 + a + b_)
        rad = 0.5 * radius * np.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * np.pi)
        centers[c_] = rad * np.cos(ang), rad * np.sin(ang)
        widths[c_] = radius * rng.uniform(0.35, 0.7)
    bubble = radius if vanish_on_boundary else None
    batch = _GaussianPolynomialBatch(coef, centers, widths, bubble)
    return AnalyticTensor(m, batch.value, batch.jacobian, label or f"random-m{m}")


class _GaussianPolynomialBatch:
    """Several :class:`GaussianPolynomial` components sharing monomial powers."""

    def __init__(self, coef, centers, widths, bubble_radius):
        self.coef = coef
        self.centers = centers
        self.widths = widths
        self.bubble_radius = bubble_radius
        deg = coef.shape[1] - 1
        k = np.arange(deg + 1)
        # d/dx of sum c_ab x^a y^b has coefficients (a+1) c_{a+1,b}
        self.coef_x = np.zeros_like(coef)
        self.coef_x[:, :-1, :] = coef[:, 1:, :] * k[1:, None]
        self.coef_y = np.zeros_like(coef)
        self.coef_y[:, :, :-1] = coef[:, :, 1:] * k[None, 1:]

    def _powers(self, x, y):
        deg = self.coef.shape[1] - 1
        xp = [np.ones_like(x)]
        yp = [np.ones_like(y)]
        for _ in range(deg):
            xp.append(xp[-1] * x)
            yp.append(yp[-1] * y)
        return np.stack(xp), np.stack(yp)

    def _poly(self, coef, xp, yp):
        # sum_ab coef[c, a, b] x^a y^b
        return np.sum(np.tensordot(coef, yp, axes=([2], [0])) * xp[None], axis=1)

    def _gauss(self, x, y):
        dx = x[None] - self.centers[:, 0].reshape((-1,) + (1,) * x.ndim)
        dy = y[None] - self.centers[:, 1].reshape((-1,) + (1,) * x.ndim)
        w2 = (self.widths ** 2).reshape((-1,) + (1,) * x.ndim)
        e = np.exp(-(dx * dx + dy * dy) / w2)
        return e, -2 * dx / w2 * e, -2 * dy / w2 * e

    def value(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        xp, yp = self._powers(x, y)
        out = self._poly(self.coef, xp, yp) * self._gauss(x, y)[0]
        if self.bubble_radius is not None:
            out = out * (self.bubble_radius ** 2 - x * x - y * y)
        return out

    def jacobian(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        xp, yp = self._powers(x, y)
        p = self._poly(self.coef, xp, yp)
        px = self._poly(self.coef_x, xp, yp)
        py = self._poly(self.coef_y, xp, yp)
        e, ex, ey = self._gauss(x, y)
        gx = px * e + p * ex
        gy = py * e + p * ey
        if self.bubble_radius is not None:
            bb = self.bubble_radius ** 2 - x * x - y * y
            gx = gx * bb - 2 * x * p * e
            gy = gy * bb - 2 * y * p * e
        return np.stack([gx, gy], axis=1)


class SymTensorField:
    """Rank-``m`` symmetric tensor field sampled on a :class:`DiscGrid`.

    ``values`` has shape ``(m + 1, n_r + 1, n_psi)``.  When the field came
    from an :class:`AnalyticTensor`, ``source`` keeps it so that evaluation
    along geodesics is exact rather than interpolated.
    """

    def __init__(self, grid: DiscGrid, m: int, values, source: AnalyticTensor | None = None):
        values = np.asarray(values, dtype=float)
        if m not in (0, 1, 2):
            raise ValueError("rank must be 0, 1 or 2")
        if values.shape != (m + 1,) + grid.shape:
            raise ValueError(f"expected values of shape {(m + 1,) + grid.shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor components must be finite")
        self.grid = grid
        self.m = m
        self.values = values
        self.source = source
        self._spline = None

    @classmethod
    def from_analytic(cls, grid: DiscGrid, field: AnalyticTensor) -> "SymTensorField":
        return cls(grid, field.m, np.array(field(grid.x, grid.y)), field)

    @classmethod
    def zeros(cls, grid: DiscGrid, m: int) -> "SymTensorField":
        return cls(grid, m, np.zeros((m + 1,) + grid.shape))

    def __add__(self, other):
        src = None
        if self.source is not None and other.source is not None:
            a, b_ = self.source, other.source
            src = AnalyticTensor(self.m, lambda x, y: a(x, y) + b_(x, y), None)
        return SymTensorField(self.grid, self.m, self.values + other.values, src)

    def __sub__(self, other):
        src = None
        if self.source is not None and other.source is not None:
            src = self.source - other.source
        return SymTensorField(self.grid, self.m, self.values - other.values, src)

    def evaluate(self, x, y) -> np.ndarray:
        """Components at arbitrary points (exact if analytic, else bicubic in ``(r, psi)``)."""
        if self.source is not None:
            return np.asarray(self.source(x, y))
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self._spline is None:
            g = self.grid
            pad = 3
            psi = np.concatenate([g.psi[-pad:] - 2 * np.pi, g.psi, g.psi[:pad] + 2 * np.pi])
            self._spline = [
                RectBivariateSpline(g.r, psi, np.concatenate(
                    [c[:, -pad:], c, c[:, :pad]], axis=1), kx=3, ky=3)
                for c in self.values
            ]
        r = np.hypot(x, y)
        psi = np.mod(np.arctan2(y, x), 2 * np.pi)
        return np.stack([s.ev(r, psi) for s in self._spline])

    def norm(self, metric: MetricDisc) -> float:
        return norm(self, metric)


def contract(components, metric: MetricDisc, x, y, theta, inv_factor=None):
    """``f_x(v, ..., v)`` for unit ``v`` at direction angle ``theta``.

    ``components`` has shape ``(m + 1, *shape)`` broadcastable against ``theta``.
    ``inv_factor`` may carry a precomputed ``exp(-phi(x, y))``.
    """
    comps = np.asarray(components)
    m = comps.shape[0] - 1
    if m == 0:
        return comps[0] * np.ones_like(theta)
    e = np.exp(-metric.phi(x, y)) if inv_factor is None else inv_factor
    c, s = np.cos(theta), np.sin(theta)
    if m == 1:
        return e * (comps[0] * c + comps[1] * s)
    if m == 2:
        return e * e * (comps[0] * c * c + 2 * comps[1] * c * s + comps[2] * s * s)
    raise ValueError("rank must be 0, 1 or 2")


def ell_m(f: SymTensorField, metric: MetricDisc, n_theta: int):
    """Fiber function ``(x, theta) -> f_x(v, ..., v)`` on the grid times ``n_theta`` angles."""
    from .sphere_bundle import FiberFunction

    grid = f.grid
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    comps = f.values[..., None]
    vals = contract(comps, metric, grid.x[..., None], grid.y[..., None], theta[None, None, :])
    return FiberFunction(grid, vals)


def _sym_derivative_components(vals, jac, phix, phiy):
    """Closed-form ``d^s`` given component values and Jacobian."""
    m_in = vals.shape[0] - 1
    if m_in == 0:
        return np.stack([jac[0, 0], jac[0, 1]])
    if m_in == 1:
        p1, p2 = vals
        d11 = jac[0, 0] - p1 * phix + p2 * phiy
        d22 = jac[1, 1] - p2 * phiy + p1 * phix
        d12 = 0.5 * (jac[1, 0] + jac[0, 1]) - p1 * phiy - p2 * phix
        return np.stack([d11, d12, d22])
    raise ValueError("d^s is implemented for input rank 0 and 1")


def sym_derivative(p: SymTensorField, metric: MetricDisc) -> SymTensorField:
    """Symmetric covariant derivative ``d^s p`` (rank ``m - 1`` to ``m``).

    Grid-only fields use the grid differences.  If ``p`` has an analytic
    source with a Jacobian, the result keeps an exact analytic source.
    """
    if p.m >= 2:
        raise ValueError("output rank would exceed 2")
    grid = p.grid
    phix, phiy = metric.grad_phi(grid.x, grid.y)
    src = None
    if p.source is not None and p.source.has_jacobian:
        ps = p.source

        def value(x, y):
            gx, gy = metric.grad_phi(x, y)
            return _sym_derivative_components(ps(x, y), ps.jacobian(x, y), gx, gy)

        src = AnalyticTensor(p.m + 1, value, None, f"d^s({ps.label})")
        vals = value(grid.x, grid.y)
    else:
        jac = np.stack([np.stack(grid.gradient(c)) for c in p.values])
        vals = _sym_derivative_components(p.values, jac, phix, phiy)
    return SymTensorField(grid, p.m + 1, vals, src)


def divergence(f: SymTensorField, metric: MetricDisc) -> SymTensorField:
    """Divergence ``delta^s f`` by grid differences (rank ``m`` to ``m - 1``)."""
    if f.m == 0:
        raise ValueError("divergence of a rank-0 field is undefined")
    grid = f.grid
    e2 = np.exp(-2 * metric.phi(grid.x, grid.y))
    if f.m == 1:
        gx, _ = grid.gradient(f.values[0])
        _, gy = grid.gradient(f.values[1])
        return SymTensorField(grid, 0, (e2 * (gx + gy))[None])
    f11, f12, f22 = f.values
    phix, phiy = metric.grad_phi(grid.x, grid.y)
    tr = f11 + f22
    d11x, _ = grid.gradient(f11)
    d12x, d12y = grid.gradient(f12)
    _, d22y = grid.gradient(f22)
    out1 = e2 * (d11x + d12y - phix * tr)
    out2 = e2 * (d12x + d22y - phiy * tr)
    return SymTensorField(grid, 1, np.stack([out1, out2]))


def _component_weights(grid: DiscGrid, metric: MetricDisc, m: int) -> np.ndarray:
    """Quadrature weights per component so that ``sum(w * u * v)`` is the ``L^2(M)`` product."""
    dens = np.exp((2 - 2 * m) * metric.phi(grid.x, grid.y)) * grid.weights
    return np.stack([mult * dens for mult in _MULTIPLICITY[m]])


def inner(u: SymTensorField, w: SymTensorField, metric: MetricDisc) -> float:
    """``L^2(M)`` inner product ``int u_{i..} w^{i..} dV_g``."""
    if u.m != w.m:
        raise ValueError("rank mismatch")
    return float(np.sum(_component_weights(u.grid, metric, u.m) * u.values * w.values))


def norm(u: SymTensorField, metric: MetricDisc) -> float:
    return float(np.sqrt(max(inner(u, u, metric), 0.0)))


def h1_norm(u: SymTensorField, metric: MetricDisc) -> float:
    """``sqrt(||u||^2 + sum_i ||d_i u||^2)`` with Cartesian component derivatives."""
    grid = u.grid
    w = _component_weights(grid, metric, u.m)
    if u.source is not None and u.source.has_jacobian:
        jac = np.asarray(u.source.jacobian(grid.x, grid.y))
        gx, gy = jac[:, 0], jac[:, 1]
    else:
        gx, gy = zip(*(grid.gradient(c) for c in u.values))
        gx, gy = np.stack(gx), np.stack(gy)
    total = np.sum(w * (u.values ** 2 + gx ** 2 + gy ** 2))
    return float(np.sqrt(total))


class _BubbleBasis:
    """``(R^2 - |x|^2) T_a(x/R) T_b(y/R)`` with ``a + b <= degree``."""

    def __init__(self, degree: int, radius: float):
        self.degree = degree
        self.radius = radius
        self.pairs = [(a, b_) for a in range(degree + 1) for b_ in range(degree + 1 - a)]
        eye = np.eye(degree + 1)
        self._dmat = np.stack([np.pad(cheb.chebder(eye[k]), (0, 1)) for k in range(degree + 1)], axis=1)

    def __len__(self):
        return len(self.pairs)

    def evaluate(self, x, y):
        R = self.radius
        tx = cheb.chebvander(x / R, self.degree)
        ty = cheb.chebvander(y / R, self.degree)
        dtx = tx @ self._dmat / R
        dty = ty @ self._dmat / R
        bub = R * R - x * x - y * y
        ia = np.array([a for a, _ in self.pairs])
        ib = np.array([b_ for _, b_ in self.pairs])
        tt = tx[..., ia] * ty[..., ib]
        val = bub[..., None] * tt
        gx = -2 * x[..., None] * tt + bub[..., None] * dtx[..., ia] * ty[..., ib]
        gy = -2 * y[..., None] * tt + bub[..., None] * tx[..., ia] * dty[..., ib]
        return np.moveaxis(val, -1, 0), np.moveaxis(gx, -1, 0), np.moveaxis(gy, -1, 0)


@dataclass
class _PotentialSystem:
    basis: _BubbleBasis
    cols: np.ndarray
    matrix: np.ndarray
    svd: tuple


_SYSTEM_CACHE: dict = {}


def _potential_system(grid: DiscGrid, metric: MetricDisc, m: int, degree: int) -> _PotentialSystem:
    """Weighted design matrix of ``q -> d^s q`` and its truncated SVD, memoised."""
    key = (tuple(grid.key().values()), metric.hash(), m, degree)
    hit = _SYSTEM_CACHE.get(key)
    if hit is not None:
        return hit
    basis = _BubbleBasis(degree, grid.radius)
    val, gx, gy = basis.evaluate(grid.x, grid.y)
    if m == 1:
        cols = np.stack([gx, gy], axis=1)  # (nb, 2, *shape)
    else:
        phix, phiy = metric.grad_phi(grid.x, grid.y)
        zero = np.zeros_like(val)
        blocks = []
        for comp in range(2):
            pv = np.stack([val, zero]) if comp == 0 else np.stack([zero, val])
            jac = np.zeros((2, 2) + val.shape)
            jac[comp, 0] = gx
            jac[comp, 1] = gy
            blocks.append(np.moveaxis(_sym_derivative_components(pv, jac, phix, phiy), 1, 0))
        cols = np.concatenate(blocks, axis=0)  # (2 nb, 3, *shape)
    sw = np.sqrt(_component_weights(grid, metric, m))
    A = (cols * sw[None]).reshape(cols.shape[0], -1).T
    u, sv, vt = np.linalg.svd(A, full_matrices=False)
    keep = sv > sv[0] * 1e-13
    system = _PotentialSystem(basis, cols, A, (u[:, keep], sv[keep], vt[keep]))
    if len(_SYSTEM_CACHE) > 16:
        _SYSTEM_CACHE.clear()
    _SYSTEM_CACHE[key] = system
    return system


@dataclass
class DecompositionReport:
    """Diagnostics of :func:`solenoidal_decompose`."""

    relative_residual: float
    orthogonality: float
    n_basis: int
    degree: int


def solenoidal_decompose(f: SymTensorField, metric: MetricDisc, degree: int = 20,
                         tol: float = 1e-8):
    """Split ``f = f_s + d^s p`` with ``p = 0`` on the boundary.

    The potential ``p`` is the least-squares minimiser of ``||f - d^s p||``
    over boundary-vanishing polynomials ``(R^2 - |x|^2) T_a(x) T_b(y)`` of
    total degree ``<= degree``, with the grid quadrature as inner product.
    The normal equations of that problem are the weak form of
    ``delta^s d^s p = delta^s f``, so ``f_s`` is orthogonal to every
    admissible ``d^s q``.

    Returns
    -------
    f_s : SymTensorField
    p : SymTensorField or None
        ``None`` for ``m = 0`` where ``f_s = f``.
    report : DecompositionReport

    Raises
    ------
    DecompositionError
        If the normal-equation residual exceeds ``tol``.
    """
    if f.m == 0:
        return f, None, DecompositionReport(0.0, 0.0, 0, degree)
    grid = f.grid
    system = _potential_system(grid, metric, f.m, degree)
    basis, cols, A, (u, sv, vt) = system.basis, system.cols, system.matrix, system.svd
    nb = len(basis)
    sw = np.sqrt(_component_weights(grid, metric, f.m))
    rhs = (f.values * sw).ravel()
    coef = vt.T @ ((u.T @ rhs) / sv)
    resid = rhs - A @ coef
    rhs_norm = np.linalg.norm(rhs)
    rel = float(np.linalg.norm(A.T @ resid) / (sv[0] * rhs_norm)) if rhs_norm > 0 else 0.0
    if rel > tol:
        raise DecompositionError(f"normal-equation residual {rel:.3e} exceeds {tol:.1e}")

    val, _, _ = basis.evaluate(grid.x, grid.y)
    potential_vals = np.tensordot(coef.reshape(-1, nb), val, axes=(1, 0))
    dsp_vals = np.tensordot(coef, cols, axes=(0, 0))

    def p_value(x, y, coef=coef):
        v, _, _ = basis.evaluate(np.asarray(x, float), np.asarray(y, float))
        return np.tensordot(coef.reshape(-1, nb), v, axes=(1, 0))

    def p_jac(x, y, coef=coef):
        _, vx, vy = basis.evaluate(np.asarray(x, float), np.asarray(y, float))
        c2 = coef.reshape(-1, nb)
        return np.stack([np.tensordot(c2, vx, axes=(1, 0)), np.tensordot(c2, vy, axes=(1, 0))], axis=1)

    p_src = AnalyticTensor(f.m - 1, p_value, p_jac, "potential")
    p = SymTensorField(grid, f.m - 1, potential_vals, p_src)
    dsp = sym_derivative(p, metric)
    dsp = SymTensorField(grid, f.m, dsp_vals, dsp.source)
    f_s_src = f.source - dsp.source if f.source is not None else None
    f_s = SymTensorField(grid, f.m, f.values - dsp_vals, f_s_src)
    fn2 = max(inner(f, f, metric), np.finfo(float).tiny)
    ortho = abs(inner(f_s, dsp, metric)) / fn2
    return f_s, p, DecompositionReport(rel, float(ortho), A.shape[1], degree)
