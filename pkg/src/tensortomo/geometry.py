"""Conformal metrics on the disc, geodesic flow and fan-beam coordinates.

A metric is ``g = exp(2 phi) (dx^2 + dy^2)`` on the disc ``|x| <= R``.  A unit
vector is stored through its direction angle ``theta``,
``v = exp(-phi) (cos theta, sin theta)``, so ``|v|_g = 1`` holds exactly and
the geodesic flow becomes the first-order system::

    x'     = exp(-phi) cos theta
    y'     = exp(-phi) sin theta
    theta' = exp(-phi) (-phi_x sin theta + phi_y cos theta)
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

__all__ = [
    "AuditError",
    "TracerError",
    "MetricDisc",
    "metric_from_spec",
    "PRESETS",
    "PhasePoint",
    "BoundaryChart",
    "TraceResult",
    "trace_rays",
    "geodesic_trace",
    "exit_time",
]

_X, _Y = sp.symbols("x y", real=True)


class AuditError(ValueError):
    """The metric violates a curvature or boundary-convexity hypothesis."""


class TracerError(RuntimeError):
    """A geodesic failed to leave the disc within the step budget."""


class MetricDisc:
    """Conformal metric ``exp(2 phi) |dx|^2`` on a disc.

    Parameters
    ----------
    phi : str or sympy expression
        Conformal exponent in the variables ``x`` and ``y``.
    radius : float
        Disc radius.
    name : str, optional
        Label used in reports.
    """

    def __init__(self, phi, radius: float = 1.0, name: str | None = None):
        expr = sp.sympify(phi, locals={"x": _X, "y": _Y}) if isinstance(phi, str) else phi
        self.expr = sp.sympify(expr)
        self.radius = float(radius)
        self.name = name or str(self.expr)
        px, py = sp.diff(self.expr, _X), sp.diff(self.expr, _Y)
        derivs = [self.expr, px, py, sp.diff(px, _X), sp.diff(px, _Y), sp.diff(py, _Y)]
        self._funcs = [sp.lambdify((_X, _Y), e, "numpy") for e in derivs]
        self.is_radial = sp.simplify(_Y * px - _X * py) == 0

    def __repr__(self):
        return f"MetricDisc({self.name!r}, radius={self.radius})"

    def hash(self) -> str:
        return hashlib.sha256(f"{sp.srepr(self.expr)}|{self.radius!r}".encode()).hexdigest()[:16]

    def _eval(self, k, x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._funcs[k](x, np.asarray(y, dtype=float)), dtype=float),
                               np.broadcast_shapes(x.shape, np.shape(y))).copy()

    def phi(self, x, y):
        return self._eval(0, x, y)

    def grad_phi(self, x, y):
        return self._eval(1, x, y), self._eval(2, x, y)

    def hess_phi(self, x, y):
        return self._eval(3, x, y), self._eval(4, x, y), self._eval(5, x, y)

    def conformal_factor(self, x, y):
        """``exp(2 phi)``, the area density of ``g`` against ``dx dy``."""
        return np.exp(2 * self.phi(x, y))

    def curvature(self, x, y):
        """Gaussian curvature ``-exp(-2 phi) (phi_xx + phi_yy)``."""
        pxx, _, pyy = self.hess_phi(x, y)
        return -np.exp(-2 * self.phi(x, y)) * (pxx + pyy)

    def boundary_geodesic_curvature(self, psi):
        """Geodesic curvature of the boundary circle, ``exp(-phi) (1/R + d_r phi)``."""
        psi = np.asarray(psi, dtype=float)
        x, y = self.radius * np.cos(psi), self.radius * np.sin(psi)
        px, py = self.grad_phi(x, y)
        dr = px * np.cos(psi) + py * np.sin(psi)
        return np.exp(-self.phi(x, y)) * (1.0 / self.radius + dr)

    def audit(self, n: int = 64, curvature_tol: float = 1e-10) -> dict:
        """Check ``K <= curvature_tol`` on a polar audit grid and boundary convexity.

        Raises
        ------
        AuditError
            If either hypothesis fails.
        """
        r = np.linspace(0, self.radius, n + 1)
        psi = 2 * np.pi * np.arange(2 * n) / (2 * n)
        rr, pp = np.meshgrid(r, psi, indexing="ij")
        k = self.curvature(rr * np.cos(pp), rr * np.sin(pp))
        kg = self.boundary_geodesic_curvature(psi)
        report = {"max_curvature": float(k.max()), "min_boundary_curvature": float(kg.min())}
        if not np.all(np.isfinite(k)) or k.max() > curvature_tol:
            raise AuditError(f"curvature audit failed: max K = {k.max():.3e} > {curvature_tol}")
        if kg.min() <= 0:
            raise AuditError(f"boundary is not strictly convex: min kappa = {kg.min():.3e}")
        return report

    def velocity(self, x, y, theta):
        e = np.exp(-self.phi(x, y))
        return e * np.cos(theta), e * np.sin(theta)

    def spray(self, x, y, theta):
        """Right-hand side of the geodesic system in ``(x, y, theta)``."""
        e = np.exp(-self.phi(x, y))
        px, py = self.grad_phi(x, y)
        c, s = np.cos(theta), np.sin(theta)
        return e * c, e * s, e * (-px * s + py * c)


PRESETS = {
    "euclidean": "0",
    "bump": "-0.3*exp(-(x**2 + y**2)/1.44)",
    "poincare-like": "-log(1 - (x**2 + y**2)/4)",
    "quadratic": "(x**2 + y**2)/4",
}


def metric_from_spec(spec, radius: float = 1.0) -> MetricDisc:
    """Build a metric from a preset name or a ``{"expr": ..., "radius": ...}`` mapping."""
    if isinstance(spec, MetricDisc):
        return spec
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ValueError(f"unknown metric preset {spec!r}; choose from {sorted(PRESETS)}")
        return MetricDisc(PRESETS[spec], radius, name=spec)
    if isinstance(spec, dict):
        if "preset" in spec:
            return metric_from_spec(spec["preset"], spec.get("radius", radius))
        return MetricDisc(spec["expr"], spec.get("radius", radius), name=spec.get("name"))
    raise TypeError(f"cannot build a metric from {type(spec).__name__}")


@dataclass(frozen=True)
class PhasePoint:
    """A unit tangent vector: base point ``(x, y)`` and direction angle ``theta``."""

    x: float
    y: float
    theta: float

    def velocity(self, metric: MetricDisc):
        return metric.velocity(self.x, self.y, self.theta)


class BoundaryChart:
    """Arclength / direction coordinates on the boundary of the unit circle bundle.

    ``s`` is the ``g``-arclength from the point at polar angle 0, and ``alpha``
    is measured from the inward normal toward the positively oriented unit
    tangent, so that ``mu = <v, nu> = -cos(alpha)``.
    """

    def __init__(self, metric: MetricDisc, n_fourier: int = 256):
        self.metric = metric
        R = metric.radius
        psi = 2 * np.pi * np.arange(n_fourier) / n_fourier
        dens = R * np.exp(metric.phi(R * np.cos(psi), R * np.sin(psi)))
        coef = np.fft.rfft(dens) / n_fourier
        self._c0 = coef[0].real
        self._coef = coef[1:n_fourier // 2]
        self._k = np.arange(1, n_fourier // 2)
        self.length = 2 * np.pi * self._c0

    def s_of_psi(self, psi):
        psi = np.asarray(psi, dtype=float)
        terms = 2 * (self._coef[None, :] * (np.exp(1j * self._k[None, :] * psi.reshape(-1, 1)) - 1)
                     / (1j * self._k[None, :]))
        return (self._c0 * psi.ravel() + terms.sum(axis=1).real).reshape(psi.shape)

    def ds_dpsi(self, psi):
        psi = np.asarray(psi, dtype=float)
        R = self.metric.radius
        return R * np.exp(self.metric.phi(R * np.cos(psi), R * np.sin(psi)))

    def psi_of_s(self, s):
        """Inverse of :meth:`s_of_psi` by Newton iteration (tolerance 1e-13)."""
        s = np.asarray(s, dtype=float)
        turns = np.floor(s / self.length)
        rem = s - turns * self.length
        psi = 2 * np.pi * rem / self.length
        for _ in range(50):
            step = (self.s_of_psi(psi) - rem) / self.ds_dpsi(psi)
            psi = psi - step
            if np.max(np.abs(step), initial=0.0) < 1e-14:
                break
        return psi + 2 * np.pi * turns

    def point(self, s):
        psi = self.psi_of_s(s)
        R = self.metric.radius
        return R * np.cos(psi), R * np.sin(psi)

    def normal_angle(self, s):
        """Direction angle of the outward unit normal at arclength ``s``."""
        return self.psi_of_s(s)

    def tangent_angle(self, s):
        return self.psi_of_s(s) + np.pi / 2

    def fan_beam_to_phase(self, s, alpha):
        """Phase point with ``mu = -cos(alpha)``; ``|alpha| <= pi/2`` lies in the incoming set."""
        psi = self.psi_of_s(s)
        R = self.metric.radius
        theta = np.mod(psi + np.pi - np.asarray(alpha, dtype=float), 2 * np.pi)
        x, y = R * np.cos(psi), R * np.sin(psi)
        if np.ndim(x) == 0 and np.ndim(theta) == 0:
            return PhasePoint(float(x), float(y), float(theta))
        return x, y, theta

    def phase_to_fan_beam(self, x, y, theta):
        """Inverse chart for boundary points: returns ``(s, alpha)`` with ``alpha`` in (-pi, pi]."""
        psi = np.mod(np.arctan2(y, x), 2 * np.pi)
        s = self.s_of_psi(psi)
        alpha = np.mod(psi + np.pi - theta + np.pi, 2 * np.pi) - np.pi
        alpha = np.where(alpha <= -np.pi, alpha + 2 * np.pi, alpha)
        return s, alpha

    def mu(self, s, theta):
        return np.cos(np.asarray(theta) - self.psi_of_s(s))

    def torsion_coefficient(self, s):
        """Coefficient ``c(s)`` in the boundary horizontal field ``d/ds + c(s) d/dtheta``.

        Equals ``-exp(-phi) d_r phi`` on the boundary circle.
        """
        psi = self.psi_of_s(s)
        R = self.metric.radius
        x, y = R * np.cos(psi), R * np.sin(psi)
        px, py = self.metric.grad_phi(x, y)
        return -np.exp(-self.metric.phi(x, y)) * (px * np.cos(psi) + py * np.sin(psi))


@dataclass
class TraceResult:
    """Output of :func:`trace_rays`.

    ``integrals`` has shape ``(n_integrands, n_rays)`` when integrands were
    supplied.  ``path`` is a list of ``(t, x, y, theta)`` arrays when recorded.
    """

    tau: np.ndarray
    exit_x: np.ndarray
    exit_y: np.ndarray
    exit_theta: np.ndarray
    integrals: np.ndarray | None = None
    path: list = field(default_factory=list)


def _rk4(metric, state, h, integrand):
    """One RK4 step of the geodesic system, augmented with running integrals."""
    x, y, th = state[:3]

    def rhs(x, y, th):
        dx, dy, dth = metric.spray(x, y, th)
        if integrand is None:
            return dx, dy, dth, None
        return dx, dy, dth, integrand(x, y, th)

    k1 = rhs(x, y, th)
    k2 = rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], th + 0.5 * h * k1[2])
    k3 = rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], th + 0.5 * h * k2[2])
    k4 = rhs(x + h * k3[0], y + h * k3[1], th + h * k3[2])
    nx = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    ny = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    nth = th + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    dint = None if integrand is None else h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return nx, ny, nth, dint


def trace_rays(metric: MetricDisc, x, y, theta, step: float = 0.01, integrand=None,
               max_steps: int | None = None, record_path: bool = False,
               bisection_tol: float = 1e-13) -> TraceResult:
    """Trace many geodesics forward until they leave the disc.

    Parameters
    ----------
    x, y, theta : array_like
        Start points (inside the closed disc) and direction angles.
    step : float
        Fixed RK4 step in arclength.
    integrand : callable, optional
        ``integrand(x, y, theta) -> (n_integrands, n_points)`` array,
        integrated along each geodesic with the same RK4 rule.
    max_steps : int, optional
        Budget; defaults to a generous multiple of the Euclidean diameter.

    Notes
    -----
    The exit time is located by bisection on the length of the final RK4
    step, using the sign of ``x^2 + y^2 - R^2``.  Rays starting on the
    boundary and pointing outward (or tangentially) exit at ``t = 0``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    R2 = metric.radius ** 2
    x, y, th = (a.astype(float).copy() for a in np.broadcast_arrays(
        np.ravel(x), np.ravel(y), np.ravel(theta)))
    n = x.size
    if max_steps is None:
        max_steps = int(np.ceil(50 * metric.radius / step)) + 10

    f = None
    acc = None
    if integrand is not None:
        n_int = np.atleast_2d(integrand(x[:1], y[:1], th[:1])).shape[0]
        acc = np.zeros((n_int, n))

        def f(xx, yy, tt):
            return np.atleast_2d(integrand(xx, yy, tt)).reshape(n_int, -1)

    tau = np.zeros(n)
    ex, ey, eth = x.copy(), y.copy(), th.copy()
    on_boundary = x * x + y * y >= R2 * (1 - 1e-12)
    outgoing = on_boundary & (np.cos(th) * x + np.sin(th) * y >= -1e-14 * metric.radius)
    active = np.flatnonzero(~outgoing)
    t_now = 0.0
    path = [(np.zeros(n), x.copy(), y.copy(), th.copy())] if record_path else []

    for _ in range(max_steps):
        if active.size == 0:
            break
        xs, ys, ts = x[active], y[active], th[active]
        nx, ny, nth, dint = _rk4(metric, (xs, ys, ts), step, f)
        crossed = nx * nx + ny * ny >= R2
        stay = ~crossed
        ids = active[stay]
        x[ids], y[ids], th[ids] = nx[stay], ny[stay], nth[stay]
        if acc is not None:
            acc[:, ids] += dint[:, stay]
        if np.any(crossed):
            cidx = active[crossed]
            cx, cy, ct = xs[crossed], ys[crossed], ts[crossed]
            lo = np.zeros(cidx.size)
            hi = np.full(cidx.size, step)
            while np.max(hi - lo) > bisection_tol:
                mid = 0.5 * (lo + hi)
                mx, my, _, _ = _rk4(metric, (cx, cy, ct), mid, None)
                out = mx * mx + my * my >= R2
                hi = np.where(out, mid, hi)
                lo = np.where(out, lo, mid)
            delta = 0.5 * (lo + hi)
            fx, fy, fth, fint = _rk4(metric, (cx, cy, ct), delta, f)
            ex[cidx], ey[cidx], eth[cidx] = fx, fy, fth
            tau[cidx] = t_now + delta
            if acc is not None:
                acc[:, cidx] += fint
        t_now += step
        active = ids
        if record_path:
            path.append((np.full(n, t_now), x.copy(), y.copy(), th.copy()))
    if active.size:
        raise TracerError(f"{active.size} geodesics still inside after {max_steps} steps")
    return TraceResult(tau, ex, ey, eth, acc, path)


def geodesic_trace(metric: MetricDisc, start: PhasePoint, step: float = 0.01):
    """Trace one geodesic; returns ``(path, tau)``.

    ``path`` is a list of ``(t, PhasePoint)`` pairs on the fixed step
    lattice followed by the refined exit point.
    """
    res = trace_rays(metric, [start.x], [start.y], [start.theta], step, record_path=True)
    tau = float(res.tau[0])
    path = [(float(t[0]), PhasePoint(float(px[0]), float(py[0]), float(pt[0])))
            for t, px, py, pt in res.path if t[0] < tau]
    path.append((tau, PhasePoint(float(res.exit_x[0]), float(res.exit_y[0]), float(res.exit_theta[0]))))
    return path, tau


def exit_time(metric: MetricDisc, x, y, theta, step: float = 0.01) -> np.ndarray:
    """Vectorised exit time ``tau(x, v)``."""
    return trace_rays(metric, x, y, theta, step).tau
