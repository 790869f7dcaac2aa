"""Reproducible experiment drivers behind the command-line interface.

Every driver takes an :class:`ExperimentConfig`, returns a JSON-ready
report dict with a boolean ``passed`` entry, and never reads a clock or an
unseeded generator, so equal configs give byte-identical reports.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field

import numpy as np

from . import coeffs
from .geometry import metric_from_spec
from .grid import DiscGrid
from .sphere_bundle import (FiberFunction, apply_X, cross_terms, pestov_check,
                            pestov_localized_check, solve_transport)
from .tensor_fields import (AnalyticTensor, GaussianPolynomial, SymTensorField, contract,
                            random_tensor, sym_derivative)
from .xray import (FanBeamLattice, ParallelGrid, fourier_slice_residual, radon_parallel,
                   radon_sharp_identity, stability_ratios, xray_transform)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DEFAULT_TOLERANCES",
    "RADON_PRESETS",
    "worker_count",
    "coeff_table",
    "generic_fiber",
    "mode_fiber",
    "run_pestov",
    "run_radon_sharp",
    "run_xray",
    "run_stability_sweep",
    "run_transport_check",
]

DEFAULT_TOLERANCES = {
    "coeff": 1e-10,
    "pestov_residual": 1e-2,
    "pestov_order": 1.8,
    "fourier_slice": 1e-6,
    "radon_sharp": 1e-4,
    "transport_trace": 1e-6,
    "transport_order": 1.8,
    "stability_drift": 0.05,
    "pure_potential": 1e-4,
}

RADON_PRESETS = {
    "centered": "exp(-(x**2 + y**2))",
    "shifted": "exp(-((x - 1)**2/0.5 + (y + 0.7)**2))",
    "pair": "exp(-(x**2 + y**2)) + 0.5*exp(-2*((x - 1.5)**2 + (y - 1)**2))",
    "zero": "0*x",
}

WORKERS_ENV = "TENSORTOMO_WORKERS"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration (usage error)."""


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(n, 1)


@dataclass
class ExperimentConfig:
    """Parameters shared by all experiment drivers.

    ``levels`` is the spatial refinement ladder (values of ``N``); the ray
    step and boundary lattice scale with it.  ``field`` selects the tensor
    fields: ``"random"`` (seeded), ``"potential"`` (``d^s p`` with seeded
    ``p`` vanishing on the boundary) or a list of component expressions.
    """

    metric: object = "euclidean"
    m: int = 0
    levels: list = dc_field(default_factory=lambda: [32, 64, 128])
    n_theta: int = 64
    step: float = 0.01
    field: object = "random"
    seed: int | None = 0
    samples: int = 1
    fiber_degrees: list = dc_field(default_factory=lambda: [1, 2, 3])
    radon_n: int = 512
    radon_radius: float = 6.0
    radon_angles: int = 64
    radon_presets: list = dc_field(default_factory=lambda: ["centered", "shifted", "pair"])
    tolerances: dict = dc_field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        self.tolerances = {**DEFAULT_TOLERANCES, **(self.tolerances or {})}
        self.validate()

    def validate(self) -> None:
        bad = [k for k, v in self.tolerances.items() if not (isinstance(v, (int, float)) and v > 0)]
        if bad:
            raise ConfigError(f"tolerances must be positive: {bad}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        if self.m not in (0, 1, 2):
            raise ConfigError("m must be 0, 1 or 2")
        if not self.levels or any(int(n) < 8 for n in self.levels) or list(self.levels) != sorted(self.levels):
            raise ConfigError("levels must be an ascending list of resolutions >= 8")
        if self.field in ("random", "potential") and self.seed is None:
            raise ConfigError("a seed is required for random fields")
        if self.samples < 1 or self.n_theta < 8 or self.step <= 0:
            raise ConfigError("samples >= 1, n_theta >= 8 and step > 0 are required")
        for name in self.radon_presets:
            if name not in RADON_PRESETS:
                raise ConfigError(f"unknown radon preset {name!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, required=()) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        missing = [k for k in required if k not in data]
        if missing:
            raise ConfigError(f"missing config field(s): {', '.join(missing)}")
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(extra))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str, required=()) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data, required)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def build_metric(self):
        metric = metric_from_spec(self.metric)
        metric.audit()
        return metric

    def step_for(self, n: int) -> float:
        """Ray step at resolution ``n``; ``step`` applies to the finest level."""
        return self.step * self.levels[-1] / n


def _report(config: ExperimentConfig, kind: str, passed: bool, **body) -> dict:
    return {"experiment": kind, "config_hash": config.hash(), "passed": bool(passed), **body}


def _order(errors) -> list:
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(v) for v in np.log2(e[:-1] / e[1:])]


# -- coefficients ------------------------------------------------------------
def coeff_table(d: int, l_max: int, m: int = 1, k_max: int = 20, tol: float = 1e-10):
    """Rows ``(quantity, d, l, m, k, value)`` and whether all identity checks pass."""
    if d < 2 or l_max < 1 or m < 1 or k_max < 0:
        raise ConfigError("need d >= 2, l_max >= 1, m >= 1, k_max >= 0")
    rows = []
    ok = True
    cap = 0.25 if d == 2 or d >= 6 else 1.0 / 3.0
    for l in range(0, l_max + 1):
        rows.append(("lambda", d, l, "", "", coeffs.lam(d, l)))
        rows.append(("alpha", d, l, "", "", coeffs.alpha(d, l)))
        if l < 1:
            continue
        a = coeffs.alpha(d, l)
        gap = abs(a - coeffs.alpha_closed_form(d, l)) / a
        mir = abs(coeffs.miraculous_identity_residual(d, l)) / max(1.0, coeffs.lam(d, l))
        ds = coeffs.d_squared(d, l)
        ds_gap = abs(ds - coeffs.beta(d, l + 1) / coeffs.alpha(d, l - 1)) / max(ds, 1.0)
        shift = coeffs.lam(d, l + 1) / coeffs.alpha(d, l) ** 2
        rows += [
            ("beta", d, l, "", "", coeffs.beta(d, l)),
            ("d_squared", d, l, "", "", ds),
            ("alpha_closed_form_gap", d, l, "", "", gap),
            ("miraculous_residual", d, l, "", "", mir),
            ("d_squared_gap", d, l, "", "", ds_gap),
            ("case_bound_excess", d, l + 1, "", "", max(shift / cap - 1.0, 0.0)),
        ]
        ok &= gap <= tol and mir <= tol and ds_gap <= tol and shift <= cap * (1 + tol)
    table = coeffs.CoeffContext(d, m).b_table(k_max)
    g_even = 1.0
    for k, bk in enumerate(table):
        j = k // 2
        if k % 2 == 0 and j > 0:
            g_even *= coeffs.d_squared(d, m + 2 * (j - 1))
        excess = coeffs.lam(d, m + k) * bk * bk - 1.0
        rows.append(("b", d, "", m, k, bk))
        rows.append(("gamma", d, "", m, j, g_even))
        rows.append(("lambda_b2_excess", d, "", m, k, max(excess, 0.0)))
        ok &= excess <= tol and g_even <= coeffs.c(d) * (1 + tol)
    return rows, bool(ok)


# -- fiber test functions ----------------------------------------------------
def _smooth_coefficient(rng: np.random.Generator) -> GaussianPolynomial:
    coef = rng.normal(size=(3, 3)) / np.add.outer(np.arange(3), np.arange(3)).clip(1)
    coef[np.add.outer(np.arange(3), np.arange(3)) > 2] = 0.0
    ang = rng.uniform(0, 2 * np.pi)
    rad = 0.4 * np.sqrt(rng.uniform())
    return GaussianPolynomial(coef, (rad * np.cos(ang), rad * np.sin(ang)), width=rng.uniform(0.7, 1.1))


def generic_fiber(seed: int, max_degree: int = 3):
    """Seeded smooth ``u(x, theta) = sum_k a_k(x) cos k theta + b_k(x) sin k theta``."""
    rng = np.random.default_rng(seed)
    terms = [(k, _smooth_coefficient(rng), _smooth_coefficient(rng)) for k in range(max_degree + 1)]

    def u(x, y, th):
        out = 0.0
        for k, a, b_ in terms:
            out = out + a.value(x, y) * np.cos(k * th) + b_.value(x, y) * np.sin(k * th)
        return out

    return u


def mode_fiber(l: int, seed: int):
    """Seeded smooth function of pure fiber degree ``l``."""
    rng = np.random.default_rng(seed)
    a, b_ = _smooth_coefficient(rng), _smooth_coefficient(rng)
    if l == 0:
        return lambda x, y, th: a.value(x, y) + 0.0 * th
    return lambda x, y, th: a.value(x, y) * np.cos(l * th) + b_.value(x, y) * np.sin(l * th)


# -- Pestov ------------------------------------------------------------------
def run_pestov(config: ExperimentConfig) -> dict:
    """Plain and localized Pestov identities over the refinement ladder."""
    metric = config.build_metric()
    tol = config.tolerances
    levels = []
    u_fun = generic_fiber(config.seed)
    for n in config.levels:
        grid = DiscGrid.from_resolution(n)
        u = FiberFunction.from_callable(grid, u_fun, config.n_theta)
        levels.append({"N": n, **pestov_check(metric, u).as_dict()})
    orders = _order([abs(r["residual"]) for r in levels])
    grid = DiscGrid.from_resolution(config.levels[-1])
    localized, modes = [], {}
    for l in config.fiber_degrees:
        modes[l] = FiberFunction.from_callable(grid, mode_fiber(l, config.seed + 1 + l), config.n_theta)
        localized.append(pestov_localized_check(metric, l, modes[l]).as_dict())
    cross = []
    degs = sorted(modes)
    for i, a in enumerate(degs):
        for b_ in degs[i + 1:]:
            cross.append({"l": a, "k": b_, **cross_terms(metric, modes[a], modes[b_])})
    final = levels[-1]["relative_residual"]
    passed = (final <= tol["pestov_residual"]
              and (len(orders) == 0 or min(orders) >= tol["pestov_order"])
              and all(r["relative_residual"] <= tol["pestov_residual"] for r in localized)
              and all(max(c["boundary"], c["curvature"], c["z"]) <= 1e-8 for c in cross))
    return _report(config, "pestov-check", passed, metric=str(metric.name), levels=levels,
                   orders=orders, localized=localized, cross_terms=cross)


# -- Radon -------------------------------------------------------------------
def _expr_callable(expr: str):
    from .tensor_fields import AnalyticTensor

    f = AnalyticTensor.from_expressions(0, [expr])
    return lambda x, y: f(x, y)[0]


def run_radon_sharp(config: ExperimentConfig) -> dict:
    """Fourier slice residual and sharp identity gap for each Radon preset."""
    grid = ParallelGrid(config.radon_n, config.radon_radius)
    tol = config.tolerances
    rows = []
    passed = True
    for name in config.radon_presets:
        values = grid.sample(_expr_callable(RADON_PRESETS[name]))
        s, phi, rf = radon_parallel(values, grid, config.radon_angles)
        slice_res = fourier_slice_residual(values, grid, s, phi, rf)
        sharp = radon_sharp_identity(values, grid, rf=(s, phi, rf))
        ok = (slice_res <= tol["fourier_slice"] and sharp["relative_gap"] <= tol["radon_sharp"]
              and sharp["margin"] >= 0)
        passed &= ok
        rows.append({"preset": name, "fourier_slice_residual": slice_res, **sharp, "passed": ok})
    return _report(config, "radon-sharp", passed, N=config.radon_n, radius=config.radon_radius,
                   presets=rows)


# -- fields ------------------------------------------------------------------
def build_fields(config: ExperimentConfig, grid: DiscGrid, metric, count: int | None = None):
    """Tensor fields of rank ``config.m`` per the ``field`` entry."""
    count = config.samples if count is None else count
    if isinstance(config.field, list):
        return [SymTensorField.from_analytic(grid, AnalyticTensor.from_expressions(config.m, config.field))]
    rng = np.random.default_rng(config.seed)
    if config.field == "random":
        return [SymTensorField.from_analytic(grid, random_tensor(config.m, rng, metric.radius))
                for _ in range(count)]
    if config.field == "potential":
        if config.m == 0:
            raise ConfigError("potential fields need m >= 1")
        out = []
        for _ in range(count):
            p = random_tensor(config.m - 1, rng, metric.radius, vanish_on_boundary=True)
            out.append(sym_derivative(SymTensorField.from_analytic(grid, p), metric))
        return out
    raise ConfigError(f"unknown field kind {config.field!r}")


def run_xray(config: ExperimentConfig) -> dict:
    """Sinograms of the configured fields at the finest level."""
    metric = config.build_metric()
    n = config.levels[-1]
    grid = DiscGrid.from_resolution(n)
    lattice = FanBeamLattice(metric, n, n)
    fields_ = build_fields(config, grid, metric)
    sinos = xray_transform(metric, fields_, lattice, config.step_for(n))
    return _report(config, "xray", True, metric=str(metric.name), n_s=n, n_theta=n,
                   length=lattice.length,
                   sinogram_l2=[s.incoming_l2() for s in sinos]), sinos


def _sweep_level(args):
    config, metric, n = args
    grid = DiscGrid.from_resolution(n)
    lattice = FanBeamLattice(metric, n, n)
    fields_ = build_fields(config, grid, metric)
    return stability_ratios(metric, fields_, grid, lattice, config.step_for(n),
                            pot_tol=config.tolerances["pure_potential"])


def run_stability_sweep(config: ExperimentConfig) -> dict:
    """Stability ratios of all samples at every level, with refinement drift."""
    metric = config.build_metric()
    jobs = [(config, metric, n) for n in config.levels]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_level = list(pool.map(_sweep_level, jobs))
    else:
        per_level = [_sweep_level(j) for j in jobs]
    records, summary = [], []
    violations = 0
    for n, recs in zip(config.levels, per_level):
        ratios = np.array([r.ratio for r in recs if r.ratio is not None])
        violations += sum(r.flag == "violation" for r in recs)
        for i, r in enumerate(recs):
            records.append({"N": n, "sample": i, **r.as_dict()})
        row = {"N": n, "count": len(recs), "finite": int(np.isfinite(ratios).sum()),
               "pure_potential": sum(r.flag == "pure potential" for r in recs)}
        if ratios.size:
            q = np.quantile(ratios, [0.0, 0.5, 0.9, 1.0])
            row.update(min=float(q[0]), median=float(q[1]), q90=float(q[2]), max=float(q[3]))
        summary.append(row)
    maxima = [row["max"] for row in summary if "max" in row]
    drift = [abs(b_ - a) / b_ for a, b_ in zip(maxima[:-1], maxima[1:])]
    passed = violations == 0 and all(d <= config.tolerances["stability_drift"] for d in drift)
    return _report(config, "stability-sweep", passed, metric=str(metric.name), m=config.m,
                   summary=summary, drift=drift, violations=int(violations)), records


# -- transport ---------------------------------------------------------------
def run_transport_check(config: ExperimentConfig) -> dict:
    """``u^f`` boundary trace versus the X-ray transform, and ``X u^f = -f`` ladder."""
    metric = config.build_metric()
    tol = config.tolerances
    rows = []
    trace_gap = None
    for n in config.levels:
        grid = DiscGrid.from_resolution(n)
        f = build_fields(config, grid, metric, count=1)[0]
        step = config.step_for(n)
        n_theta = max(config.n_theta * n // config.levels[-1], 16)
        u = solve_transport(metric, f, n_theta, step)
        xu = apply_X(metric, u)
        th = u.theta[None, None, :]
        lf = contract(f.values[..., None], metric, grid.x[..., None], grid.y[..., None], th)
        interior = grid.restrict_interior(0.7)
        err = np.abs(xu.values + lf)[interior].max()
        rows.append({"N": n, "n_theta": n_theta, "step": step,
                     "transport_residual": float(err / np.abs(lf).max())})
        if n == config.levels[-1]:
            lat = FanBeamLattice.at_boundary_nodes(metric, grid.psi, u.theta)
            sino = xray_transform(metric, f, lat, step / 2)
            ring = u.values[-1]
            mask = lat.traced
            scale = max(np.abs(sino.values[mask]).max(), 1e-300)
            trace_gap = float(np.abs(ring[mask] - sino.values[mask]).max() / scale)
            outgoing = float(np.abs(ring[lat.mu > 0]).max(initial=0.0))
    orders = _order([r["transport_residual"] for r in rows])
    passed = (trace_gap <= tol["transport_trace"] and outgoing <= 1e-8
              and (len(orders) == 0 or min(orders) >= tol["transport_order"]))
    return _report(config, "transport-check", passed, metric=str(metric.name), levels=rows,
                   orders=orders, trace_gap=trace_gap, outgoing_max=outgoing)
