"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line; the lines are
collected again in the terminal summary.  The full module takes about seven
minutes on one core, dominated by the stability sweep.
"""
import time

import numpy as np
import pytest

from tensortomo import BoundaryChart, DiscGrid, coeffs, metric_from_spec
from tensortomo.boundary_calculus import (KEY_INEQUALITY_SLACK, h1t_norm, h_half_inequality_check,
                                          random_boundary_function)
from tensortomo.experiments import (RADON_PRESETS, ExperimentConfig, _expr_callable, run_pestov,
                                    run_stability_sweep, run_transport_check)
from tensortomo.tensor_fields import SymTensorField, h1_norm, random_tensor, sym_derivative
from tensortomo.xray import (FanBeamLattice, ParallelGrid, fourier_slice_residual, radon_parallel,
                             radon_sharp_identity, xray_transform)

CURVED = "quadratic"  # phi = |x|^2 / 4, K < 0


@pytest.fixture(scope="module")
def pestov_reports():
    cfg = dict(levels=[32, 64, 128], n_theta=64, seed=0, fiber_degrees=[1, 2, 3])
    out = {}
    for name in ("euclidean", CURVED):
        t0 = time.perf_counter()
        out[name] = run_pestov(ExperimentConfig(metric=name, **cfg))
        out[name]["runtime"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def radon_grid():
    return ParallelGrid(512, 6.0)


def test_criterion_01_coefficient_identities(criterion):
    t0 = time.perf_counter()
    worst = {}
    for d in range(2, 11):
        for key, val in coeffs.identity_suite(d, 10_000, m_values=(1, 2, 3), k_max=10_000).items():
            worst[key] = max(worst.get(key, -np.inf), val)
    elapsed = time.perf_counter() - t0
    ok = all(v <= 1e-10 for v in worst.values()) and elapsed < 5.0
    criterion(1, "coefficient identities, d = 2..10, l = 1..10^4", ok,
              f"max residual {max(worst.values()):.1e}, {elapsed:.2f} s")
    assert ok, worst


def test_criterion_02_fourier_slice(criterion, radon_grid):
    t0 = time.perf_counter()
    vals = radon_grid.sample(_expr_callable(RADON_PRESETS["centered"]))
    s, phi, rf = radon_parallel(vals, radon_grid, 64)
    res = fourier_slice_residual(vals, radon_grid, s, phi, rf)
    elapsed = time.perf_counter() - t0
    ok = res <= 1e-6 and elapsed < 30.0
    criterion(2, "Fourier slice, Gaussian, radius 6, N = 512", ok, f"residual {res:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_sharp_radon_identity(criterion, radon_grid):
    gaps, margins = [], []
    for name in ("centered", "shifted", "pair"):
        vals = radon_grid.sample(_expr_callable(RADON_PRESETS[name]))
        out = radon_sharp_identity(vals, radon_grid, n_angles=64)
        gaps.append(out["relative_gap"])
        margins.append(out["margin"])
    ok = max(gaps) <= 1e-4 and min(margins) >= 0
    criterion(3, "sharp Radon identity, 3 Gaussian presets", ok,
              f"max gap {max(gaps):.1e}, min margin {min(margins):.3f}")
    assert ok


def test_criterion_04_pestov_identity(criterion, pestov_reports):
    details, ok = [], True
    for name, rep in pestov_reports.items():
        final = rep["levels"][-1]["relative_residual"]
        order = min(rep["orders"])
        ok &= final <= 1e-2 and order >= 1.8 and rep["runtime"] < 300
        details.append(f"{name}: {final:.1e}, order {order:.2f}")
    criterion(4, "Pestov identity with boundary term, N = 128, N_theta = 64", ok, "; ".join(details))
    assert ok


def test_criterion_05_localized_pestov(criterion, pestov_reports):
    res, cross = [], []
    for rep in pestov_reports.values():
        res += [r["relative_residual"] for r in rep["localized"]]
        cross += [max(c["boundary"], c["curvature"], c["z"]) for c in rep["cross_terms"]]
    ok = max(res) <= 1e-2 and max(cross) <= 1e-8
    criterion(5, "localized Pestov identity l = 1, 2, 3 and cross terms", ok,
              f"max residual {max(res):.1e}, max cross term {max(cross):.1e}")
    assert ok


def test_criterion_06_h1t_localization(criterion):
    worst = 0.0
    for name in ("euclidean", CURVED):
        metric = metric_from_spec(name)
        length = BoundaryChart(metric).length
        for seed in range(20):
            u = random_boundary_function(np.random.default_rng(seed), length)
            whole = h1t_norm(metric, u)
            parts = sum(h1t_norm(metric, u.fiber_degree(k)) for k in range(u.n_theta // 2 + 1))
            worst = max(worst, abs(whole - parts) / whole)
    ok = worst <= 1e-8
    criterion(6, "H^1_T norm splits over fiber degrees, 20 seeds", ok, f"max gap {worst:.1e}")
    assert ok


def test_criterion_07_transport_consistency(criterion):
    gaps, orders = [], []
    for name in ("euclidean", CURVED):
        for m in (0, 1, 2):
            rep = run_transport_check(ExperimentConfig(metric=name, m=m, levels=[32, 64], seed=0))
            gaps.append(max(rep["trace_gap"], rep["outgoing_max"]))
            orders.append(min(rep["orders"]))
    ok = max(gaps) <= 1e-6 and min(orders) >= 1.8
    criterion(7, "transport solution trace equals X-ray transform", ok,
              f"max trace gap {max(gaps):.1e}, min order {min(orders):.2f}")
    assert ok


def test_criterion_08_potential_kernel(criterion):
    metric = metric_from_spec(CURVED)
    grid = DiscGrid.from_resolution(128)
    lattice = FanBeamLattice(metric, 128, 128)
    worst = 0.0
    for m, seeds in ((1, range(0, 50)), (2, range(50, 100))):
        ps = [SymTensorField.from_analytic(
            grid, random_tensor(m - 1, np.random.default_rng(s), vanish_on_boundary=True)) for s in seeds]
        sinos = xray_transform(metric, [sym_derivative(p, metric) for p in ps], lattice, step=0.01)
        worst = max(worst, max(s.incoming_l2() / h1_norm(p, metric) for s, p in zip(sinos, ps)))
    ok = worst <= 1e-4
    criterion(8, "X-ray transform annihilates potentials, 100 pairs, N = 128", ok,
              f"max ratio {worst:.1e}")
    assert ok


def test_criterion_09_key_inequality(criterion):
    worst = 0.0
    for seed in range(200):
        u = random_boundary_function(np.random.default_rng(seed), 2 * np.pi)
        for m in (1, 2, 3):
            lhs, rhs = h_half_inequality_check(None, m, u)
            worst = max(worst, lhs / rhs)
    ok = worst <= KEY_INEQUALITY_SLACK
    criterion(9, "boundary key inequality, 200 seeds", ok,
              f"max ratio {worst:.3f}, frozen slack {KEY_INEQUALITY_SLACK}")
    assert ok


def test_criterion_10_stability(criterion):
    ok, details = True, []
    for name in ("euclidean", CURVED):
        for m in (0, 1, 2):
            cfg = ExperimentConfig(metric=name, m=m, levels=[64, 128], samples=50, seed=1000 + m)
            rep, records = run_stability_sweep(cfg)
            finite = all(r["ratio"] is not None and np.isfinite(r["ratio"]) for r in records)
            ok &= rep["passed"] and finite and rep["violations"] == 0
            details.append(f"{name[0]}{m}: drift {rep['drift'][0]:.3f}")
    criterion(10, "stability ratios, m = 0, 1, 2, 50 fields, two levels", ok, ", ".join(details))
    assert ok
