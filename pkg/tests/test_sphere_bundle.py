import numpy as np
import pytest

from tensortomo import DiscGrid, metric_from_spec
from tensortomo.boundary_calculus import p_form
from tensortomo.experiments import generic_fiber, mode_fiber
from tensortomo.sphere_bundle import (FiberFunction, ModePurityError, SpectralGuardError, apply_V,
                                      apply_X, apply_X_perp, cross_terms, pestov_check,
                                      pestov_localized_check, solve_transport, split_X, z_project)
from tensortomo.tensor_fields import AnalyticTensor, SymTensorField, ell_m, random_tensor


def _fiber(n, seed=0, n_theta=32, max_degree=3):
    return FiberFunction.from_callable(DiscGrid.from_resolution(n), generic_fiber(seed, max_degree),
                                       n_theta)


def test_vertical_commutators_exact():
    metric = metric_from_spec("quadratic")
    u = _fiber(32)
    vx = apply_V(apply_X(metric, u)).values - apply_X(metric, apply_V(u)).values
    np.testing.assert_allclose(vx, apply_X_perp(metric, u).values, atol=1e-11)
    vxp = apply_V(apply_X_perp(metric, u)).values - apply_X_perp(metric, apply_V(u)).values
    np.testing.assert_allclose(vxp, -apply_X(metric, u).values, atol=1e-11)


def test_horizontal_commutator_converges_to_curvature():
    metric = metric_from_spec("quadratic")
    errs = []
    for n in (32, 64):
        u = _fiber(n)
        lhs = apply_X(metric, apply_X_perp(metric, u)).values - apply_X_perp(metric, apply_X(metric, u)).values
        K = metric.curvature(u.grid.x, u.grid.y)[..., None]
        errs.append(np.abs(lhs - K * apply_V(u).values).max())
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 6


def test_degree_projections_and_guard():
    u = _fiber(16, n_theta=16)
    total = sum(u.degree(l).values for l in range(9))
    np.testing.assert_allclose(total, u.values, atol=1e-13)
    assert u.guard_fraction() < 1e-20
    u.check_guard()
    v = FiberFunction.from_callable(u.grid, lambda x, y, t: np.cos(7 * t) + x, 16)
    with pytest.raises(SpectralGuardError):
        v.check_guard()
    with pytest.raises(ModePurityError):
        u.pure_degree()
    assert u.degree(2).pure_degree() == 2
    with pytest.raises(ValueError):
        FiberFunction(u.grid, np.zeros((3, 3, 3)))


def test_measure():
    grid = DiscGrid.from_resolution(64)
    one = FiberFunction(grid, np.ones(grid.shape + (8,)))
    assert one.norm_sq(metric_from_spec("euclidean")) == pytest.approx(2 * np.pi ** 2, rel=1e-3)


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_split_X_raises_and_lowers_degree(l):
    metric = metric_from_spec("bump")
    grid = DiscGrid.from_resolution(32)
    u = FiberFunction.from_callable(grid, mode_fiber(l, 4), 32)
    plus, minus = split_X(metric, u)
    np.testing.assert_allclose((plus + minus).values, apply_X(metric, u).values, atol=1e-12)
    assert plus.pure_degree(1e-20) == l + 1
    if l == 0:
        assert np.abs(minus.values).max() == 0
    else:
        assert minus.pure_degree(1e-20) == l - 1


def test_boundary_trace_of_spatial_function():
    metric = metric_from_spec("quadratic")
    grid = DiscGrid.from_resolution(32)
    u = FiberFunction.from_callable(grid, lambda x, y, t: x + 0 * t, 8)
    tr = u.boundary_trace(metric, n_s=20)
    from tensortomo import BoundaryChart

    psi = BoundaryChart(metric).psi_of_s(tr.s)
    np.testing.assert_allclose(tr.values, np.cos(psi)[:, None].repeat(8, 1), atol=1e-12)


def test_boundary_form_vanishes_on_degree_zero():
    metric = metric_from_spec("quadratic")
    u = FiberFunction.from_callable(DiscGrid.from_resolution(32), mode_fiber(0, 2), 16)
    tr = u.boundary_trace(metric)
    assert p_form(metric, tr, tr) == 0.0
    rep = pestov_localized_check(metric, 0, u)
    assert rep.boundary == 0.0 and rep.relative_residual < 1e-2


@pytest.mark.parametrize("name", ["euclidean", "quadratic"])
def test_pestov_identity_converges(name):
    metric = metric_from_spec(name)
    res = []
    for n in (32, 64):
        rep = pestov_check(metric, _fiber(n, seed=1))
        res.append(abs(rep.residual))
        assert rep.curvature >= 0
    assert rep.relative_residual < 1e-2
    assert np.log2(res[0] / res[1]) > 1.8


def test_localized_identity_and_cross_terms():
    metric = metric_from_spec("quadratic")
    grid = DiscGrid.from_resolution(64)
    modes = {l: FiberFunction.from_callable(grid, mode_fiber(l, 10 + l), 32) for l in (1, 2, 3)}
    for l, u in modes.items():
        assert pestov_localized_check(metric, l, u).relative_residual < 1e-2
    with pytest.raises(ModePurityError):
        pestov_localized_check(metric, 2, modes[1])
    ct = cross_terms(metric, modes[1], modes[3])
    assert max(ct.values()) < 1e-8
    # Z only sees degree one
    assert np.abs(z_project(metric, modes[3])).max() < 1e-12


def test_transport_euclidean_exit_time():
    metric = metric_from_spec("euclidean")
    grid = DiscGrid.from_resolution(16)
    one = AnalyticTensor(0, lambda x, y: np.ones((1,) + np.shape(x)))
    f = SymTensorField.from_analytic(grid, one)
    u = solve_transport(metric, f, 12, step=0.05)
    th = u.theta[None, None, :]
    xv = grid.x[..., None] * np.cos(th) + grid.y[..., None] * np.sin(th)
    tau = -xv + np.sqrt(xv ** 2 + 1 - grid.R[..., None] ** 2)
    np.testing.assert_allclose(u.values, tau, atol=1e-10)


def test_transport_equation_residual():
    metric = metric_from_spec("quadratic")
    grid = DiscGrid.from_resolution(64)
    f = SymTensorField.from_analytic(grid, random_tensor(1, np.random.default_rng(0)))
    u = solve_transport(metric, f, 32, step=0.01)
    xu = apply_X(metric, u)
    lf = ell_m(f, metric, 32)
    mask = grid.restrict_interior(0.7)
    assert np.abs(xu.values + lf.values)[mask].max() < 2e-3 * np.abs(lf.values).max()


def test_X_is_derivative_along_the_flow():
    from tensortomo.geometry import trace_rays

    metric = metric_from_spec("bump")
    u_fun = generic_fiber(5)
    u = FiberFunction.from_callable(DiscGrid.from_resolution(64), u_fun, 32)
    xu = apply_X(metric, u)
    i, j, k = 10, 7, 5
    x0, y0, t0 = u.grid.x[i, j], u.grid.y[i, j], u.theta[k]
    h = 1e-3
    fwd = trace_rays(metric, [x0], [y0], [t0], step=h / 4, record_path=True).path[4]
    back = trace_rays(metric, [x0], [y0], [t0 + np.pi], step=h / 4, record_path=True).path[4]
    up = u_fun(fwd[1][0], fwd[2][0], fwd[3][0])
    down = u_fun(back[1][0], back[2][0], back[3][0] - np.pi)
    assert xu.values[i, j, k] == pytest.approx((up - down) / (2 * h), abs=1e-5)


@pytest.mark.parametrize("m", [1, 2])
def test_intertwining_with_symmetric_derivative(m):
    from tensortomo.tensor_fields import sym_derivative

    metric = metric_from_spec("quadratic")
    errs = []
    for n in (32, 64):
        grid = DiscGrid.from_resolution(n)
        p = SymTensorField.from_analytic(grid, random_tensor(m - 1, np.random.default_rng(m)))
        lhs = apply_X(metric, ell_m(p, metric, 16)).values
        rhs = ell_m(sym_derivative(p, metric), metric, 16).values
        mask = grid.restrict_interior(0.9)
        errs.append(np.abs(lhs - rhs)[mask].max() / np.abs(rhs).max())
    assert errs[1] < 1e-4 and errs[0] / errs[1] > 4
