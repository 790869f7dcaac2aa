import numpy as np
import pytest

from tensortomo import DiscGrid


def _smooth(x, y):
    return np.exp(0.7 * x - 0.4 * y) * np.sin(1.3 * y + 0.2)


def _smooth_grad(x, y):
    f = np.exp(0.7 * x - 0.4 * y)
    return 0.7 * f * np.sin(1.3 * y + 0.2), f * (-0.4 * np.sin(1.3 * y + 0.2) + 1.3 * np.cos(1.3 * y + 0.2))


def test_shape_and_nodes():
    g = DiscGrid.from_resolution(32, radius=2.0)
    assert g.shape == (17, 32)
    assert g.r[0] == 0.0 and g.r[-1] == 2.0
    assert g.key() == {"n_r": 16, "n_psi": 32, "radius": 2.0}
    with pytest.raises(ValueError):
        DiscGrid(3, 16)
    with pytest.raises(ValueError):
        DiscGrid(8, 15)


def test_gradient_fourth_order():
    errs = []
    for n in (16, 32, 64):
        g = DiscGrid.from_resolution(n)
        gx, gy = g.gradient(g.sample(_smooth))
        ex, ey = _smooth_grad(g.x, g.y)
        errs.append(max(np.abs(gx - ex).max(), np.abs(gy - ey).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() > 3.5


def test_gradient_trailing_axes():
    g = DiscGrid.from_resolution(32)
    v = np.stack([g.sample(_smooth), 2 * g.sample(_smooth)], axis=-1)
    gx, _ = g.gradient(v)
    np.testing.assert_allclose(gx[..., 1], 2 * gx[..., 0], rtol=1e-13, atol=1e-13)


def test_angular_derivative_is_spectral():
    g = DiscGrid.from_resolution(32)
    v = np.cos(3 * g.PSI) * g.R
    np.testing.assert_allclose(g.d_psi(v), -3 * np.sin(3 * g.PSI) * g.R, atol=1e-12)


def test_quadrature_second_order():
    # int exp(x) over the unit disc = 2 pi I_1(1)
    from scipy.special import iv

    exact = 2 * np.pi * iv(1, 1.0)
    errs = [abs(g.integrate(np.exp(g.x)) - exact)
            for g in (DiscGrid.from_resolution(n) for n in (32, 64, 128))]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)
    assert DiscGrid.from_resolution(64).integrate(np.ones((33, 64))) == pytest.approx(np.pi, rel=1e-3)


def test_interior_mask():
    g = DiscGrid.from_resolution(16)
    mask = g.restrict_interior(0.5)
    assert mask[:5].all() and not mask[5:].any()
