import numpy as np
import pytest

from tensortomo import DiscGrid
from tensortomo.boundary_calculus import random_boundary_function
from tensortomo.io import (load_fiber, read_array, read_boundary_csv, read_tensor_csv, save_fiber,
                           write_array, write_boundary_csv, write_tensor_csv)
from tensortomo.sphere_bundle import FiberFunction
from tensortomo.tensor_fields import SymTensorField, random_tensor


@pytest.mark.parametrize("m", [0, 1, 2])
def test_tensor_csv_roundtrip(tmp_path, m):
    grid = DiscGrid.from_resolution(8, radius=1.5)
    f = SymTensorField.from_analytic(grid, random_tensor(m, np.random.default_rng(m), radius=1.5))
    path = tmp_path / "f.csv"
    write_tensor_csv(path, f)
    g = read_tensor_csv(path)
    assert g.m == m and g.grid.key() == grid.key()
    np.testing.assert_array_equal(g.values, f.values)


def test_tensor_csv_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("i_r,i_psi,x,y,f\n")
    with pytest.raises(ValueError):
        read_tensor_csv(path)


def test_boundary_csv_roundtrip(tmp_path):
    u = random_boundary_function(np.random.default_rng(1), 5.0, n_s=16, n_theta=16, max_s_freq=4,
                                 max_degree=4)
    write_boundary_csv(tmp_path / "u.csv", u)
    v = read_boundary_csv(tmp_path / "u.csv")
    assert v.length == 5.0
    np.testing.assert_array_equal(v.values, u.values)


def test_binary_roundtrip(tmp_path):
    arr = np.random.default_rng(0).normal(size=(3, 4, 5))
    write_array(tmp_path / "a.bin", arr, {"kind": "test"})
    back, header = read_array(tmp_path / "a.bin")
    np.testing.assert_array_equal(back, arr)
    assert header["kind"] == "test" and header["shape"] == [3, 4, 5]
    (tmp_path / "junk.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_array(tmp_path / "junk.bin")


def test_fiber_roundtrip(tmp_path):
    grid = DiscGrid.from_resolution(8)
    u = FiberFunction.from_callable(grid, lambda x, y, t: x * np.cos(t) + y, 8)
    save_fiber(tmp_path / "u.bin", u, "abc")
    v, header = load_fiber(tmp_path / "u.bin")
    assert header["metric"] == "abc"
    np.testing.assert_array_equal(v.values, u.values)
    write_array(tmp_path / "other.bin", np.zeros(2), {"kind": "other"})
    with pytest.raises(ValueError):
        load_fiber(tmp_path / "other.bin")
