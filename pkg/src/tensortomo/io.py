"""CSV and binary (JSON header + raw float64) persistence."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .boundary_calculus import BoundaryFunction
from .grid import DiscGrid
from .tensor_fields import SymTensorField

__all__ = [
    "write_tensor_csv",
    "read_tensor_csv",
    "write_boundary_csv",
    "read_boundary_csv",
    "write_array",
    "read_array",
    "save_fiber",
    "load_fiber",
]

_MAGIC = b"TTOMO1\n"
_COMPONENTS = {0: ["f"], 1: ["f1", "f2"], 2: ["f11", "f12", "f22"]}


def write_tensor_csv(path, field: SymTensorField) -> None:
    """One row per grid node: ``i_r, i_psi, x, y`` then the components."""
    g = field.grid
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_r={g.n_r} n_psi={g.n_psi} radius={g.radius!r} m={field.m}\n")
        w = csv.writer(fh)
        w.writerow(["i_r", "i_psi", "x", "y"] + _COMPONENTS[field.m])
        for i in range(g.n_r + 1):
            for j in range(g.n_psi):
                w.writerow([i, j, repr(float(g.x[i, j])), repr(float(g.y[i, j]))]
                           + [repr(float(c[i, j])) for c in field.values])


def read_tensor_csv(path) -> SymTensorField:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing grid header line")
        meta = dict(item.split("=") for item in header[1:].split())
        rows = list(csv.DictReader(fh))
    m = int(meta["m"])
    grid = DiscGrid(int(meta["n_r"]), int(meta["n_psi"]), float(meta["radius"]))
    vals = np.zeros((m + 1,) + grid.shape)
    seen = np.zeros(grid.shape, dtype=bool)
    for row in rows:
        i, j = int(row["i_r"]), int(row["i_psi"])
        for k, name in enumerate(_COMPONENTS[m]):
            vals[k, i, j] = float(row[name])
        seen[i, j] = True
    if not seen.all():
        raise ValueError("CSV does not cover every grid node")
    return SymTensorField(grid, m, vals)


def write_boundary_csv(path, u: BoundaryFunction) -> None:
    """Rows ``s_index, theta_index, value`` after a ``# length=`` header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# length={u.length!r} n_s={u.n_s} n_theta={u.n_theta}\n")
        w = csv.writer(fh)
        w.writerow(["s_index", "theta_index", "value"])
        for i in range(u.n_s):
            for j in range(u.n_theta):
                w.writerow([i, j, repr(float(u.values[i, j]))])


def read_boundary_csv(path) -> BoundaryFunction:
    with open(path, newline="") as fh:
        meta = dict(item.split("=") for item in fh.readline()[1:].split())
        rows = list(csv.DictReader(fh))
    vals = np.zeros((int(meta["n_s"]), int(meta["n_theta"])))
    for row in rows:
        vals[int(row["s_index"]), int(row["theta_index"])] = float(row["value"])
    return BoundaryFunction(vals, float(meta["length"]))


def write_array(path, array: np.ndarray, header: dict) -> None:
    """Magic line, 4-byte header length, JSON header, little-endian float64 data."""
    array = np.ascontiguousarray(array, dtype="<f8")
    head = dict(header, shape=list(array.shape), dtype="<f8")
    blob = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(array.tobytes())


def read_array(path):
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError("not a tensortomo array file")
    off = len(_MAGIC)
    (n,) = struct.unpack("<I", data[off:off + 4])
    header = json.loads(data[off + 4:off + 4 + n])
    arr = np.frombuffer(data[off + 4 + n:], dtype=header["dtype"]).reshape(header["shape"])
    return arr.copy(), header


def save_fiber(path, u, metric_hash: str = "") -> None:
    """Persist a :class:`~tensortomo.sphere_bundle.FiberFunction`."""
    write_array(path, u.values, {"kind": "fiber", "grid": u.grid.key(), "metric": metric_hash})


def load_fiber(path):
    from .sphere_bundle import FiberFunction

    arr, header = read_array(path)
    if header.get("kind") != "fiber":
        raise ValueError("file does not hold a fiber function")
    g = header["grid"]
    return FiberFunction(DiscGrid(g["n_r"], g["n_psi"], g["radius"]), arr), header
