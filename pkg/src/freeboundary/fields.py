"""Typed wrappers for grid fields and the plain-text snapshot format."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import DiskGrid

_NCOMP = {"scalar": 1, "vector": 2, "oneform": 2, "twoform": 1, "tensor": 4}


@dataclass(frozen=True)
class Field:
    grid: DiskGrid
    values: np.ndarray
    kind = "scalar"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        want = self._shape()
        if v.shape != want:
            raise ValueError(f"{self.kind} field expects shape {want}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")

    def _shape(self):
        n = _NCOMP[self.kind]
        return self.grid.shape if n == 1 else (n,) + self.grid.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


class ScalarField(Field):
    kind = "scalar"


class VectorField(Field):
    """Contravariant components W^a."""
    kind = "vector"


class OneForm(Field):
    """Covariant components w_a."""
    kind = "oneform"


class TwoForm(Field):
    """Antisymmetric beta_ab, stored as the single component beta_12."""
    kind = "twoform"

    def matrix(self) -> np.ndarray:
        b = self.values
        z = np.zeros_like(b)
        return np.array([[z, b], [-b, z]])


def values_of(obj) -> np.ndarray:
    return obj.values if isinstance(obj, Field) else np.asarray(obj, dtype=float)


def like(template, values, cls=None):
    """Wrap values as a Field if the template was one, else return the array."""
    if isinstance(template, Field):
        return (cls or type(template))(template.grid, values)
    return values


# -- snapshot format -----------------------------------------------------------

def dumps(grid: DiskGrid, values: np.ndarray, kind: str = "scalar") -> str:
    values = np.asarray(values, dtype=float)
    n = _NCOMP[kind]
    blocks = [values] if n == 1 else list(values.reshape((n,) + grid.shape))
    lines = [f"disk-field v1 {kind} {grid.n_r} {grid.n_theta}"]
    for block in blocks:
        for row in block:
            lines.append(" ".join(f"{v:.16e}" for v in row))
    return "\n".join(lines) + "\n"


def loads(text: str) -> tuple[DiskGrid, np.ndarray, str]:
    lines = text.strip("\n").split("\n")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "disk-field" or head[1] != "v1":
        raise ValueError("not a disk-field v1 snapshot")
    kind, n_r, n_theta = head[2], int(head[3]), int(head[4])
    grid = DiskGrid(n_r, n_theta)
    data = np.array([[float(t) for t in ln.split()] for ln in lines[1:]])
    n = _NCOMP[kind]
    if data.shape != (n * n_r, n_theta):
        raise ValueError("snapshot body does not match header")
    values = data if n == 1 else data.reshape((n, n_r, n_theta))
    if kind == "tensor":
        values = values.reshape((2, 2, n_r, n_theta))
    return grid, values, kind


def save(path, grid: DiskGrid, values: np.ndarray, kind: str = "scalar") -> None:
    Path(path).write_text(dumps(grid, values, kind))


def load(path) -> tuple[DiskGrid, np.ndarray, str]:
    return loads(Path(path).read_text())
