"""Uniform cell-centered rectangular grids with Neumann mirror semantics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ScalarField:
    """Cell-centered scalar samples on a uniform rectangular grid.

    ``values[i, j]`` (or ``[i, j, k]`` in 3D) lives at
    ``origin + (index + 1/2) * h`` along each axis; the spacing h is the
    same in every direction.  Boundary conditions are the reflecting
    (homogeneous Neumann) convention throughout the package.
    """

    values: np.ndarray
    h: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.h <= 0.0:
            raise ValueError("grid spacing must be positive")
        if len(self.origin) != self.values.ndim:
            self.origin = tuple(0.0 for _ in range(self.values.ndim))

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def dims(self) -> tuple:
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        """Measure of the whole box, n_cells * h^d."""
        return self.values.size * self.cell_volume

    @property
    def extents(self) -> tuple:
        return tuple(n * self.h for n in self.values.shape)

    def integrate(self) -> float:
        """Midpoint-rule integral over the box."""
        return float(self.values.sum() * self.cell_volume)

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.h

    def meshes(self):
        """Coordinate arrays of all cell centers (indexing='ij')."""
        return np.meshgrid(*(self.axis_centers(a) for a in range(self.d)), indexing="ij")

    def like(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.h, self.origin)

    def copy(self) -> "ScalarField":
        return ScalarField(self.values.copy(), self.h, self.origin)


def gradient_components(f: ScalarField) -> list:
    """Per-axis derivative arrays: centered interior, one-sided second order
    at the boundary (numpy.gradient with edge_order=2)."""
    if f.d == 1:
        return [np.gradient(f.values, f.h, edge_order=2)]
    return list(np.gradient(f.values, f.h, edge_order=2))


def gradient_sq(f: ScalarField) -> np.ndarray:
    """Pointwise |grad f|^2."""
    comps = gradient_components(f)
    out = comps[0] ** 2
    for c in comps[1:]:
        out += c * c
    return out


def laplacian_mirror(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order 5-point (7-point in 3D) Laplacian with reflecting ghost
    cells, the discrete realization of the no-flux boundary condition."""
    padded = np.pad(values, 1, mode="edge")
    out = np.zeros_like(values)
    core = (slice(1, -1),) * values.ndim
    for axis in range(values.ndim):
        lo = tuple(
            slice(0, -2) if a == axis else slice(1, -1) for a in range(values.ndim)
        )
        hi = tuple(
            slice(2, None) if a == axis else slice(1, -1) for a in range(values.ndim)
        )
        out += padded[lo] + padded[hi]
    out -= 2.0 * values.ndim * padded[core]
    return out / (h * h)
