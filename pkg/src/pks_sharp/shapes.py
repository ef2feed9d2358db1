"""Initial interface shapes and their signed distance functions.

Signed distance is positive inside the enclosed region.  Supported shapes:
a single disk, several disjoint disks, an annulus, and a disk whose radius
is modulated by a random Fourier perturbation (seeded, so runs are
reproducible).  The perturbed disk is star-shaped, which keeps the
inside/outside test exact; its distance magnitude is computed against a
dense polyline of the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np


class ShapeError(ValueError):
    """Malformed or infeasible shape description."""


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if self.r <= 0.0:
            raise ShapeError("disk radius must be positive")

    def signed_distance(self, x, y):
        return self.r - np.hypot(x - self.cx, y - self.cy)

    def enclosed_area(self) -> float:
        return float(np.pi * self.r**2)

    def circles(self):
        return [((self.cx, self.cy), self.r)]


@dataclass(frozen=True)
class MultiDisk:
    """Union of disjoint disks; signed distance is the max over members."""

    centers: Tuple[Tuple[float, float], ...]
    radii: Tuple[float, ...]

    def __post_init__(self):
        if len(self.centers) != len(self.radii) or not self.radii:
            raise ShapeError("centers and radii must be non-empty and match")
        if any(r <= 0.0 for r in self.radii):
            raise ShapeError("disk radii must be positive")
        for i in range(len(self.radii)):
            for j in range(i + 1, len(self.radii)):
                gap = np.hypot(
                    self.centers[i][0] - self.centers[j][0],
                    self.centers[i][1] - self.centers[j][1],
                )
                if gap <= self.radii[i] + self.radii[j]:
                    raise ShapeError(f"disks {i} and {j} overlap")

    def signed_distance(self, x, y):
        out = self.radii[0] - np.hypot(x - self.centers[0][0], y - self.centers[0][1])
        for (cx, cy), r in zip(self.centers[1:], self.radii[1:]):
            np.maximum(out, r - np.hypot(x - cx, y - cy), out=out)
        return out

    def enclosed_area(self) -> float:
        return float(np.pi * sum(r**2 for r in self.radii))

    def circles(self):
        return [(c, r) for c, r in zip(self.centers, self.radii)]


@dataclass(frozen=True)
class Annulus:
    cx: float
    cy: float
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not 0.0 < self.r_inner < self.r_outer:
            raise ShapeError("annulus needs 0 < r_inner < r_outer")

    def signed_distance(self, x, y):
        rr = np.hypot(x - self.cx, y - self.cy)
        return np.minimum(rr - self.r_inner, self.r_outer - rr)

    def enclosed_area(self) -> float:
        return float(np.pi * (self.r_outer**2 - self.r_inner**2))

    def circles(self):
        return []


@dataclass(frozen=True)
class PerturbedDisk:
    """Disk with radius r(theta) = r * (1 + amplitude * sum_k c_k cos(k theta + phase_k)).

    Mode weights c_k are uniform in [0.5, 1] and phases uniform in
    [0, 2pi), drawn from the given seed, so the boundary is a deterministic
    function of (r, amplitude, modes, seed).
    """

    cx: float
    cy: float
    r: float
    amplitude: float
    modes: Tuple[int, ...] = (2, 3, 4, 5)
    seed: int = 0
    _boundary: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.r <= 0.0:
            raise ShapeError("disk radius must be positive")
        if not 0.0 <= self.amplitude < 1.0:
            raise ShapeError("perturbation amplitude must lie in [0, 1)")
        if any(k < 1 for k in self.modes):
            raise ShapeError("perturbation modes must be positive integers")
        object.__setattr__(self, "_boundary", self._sample_boundary(8192))

    def _mode_coefficients(self):
        rng = np.random.default_rng(self.seed)
        weights = rng.uniform(0.5, 1.0, size=len(self.modes))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(self.modes))
        return weights, phases

    def radius_of_angle(self, theta):
        weights, phases = self._mode_coefficients()
        bump = np.zeros_like(np.asarray(theta, dtype=float))
        for k, w, ph in zip(self.modes, weights, phases):
            bump += w * np.cos(k * np.asarray(theta) + ph)
        return self.r * (1.0 + self.amplitude * bump)

    def _sample_boundary(self, n):
        theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        rad = self.radius_of_angle(theta)
        if np.any(rad <= 0.0):
            raise ShapeError("perturbation amplitude collapses the boundary")
        return np.column_stack(
            (self.cx + rad * np.cos(theta), self.cy + rad * np.sin(theta))
        )

    def signed_distance(self, x, y):
        from scipy.spatial import cKDTree

        pts = np.column_stack((np.ravel(x), np.ravel(y)))
        poly = self._boundary
        tree = cKDTree(poly)
        _, nearest = tree.query(pts)
        n = len(poly)
        # exact distance to the two polyline segments incident to the
        # nearest vertex; the polyline is dense enough that this is exact
        # up to O(spacing^2 * curvature)
        dist = np.full(len(pts), np.inf)
        for offs in (-1, 0):
            a = poly[(nearest + offs) % n]
            b = poly[(nearest + offs + 1) % n]
            ab = b - a
            denom = np.einsum("ij,ij->i", ab, ab)
            t = np.clip(np.einsum("ij,ij->i", pts - a, ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            np.minimum(dist, np.hypot(*(pts - proj).T), out=dist)
        theta = np.arctan2(pts[:, 1] - self.cy, pts[:, 0] - self.cx)
        inside = np.hypot(pts[:, 0] - self.cx, pts[:, 1] - self.cy) <= self.radius_of_angle(theta)
        sign = np.where(inside, 1.0, -1.0)
        return (sign * dist).reshape(np.shape(x))

    def enclosed_area(self) -> float:
        # shoelace on the dense boundary polyline
        b = self._boundary
        x, y = b[:, 0], b[:, 1]
        return float(
            0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        )

    def circles(self):
        return [((self.cx, self.cy), self.r)]


Shape = Disk | MultiDisk | Annulus | PerturbedDisk


def bounding_radius(shape) -> float:
    if isinstance(shape, Disk):
        return shape.r
    if isinstance(shape, Annulus):
        return shape.r_outer
    if isinstance(shape, PerturbedDisk):
        b = shape._boundary
        return float(np.hypot(b[:, 0] - shape.cx, b[:, 1] - shape.cy).max())
    raise TypeError(f"no single bounding radius for {type(shape).__name__}")


def min_wall_clearance(shape, lx: float, ly: float) -> float:
    """Smallest distance from the interface to the box walls (can be negative)."""

    def disk_clearance(cx, cy, r):
        return min(cx - r, lx - cx - r, cy - r, ly - cy - r)

    if isinstance(shape, Disk):
        return disk_clearance(shape.cx, shape.cy, shape.r)
    if isinstance(shape, MultiDisk):
        return min(disk_clearance(cx, cy, r) for (cx, cy), r in shape.circles())
    if isinstance(shape, Annulus):
        return disk_clearance(shape.cx, shape.cy, shape.r_outer)
    if isinstance(shape, PerturbedDisk):
        b = shape._boundary
        return float(
            min(b[:, 0].min(), lx - b[:, 0].max(), b[:, 1].min(), ly - b[:, 1].max())
        )
    raise TypeError(f"unknown shape {type(shape).__name__}")
