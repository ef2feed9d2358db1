"""Reference solutions of the limit interface law.

The sharp-interface limit moves the boundary with normal velocity
V = -kappa + Lambda(t), with Lambda chosen so the enclosed volume stays
constant.  Two independent references are provided for validation:

* a closed-form ODE system for disjoint circles (d=2) or spheres (d=3),
  coupled only through the shared multiplier, valid while interfaces stay
  well separated;
* an explicit parametric front tracker for a single closed planar curve,
  with circumscribed-circle curvature and arc-length resampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np


class DegenerateRadiusError(ValueError):
    """A radius is not positive."""


class TopologyChangeError(RuntimeError):
    """The tracked front self-intersected; parametric tracking must halt."""


_UNIT_BALL_VOLUME = {2: np.pi, 3: 4.0 * np.pi / 3.0}


@dataclass
class CircleSystem:
    """Disjoint circles/spheres evolving under the volume-preserving law.

    Centers are fixed; the members interact only through the common
    multiplier.  This mirrors the phase-field regime of well-separated
    interfaces and is meaningful only while separations stay large
    compared to the diffuse width (> 4 eps in comparisons).
    """

    d: int
    radii: np.ndarray
    centers: Tuple[Tuple[float, ...], ...] = ()

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.ndim != 1 or self.radii.size == 0:
            raise DegenerateRadiusError("need at least one radius")
        if np.any(self.radii <= 0.0):
            raise DegenerateRadiusError("all radii must be positive")

    def total_volume(self) -> float:
        return float(_UNIT_BALL_VOLUME[self.d] * np.sum(self.radii**self.d))


def circle_rhs(sys: CircleSystem):
    """Radius rates and multiplier of the constrained curvature flow.

    kappa_i = (d-1)/R_i and Lambda = (d-1) sum R^(d-2) / sum R^(d-1), the
    unique value making sum R^(d-1) dR/dt vanish, i.e. conserving total
    volume.  Returns (rates, Lambda).
    """
    r = sys.radii
    if np.any(r <= 0.0):
        raise DegenerateRadiusError("all radii must be positive")
    dm1 = sys.d - 1
    lam = dm1 * float(np.sum(r ** (sys.d - 2))) / float(np.sum(r ** (sys.d - 1)))
    rates = -dm1 / r + lam
    return rates, lam


@dataclass
class CircleTrajectory:
    times: np.ndarray
    radii: np.ndarray  # (n_times, n_circles)
    lambdas: np.ndarray
    stopped_early: bool
    stop_reason: str = ""


def integrate_circles(sys: CircleSystem, dt: float, t_end: float) -> CircleTrajectory:
    """Classic fourth-order integration of the circle system.

    Stops early (flagged, not an error) when the smallest radius falls
    under the disappearance threshold 5*sqrt(dt): past that point the
    curvature blow-up makes fixed-step integration meaningless.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r = sys.radii.copy()
    threshold = 5.0 * np.sqrt(dt)
    times = [0.0]
    radii = [r.copy()]
    lambdas = [circle_rhs(CircleSystem(sys.d, r, sys.centers))[1]]
    stopped, reason = False, ""
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    t = 0.0
    for _ in range(n_steps):
        if r.min() < threshold:
            stopped, reason = True, f"min radius below threshold {threshold:.4g}"
            break

        def rate(rr):
            return circle_rhs(CircleSystem(sys.d, rr, sys.centers))[0]

        try:
            k1 = rate(r)
            k2 = rate(r + 0.5 * dt * k1)
            k3 = rate(r + 0.5 * dt * k2)
            k4 = rate(r + dt * k3)
        except DegenerateRadiusError:
            stopped, reason = True, "radius collapsed inside a step"
            break
        r = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(r <= 0.0):
            stopped, reason = True, "radius collapsed inside a step"
            break
        t += dt
        times.append(t)
        radii.append(r.copy())
        lambdas.append(circle_rhs(CircleSystem(sys.d, r, sys.centers))[1])
    return CircleTrajectory(
        times=np.array(times),
        radii=np.array(radii),
        lambdas=np.array(lambdas),
        stopped_early=stopped,
        stop_reason=reason,
    )


# ---------------------------------------------------------------------------
# parametric front tracking


@dataclass
class FrontCurve:
    """Closed planar polyline, stored counterclockwise without a repeated
    endpoint."""

    nodes: np.ndarray
    resample_spacing: float

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2 or len(self.nodes) < 8:
            raise ValueError("need an (n, 2) array with n >= 8")
        if self.resample_spacing <= 0.0:
            raise ValueError("resample spacing must be positive")
        if polygon_area_signed(self.nodes) < 0.0:
            self.nodes = self.nodes[::-1].copy()


def polygon_area_signed(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return float(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_length(pts: np.ndarray) -> float:
    return float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())


def nodal_curvature(pts: np.ndarray) -> np.ndarray:
    """Signed curvature from the circumscribed circle of node triples.

    kappa_i = 2 cross(b-a, c-b) / (|b-a| |c-b| |c-a|); exact 1/R whenever
    the three points lie on a circle of radius R, positive for a
    counterclockwise convex curve.
    """
    a = np.roll(pts, 1, axis=0)
    b = pts
    c = np.roll(pts, -1, axis=0)
    ab = b - a
    bc = c - b
    ac = c - a
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    denom = np.hypot(*ab.T) * np.hypot(*bc.T) * np.hypot(*ac.T)
    return 2.0 * cross / denom


def _outward_normals(pts: np.ndarray) -> np.ndarray:
    t = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    t /= np.hypot(*t.T)[:, None]
    # counterclockwise orientation: outward is the right-hand normal
    return np.column_stack((t[:, 1], -t[:, 0]))


def _has_self_intersection(pts: np.ndarray) -> bool:
    """Any two non-adjacent edges of the closed polyline crossing."""
    n = len(pts)
    p1 = pts
    p2 = np.roll(pts, -1, axis=0)

    def cross2(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (
            a[..., 1] - o[..., 1]
        ) * (b[..., 0] - o[..., 0])

    a1 = p1[:, None, :]
    a2 = p2[:, None, :]
    b1 = p1[None, :, :]
    b2 = p2[None, :, :]
    d1 = cross2(a1, a2, b1)
    d2 = cross2(a1, a2, b2)
    d3 = cross2(b1, b2, a1)
    d4 = cross2(b1, b2, a2)
    crossing = (d1 * d2 < 0.0) & (d3 * d4 < 0.0)
    idx = np.arange(n)
    adjacent = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (
        np.abs(idx[:, None] - idx[None, :]) == n - 1
    )
    return bool(np.any(crossing & ~adjacent))


def resample_arclength(pts: np.ndarray, spacing: float) -> np.ndarray:
    """Evenly respace nodes along the curve, keeping node 0 anchored.

    Pure tangential relocation: nodes slide along a periodic cubic-spline
    reconstruction of the polyline (chord-length parametrized), so the
    resampling bias is O(spacing^4) instead of the O(spacing^2) a chordal
    redistribution would leak.  Already-uniform polygons are reproduced
    unchanged up to round-off.
    """
    from scipy.interpolate import CubicSpline

    closed = np.vstack((pts, pts[:1]))
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    total = s[-1]
    m = max(8, int(round(total / spacing)))
    spline = CubicSpline(s, closed, bc_type="periodic")
    return spline(np.arange(m) * (total / m))


def front_track_step(curve: FrontCurve, dt: float) -> FrontCurve:
    """One explicit step of V = -kappa + Lambda with conservation-fitted Lambda.

    The weights ds_i are the half central-chord lengths |x_{i+1}-x_{i-1}|/2,
    the exact shoelace area gradient along the nodal normals, so
    Lambda = sum(kappa_i ds_i) / sum(ds_i) makes the discrete normal flux
    (hence the enclosed area) stationary to first order in dt.  Nodes move
    along the outward normal, then are redistributed by arc length (no
    tangential velocity model).  Raises TopologyChangeError when the moved
    polyline self-intersects.
    """
    pts = curve.nodes
    edge_len = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    ds = 0.5 * np.hypot(*(np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)).T)
    lo, hi = edge_len.min(), edge_len.max()
    if lo < 0.25 * curve.resample_spacing or hi > 4.0 * curve.resample_spacing:
        raise ValueError(
            f"node spacing [{lo:.3g}, {hi:.3g}] too far from resample spacing "
            f"{curve.resample_spacing:.3g}; resample before stepping"
        )
    kappa = nodal_curvature(pts)
    lam = float(np.sum(kappa * ds) / np.sum(ds))
    velocity = -kappa + lam
    moved = pts + dt * velocity[:, None] * _outward_normals(pts)
    if _has_self_intersection(moved):
        raise TopologyChangeError("front self-intersected; topology change")
    return FrontCurve(resample_arclength(moved, curve.resample_spacing), curve.resample_spacing)


@dataclass
class FrontTrajectory:
    times: np.ndarray
    lengths: np.ndarray
    areas: np.ndarray
    lambdas: np.ndarray
    curves: List[np.ndarray]
    final: FrontCurve
    stopped_early: bool
    stop_reason: str = ""


def front_track_run(
    curve: FrontCurve, dt: float, t_end: float, store_every: int = 0
) -> FrontTrajectory:
    """Step the tracker to t_end, recording length/area/multiplier.

    ``store_every`` > 0 additionally stores polygon snapshots at that step
    cadence.  A topology change halts the run with a flag rather than an
    exception.
    """
    n_steps = int(np.ceil(t_end / dt - 1e-12)) if t_end > 0 else 0
    times, lengths, areas, lambdas = [0.0], [polygon_length(curve.nodes)], [
        abs(polygon_area_signed(curve.nodes))
    ], [_discrete_lambda(curve.nodes)]
    stored = [curve.nodes.copy()] if store_every else []
    stopped, reason = False, ""
    for n in range(1, n_steps + 1):
        try:
            curve = front_track_step(curve, dt)
        except TopologyChangeError as exc:
            stopped, reason = True, str(exc)
            break
        times.append(n * dt)
        lengths.append(polygon_length(curve.nodes))
        areas.append(abs(polygon_area_signed(curve.nodes)))
        lambdas.append(_discrete_lambda(curve.nodes))
        if store_every and n % store_every == 0:
            stored.append(curve.nodes.copy())
    return FrontTrajectory(
        times=np.array(times),
        lengths=np.array(lengths),
        areas=np.array(areas),
        lambdas=np.array(lambdas),
        curves=stored,
        final=curve,
        stopped_early=stopped,
        stop_reason=reason,
    )


def _ds(pts: np.ndarray) -> np.ndarray:
    return 0.5 * np.hypot(*(np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)).T)


def _discrete_lambda(pts: np.ndarray) -> float:
    ds = _ds(pts)
    return float(np.sum(nodal_curvature(pts) * ds) / np.sum(ds))


def circle_curve(cx: float, cy: float, r: float, n: int) -> FrontCurve:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = np.column_stack((cx + r * np.cos(theta), cy + r * np.sin(theta)))
    return FrontCurve(pts, resample_spacing=2.0 * np.pi * r / n)


def ellipse_curve(cx: float, cy: float, a: float, b: float, n: int) -> FrontCurve:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = np.column_stack((cx + a * np.cos(theta), cy + b * np.sin(theta)))
    return FrontCurve(pts, resample_spacing=polygon_length(pts) / n)
