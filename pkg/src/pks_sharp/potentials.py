"""Closed-form potentials of the congested aggregation model.

The model couples a density rho constrained to [0, 1] to a chemical
potential phi through the strictly convex internal energy

    g(rho) = A*rho**2 + (1/2 - A)*rho  on [0, 1],  +inf elsewhere,

with congestion strength A in (0, 1/2).  Everything else is derived from
g: its convex conjugate g*, whose derivative (g*)' is the piecewise-linear
saturation map inverting dg; the double well W acting on rho; the dual
C^{1,1} double well Wbar acting on phi; the surface-tension constant
gamma = int_0^1 sqrt(2*Wbar) ds; and the one-dimensional transition
profile q used to seed well-prepared interfaces.

Infinite potential values are never represented numerically: evaluating g
or W outside [0, 1] raises :class:`DomainError`, and the solver layer
keeps densities inside [0, 1] by construction (the saturation map clips).
All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator


class DomainError(ValueError):
    """Argument outside the finite domain of a potential."""


def _gamma_quadrature(a: float) -> float:
    """Surface tension int_0^1 sqrt(2*Wbar(s)) ds by adaptive quadrature.

    The integrand is smooth on each of the three branches of Wbar; the
    breakpoints 1/2 -+ A are passed to quad so the adaptive rule never
    straddles a kink.  Absolute tolerance 1e-12.
    """
    val, _ = quad(
        lambda s: np.sqrt(2.0 * _wbar_raw(s, a)),
        0.0,
        1.0,
        points=[0.5 - a, 0.5 + a],
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return val


def _g_star_raw(phi, a):
    m = np.clip(np.asarray(phi, dtype=float) - (0.5 - a), 0.0, 2.0 * a)
    return m * m / (4.0 * a) + np.maximum(np.asarray(phi, dtype=float) - (0.5 + a), 0.0)


def _wbar_raw(phi, a):
    # three-branch closed form; evaluating phi^2/2 - g*(phi) directly would
    # cancel catastrophically near the well at 1
    phi = np.asarray(phi, dtype=float)
    mid = 0.5 * phi * phi - (phi - (0.5 - a)) ** 2 / (4.0 * a)
    return np.where(
        phi <= 0.5 - a,
        0.5 * phi * phi,
        np.where(phi >= 0.5 + a, 0.5 * (phi - 1.0) ** 2, mid),
    )


def _wbar_scalar(q: float, a: float) -> float:
    if q <= 0.5 - a:
        return 0.5 * q * q
    if q >= 0.5 + a:
        return 0.5 * (q - 1.0) * (q - 1.0)
    m = q - (0.5 - a)
    return 0.5 * q * q - m * m / (4.0 * a)


@dataclass(frozen=True)
class PotentialParams:
    """Model constants derived from the congestion strength A in (0, 1/2).

    ``delta = 1/2 - A`` is the half-width of the saturation gap of (g*)'
    and ``gamma`` is the surface tension of the transition profile,
    computed once at construction by adaptive quadrature (absolute
    tolerance 1e-12) and cached on the instance.
    """

    A: float
    delta: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.A < 0.5:
            raise ValueError(f"congestion strength A must lie in (0, 1/2), got {self.A}")
        object.__setattr__(self, "delta", 0.5 - self.A)
        object.__setattr__(self, "gamma", _gamma_quadrature(self.A))


def _check_unit_interval(rho, name):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0) or np.any(r > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]; the potential is infinite outside")
    return r


def g_eval(rho, p: PotentialParams):
    """Internal energy g(rho) = A*rho^2 + (1/2 - A)*rho on [0, 1]."""
    r = _check_unit_interval(rho, "rho")
    out = p.A * r * r + (0.5 - p.A) * r
    return out if np.ndim(rho) else float(out)


def g_star(phi, p: PotentialParams):
    """Convex conjugate of g: 0 below 1/2-A, quadratic in the gap, affine above.

    C^1 with g*(phi) = (phi - (1/2-A))^2 / (4A) for phi in [1/2-A, 1/2+A]
    and g*(phi) = phi - 1/2 for phi >= 1/2+A.
    """
    out = _g_star_raw(phi, p.A)
    return out if np.ndim(phi) else float(out)


def g_star_prime(phi, p: PotentialParams):
    """Saturation map (g*)'(phi) = clip((phi - (1/2-A)) / 2A, 0, 1).

    Nondecreasing, 1/(2A)-Lipschitz, and the pointwise solution of the
    unconstrained cell problem argmin_rho g(rho) - rho*phi.
    """
    out = np.clip((np.asarray(phi, dtype=float) - (0.5 - p.A)) / (2.0 * p.A), 0.0, 1.0)
    return out if np.ndim(phi) else float(out)


def w_eval(rho, p: PotentialParams):
    """Double well W(rho) = (1/2 - A)(rho - rho^2) on [0, 1]; wells at 0 and 1."""
    r = _check_unit_interval(rho, "rho")
    out = (0.5 - p.A) * (r - r * r)
    return out if np.ndim(rho) else float(out)


def wbar_eval(phi, p: PotentialParams):
    """Dual double well Wbar(phi) = phi^2/2 - g*(phi); nonnegative, zero only at 0 and 1."""
    out = _wbar_raw(phi, p.A)
    return out if np.ndim(phi) else float(out)


def wbar_prime(phi, p: PotentialParams):
    """Derivative of the dual well: phi - (g*)'(phi); Lipschitz (Wbar is C^{1,1})."""
    phi_arr = np.asarray(phi, dtype=float)
    out = phi_arr - np.clip((phi_arr - (0.5 - p.A)) / (2.0 * p.A), 0.0, 1.0)
    return out if np.ndim(phi) else float(out)


_PROFILE_STEP = 1e-3
_PROFILE_WELL_TOL = 1e-12


@functools.lru_cache(maxsize=8)
def _profile_table(p: PotentialParams):
    """Integrate q' = sqrt(2*Wbar(q)), q(0) = 1/2, both directions (RK4).

    Fixed step 1e-3 in xi.  Once the state comes within 1e-12 of a well it
    is clamped there and integration stops; the exponential tails make this
    happen at finite xi only because of the tolerance.  Returns the node
    array, the profile values, and a monotone cubic interpolant.
    """

    import math

    a = p.A

    def rhs(q):
        w = _wbar_scalar(q, a)
        return math.sqrt(2.0 * w) if w > 0.0 else 0.0

    def march(sign):
        h = sign * _PROFILE_STEP
        q, xs, qs = 0.5, [], []
        # forward (sign=+1) climbs toward 1, backward descends toward 0
        for _ in range(200000):
            k1 = rhs(q)
            k2 = rhs(q + 0.5 * h * k1)
            k3 = rhs(q + 0.5 * h * k2)
            k4 = rhs(q + h * k3)
            q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if sign > 0 and q >= 1.0 - _PROFILE_WELL_TOL:
                q = 1.0
            elif sign < 0 and q <= _PROFILE_WELL_TOL:
                q = 0.0
            xs.append(h * (len(xs) + 1))
            qs.append(q)
            if q in (0.0, 1.0):
                break
        return xs, qs

    xf, qf = march(+1)
    xb, qb = march(-1)
    xi = np.array(xb[::-1] + [0.0] + xf)
    q = np.array(qb[::-1] + [0.5] + qf)
    return xi, q, PchipInterpolator(xi, q)


def optimal_profile(p: PotentialParams, xi_samples) -> np.ndarray:
    """Transition profile q(xi) sampled at sorted xi values.

    q solves q' = sqrt(2*Wbar(q)) with q(0) = 1/2 and therefore satisfies
    the equipartition identity q'^2 = 2*Wbar(q); it rises monotonically
    from the well at 0 to the well at 1.  Outside the integrated range the
    profile is held at the wells (the integration is clamped once within
    1e-12 of them).
    """
    xi, q, interp = _profile_table(p)
    s = np.asarray(xi_samples, dtype=float)
    out = np.empty_like(s)
    inside = (s >= xi[0]) & (s <= xi[-1])
    out[inside] = np.clip(interp(s[inside]), 0.0, 1.0)
    out[s < xi[0]] = 0.0
    out[s > xi[-1]] = 1.0
    return out
