import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pks_sharp.grid import ScalarField
from pks_sharp.potentials import PotentialParams, g_eval, g_star, g_star_prime
from pks_sharp.rho_solver import (
    InfeasibleMassError,
    mass_of_ell,
    rho_of_phi,
    solve_multiplier,
)


def field(values, h):
    return ScalarField(np.asarray(values, dtype=float), h)


def uniform_field(value, n=20, h=0.1):
    # n=20, h=0.1 gives |Omega| = 4
    return field(np.full((n, n), value), h)


def project_box_plane(v, total):
    """Euclidean projection onto {0 <= x <= 1, sum x = total}, by bisection
    on the shift (independent of the multiplier code path)."""
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.clip(v - tau, 0.0, 1.0).sum() > total:
            lo = tau
        else:
            hi = tau
    return np.clip(v - 0.5 * (lo + hi), 0.0, 1.0)


def projected_gradient_minimizer(phi, h, p, target_mass, iters=400):
    """Independent constrained solver for sum (g(rho) - rho*phi) h^2."""
    total = target_mass / h**2
    r = project_box_plane(np.full(phi.shape, total / phi.size), total)
    eta = 1.0 / (3.0 * p.A * h * h)
    for _ in range(iters):
        grad = (2.0 * p.A * r + (0.5 - p.A) - phi) * h * h
        r = project_box_plane(r - eta * grad, total)
    return r


class TestMassOfEll:
    def test_trivial_values(self, params):
        phi = uniform_field(0.0)
        assert mass_of_ell(phi, 0.0, params) == 0.0
        assert mass_of_ell(phi, 1.0, params) == pytest.approx(4.0, abs=1e-12)
        assert mass_of_ell(phi, 0.375, params) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_in_ell(self, params, rng):
        phi = field(rng.uniform(-0.5, 1.5, (16, 16)), 0.125)
        ells = np.linspace(-2.0, 2.0, 41)
        masses = [mass_of_ell(phi, e, params) for e in ells]
        assert np.all(np.diff(masses) >= -1e-15)


class TestSolveMultiplier:
    def test_flat_field_analytic(self, params):
        # g*'(0.375) = 0.25 on |Omega| = 4 carries mass 1
        ms = solve_multiplier(uniform_field(0.0), 1.0, params)
        assert ms.ell == pytest.approx(0.375, abs=1e-9)
        assert abs(ms.mass_residual) <= 1e-12

    def test_flat_field_shifted(self, params):
        ms = solve_multiplier(uniform_field(1.0), 1.0, params)
        assert ms.ell == pytest.approx(-0.625, abs=1e-9)

    def test_indicator_plateau_midpoint(self, params):
        v = np.zeros((20, 20))
        v[:10, :10] = 1.0  # region of measure exactly 1
        ms = solve_multiplier(field(v, 0.1), 1.0, params)
        assert ms.flat_interval is not None
        lo, hi = ms.flat_interval
        # root set is (-delta, delta) = (-0.25, 0.25); midpoint 0
        assert lo == pytest.approx(-0.25, abs=1e-6)
        assert hi == pytest.approx(0.25, abs=1e-6)
        assert ms.ell == pytest.approx(0.0, abs=1e-6)

    def test_infeasible_mass(self, params):
        phi = uniform_field(0.0)
        for bad in (0.0, -1.0, 4.0, 5.0):
            with pytest.raises(InfeasibleMassError):
                solve_multiplier(phi, bad, params)

    def test_residual_tolerance_contract(self, params, rng):
        for _ in range(10):
            phi = field(rng.uniform(-1.0, 2.0, (16, 16)), 0.125)
            ms = solve_multiplier(phi, 1.0, params, tol=1e-12)
            assert abs(mass_of_ell(phi, ms.ell, params) - 1.0) <= 1e-12


class TestRhoOfPhi:
    def test_uniform_reduction(self, params):
        rho, ms = rho_of_phi(uniform_field(0.0), 1.0, params)
        assert np.allclose(rho.values, 0.25, atol=1e-12)
        assert rho.integrate() == pytest.approx(1.0, abs=1e-10)

    def test_inactive_constraint_gives_pointwise_map(self, params):
        # choose the target so ell = 0 is feasible: rho = g*'(phi) exactly
        x = np.linspace(-3, 3, 40)
        phi_vals = 0.5 + 0.4 * np.tanh(np.subtract.outer(x, x) / 2.0)
        phi = field(phi_vals, 0.1)
        target = float(g_star_prime(phi_vals, params).sum() * 0.01)
        rho, ms = rho_of_phi(phi, target, params)
        assert abs(ms.ell) <= 1e-9
        assert np.allclose(rho.values, g_star_prime(phi_vals, params), atol=1e-9)

    def test_bounds_and_mass(self, params, rng):
        phi = field(rng.uniform(-1.0, 2.0, (32, 32)), 0.0625)
        rho, _ = rho_of_phi(phi, 1.0, params)
        assert rho.values.min() >= 0.0 and rho.values.max() <= 1.0
        assert rho.integrate() == pytest.approx(1.0, abs=1e-10)

    def test_matches_projected_gradient(self, params, rng):
        phi_vals = rng.uniform(-0.5, 1.5, (32, 32))
        h = 2.0 / 32
        rho, _ = rho_of_phi(field(phi_vals, h), 1.0, params)
        oracle = projected_gradient_minimizer(phi_vals, h, params, 1.0)
        l2 = np.sqrt(np.sum((rho.values - oracle) ** 2) * h * h)
        assert l2 <= 1e-6

    def test_pointwise_fenchel_young_optimality(self, params, rng):
        phi = field(rng.uniform(-1.0, 2.0, (16, 16)), 0.125)
        rho, ms = rho_of_phi(phi, 1.0, params)
        shifted = phi.values + ms.ell
        gap = g_eval(rho.values, params) + g_star(shifted, params) - rho.values * shifted
        assert np.abs(gap).max() <= 1e-10

    def test_shift_covariance(self, params, rng):
        phi_vals = rng.uniform(-0.5, 1.5, (16, 16))
        phi = field(phi_vals, 0.125)
        rho1, ms1 = rho_of_phi(phi, 1.0, params)
        for c in (-0.7, 0.3, 1.9):
            rho2, ms2 = rho_of_phi(field(phi_vals + c, 0.125), 1.0, params)
            assert np.allclose(rho1.values, rho2.values, atol=1e-9)
            assert ms2.ell == pytest.approx(ms1.ell - c, abs=1e-9)

    def test_lipschitz_in_phi(self, params, rng):
        # ||rho(phi1) - rho(phi2)||_L2 <= (1/A) ||phi1 - phi2||_L2
        h = 0.25
        for _ in range(100):
            a = rng.uniform(-1.0, 2.0, (8, 8))
            b = a + rng.normal(0.0, 0.3, (8, 8))
            ra, _ = rho_of_phi(field(a, h), 1.0, params)
            rb, _ = rho_of_phi(field(b, h), 1.0, params)
            lhs = np.sqrt(np.sum((ra.values - rb.values) ** 2) * h * h)
            rhs = np.sqrt(np.sum((a - b) ** 2) * h * h) / params.A
            assert lhs <= rhs * (1.0 + 1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_mass_always_hit(self, seed):
        p = PotentialParams(0.25)
        r = np.random.default_rng(seed)
        phi = field(r.uniform(-2.0, 3.0, (8, 8)), 0.25)
        target = r.uniform(0.05, 3.95)
        rho, ms = rho_of_phi(phi, target, p)
        assert rho.integrate() == pytest.approx(target, rel=1e-10)
        assert rho.values.min() >= 0.0 and rho.values.max() <= 1.0
