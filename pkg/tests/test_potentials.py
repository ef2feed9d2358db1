import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pks_sharp.potentials import (
    DomainError,
    PotentialParams,
    g_eval,
    g_star,
    g_star_prime,
    optimal_profile,
    w_eval,
    wbar_eval,
    wbar_prime,
)

RHO_GRID = np.arange(0.0, 1.0 + 1e-5, 1e-5)


def g_star_grid_oracle(phi, p):
    """Brute-force conjugate: max over a 1e-5 rho-grid of rho*phi - g(rho)."""
    return float(np.max(RHO_GRID * phi - g_eval(RHO_GRID, p)))


def wbar_grid_oracle(phi, p):
    """Brute-force dual well: min over the rho-grid of W(rho) + (rho-phi)^2/2."""
    return float(np.min(w_eval(RHO_GRID, p) + 0.5 * (RHO_GRID - phi) ** 2))


class TestParams:
    def test_constants(self, params):
        assert params.delta == pytest.approx(0.25, abs=0)
        # independent piecewise closed form for A = 1/4: 1/8 + pi/32
        assert params.gamma == pytest.approx(1.0 / 8.0 + math.pi / 32.0, abs=1e-10)
        assert params.gamma == pytest.approx(0.22317, abs=5e-6)

    def test_invalid_A(self):
        for bad in (0.0, 0.5, -0.1, 0.75):
            with pytest.raises(ValueError):
                PotentialParams(bad)

    def test_gamma_vs_composite_simpson(self, params):
        # composite Simpson with 1e4 nodes split at the kinks of the integrand
        total = 0.0
        for lo, hi in ((0.0, 0.25), (0.25, 0.75), (0.75, 1.0)):
            n = 3334 if hi - lo > 0.3 else 3333
            x = np.linspace(lo, hi, 2 * n + 1)
            y = np.sqrt(2.0 * wbar_eval(x, params))
            h = (hi - lo) / (2 * n)
            total += h / 3.0 * (y[0] + y[-1] + 4 * y[1::2].sum() + 2 * y[2:-1:2].sum())
        assert abs(total - params.gamma) <= 1e-8


class TestPointValues:
    def test_g(self, params):
        assert g_eval(0.0, params) == 0.0
        assert g_eval(1.0, params) == pytest.approx(0.5, abs=1e-15)
        assert g_eval(0.25, params) == pytest.approx(0.078125, abs=1e-15)

    def test_g_domain_error(self, params):
        with pytest.raises(DomainError):
            g_eval(1.2, params)
        with pytest.raises(DomainError):
            g_eval(np.array([0.5, -0.01]), params)

    def test_g_star(self, params):
        assert g_star(0.0, params) == 0.0
        # frozen from the grid-maximization oracle
        assert g_star(1.0, params) == pytest.approx(g_star_grid_oracle(1.0, params), abs=5e-6)
        assert g_star(1.0, params) == pytest.approx(0.5, abs=1e-12)
        assert g_star(0.5, params) == pytest.approx(g_star_grid_oracle(0.5, params), abs=5e-6)
        assert g_star(0.5, params) == pytest.approx(0.0625, abs=1e-12)

    def test_g_star_prime(self, params):
        assert g_star_prime(0.1, params) == 0.0
        assert g_star_prime(0.5, params) == pytest.approx(0.5, abs=1e-15)
        assert g_star_prime(0.9, params) == 1.0

    def test_w(self, params):
        assert w_eval(0.0, params) == 0.0
        assert w_eval(1.0, params) == 0.0
        assert w_eval(0.25, params) == pytest.approx(0.046875, abs=1e-15)
        assert w_eval(0.5, params) == pytest.approx(0.0625, abs=1e-15)
        with pytest.raises(DomainError):
            w_eval(-0.5, params)

    def test_w_matches_g_identity(self, params, rng):
        # W = g - rho^2/2 on the whole domain
        rho = rng.uniform(0.0, 1.0, 200)
        assert np.allclose(
            w_eval(rho, params), g_eval(rho, params) - 0.5 * rho**2, atol=1e-15
        )

    def test_wbar(self, params):
        assert wbar_eval(0.0, params) == 0.0
        assert wbar_eval(1.0, params) == 0.0
        assert wbar_eval(0.5, params) == pytest.approx(wbar_grid_oracle(0.5, params), abs=5e-6)
        assert wbar_eval(0.5, params) == pytest.approx(0.0625, abs=1e-12)
        assert wbar_eval(-0.3, params) == pytest.approx(wbar_grid_oracle(-0.3, params), abs=5e-6)
        assert wbar_eval(-0.3, params) == pytest.approx(0.045, abs=1e-12)


class TestConjugacy:
    def test_fenchel_young_inequality(self, params, rng):
        rho = rng.uniform(0.0, 1.0, 10_000)
        phi = rng.uniform(-1.0, 2.0, 10_000)
        gap = g_eval(rho, params) + g_star(phi, params) - rho * phi
        assert gap.min() >= -1e-12

    def test_fenchel_young_equality_at_gsp(self, params, rng):
        phi = rng.uniform(-1.0, 2.0, 10_000)
        rho = g_star_prime(phi, params)
        gap = g_eval(rho, params) + g_star(phi, params) - rho * phi
        assert np.abs(gap).max() <= 1e-10

    def test_conjugate_matches_grid_oracle(self, params, rng):
        for phi in rng.uniform(-1.0, 2.0, 200):
            assert abs(g_star(phi, params) - g_star_grid_oracle(phi, params)) <= 5e-6

    def test_wbar_matches_grid_oracle(self, params, rng):
        for phi in rng.uniform(-1.0, 2.0, 200):
            assert abs(wbar_eval(phi, params) - wbar_grid_oracle(phi, params)) <= 5e-6

    def test_derivative_consistency(self, params, rng):
        # centered differences away from the breakpoints, O(h^2)
        h = 1e-5
        breaks = np.array([0.25, 0.75])
        phi = rng.uniform(-1.0, 2.0, 1000)
        phi = phi[np.abs(phi[:, None] - breaks).min(axis=1) > 3 * h]
        fd = (g_star(phi + h, params) - g_star(phi - h, params)) / (2 * h)
        assert np.abs(fd - g_star_prime(phi, params)).max() <= 1e-8
        fd2 = (wbar_eval(phi + h, params) - wbar_eval(phi - h, params)) / (2 * h)
        assert np.abs(fd2 - wbar_prime(phi, params)).max() <= 1e-8

    @given(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
    @settings(max_examples=200, deadline=None)
    def test_gsp_monotone_lipschitz(self, x, y):
        p = PotentialParams(0.25)
        lo, hi = min(x, y), max(x, y)
        d = g_star_prime(hi, p) - g_star_prime(lo, p)
        assert d >= 0.0
        assert d <= (hi - lo) / (2 * p.A) + 1e-12

    def test_gsp_range(self, params):
        grid = np.linspace(-3.0, 4.0, 7001)
        vals = g_star_prime(grid, params)
        assert vals.min() >= 0.0 and vals.max() <= 1.0
        assert np.all(np.diff(vals) >= 0.0)

    def test_wbar_nonnegative_with_isolated_zeros(self, params):
        grid = np.arange(-1.0, 2.0 + 1e-4, 1e-4)
        vals = wbar_eval(grid, params)
        assert vals.min() >= 0.0
        zeros = grid[vals <= 1e-12]
        assert np.all((np.abs(zeros) <= 1e-4) | (np.abs(zeros - 1.0) <= 1e-4))


class TestProfile:
    def test_anchor_and_range(self, params):
        q = optimal_profile(params, np.array([-40.0, 0.0, 40.0]))
        assert q[0] == 0.0
        assert q[1] == pytest.approx(0.5, abs=1e-12)
        assert q[2] == 1.0

    def test_monotone(self, params):
        xi = np.linspace(-12.0, 12.0, 4001)
        q = optimal_profile(params, xi)
        assert np.all(np.diff(q) >= 0.0)
        assert q.min() >= 0.0 and q.max() <= 1.0

    def test_equipartition(self, params):
        # finite-difference q' against sqrt(2*Wbar(q)) along the profile
        h = 1e-3
        xi = np.arange(-8.0, 8.0 + h, h)
        q = optimal_profile(params, xi)
        dq = (q[2:] - q[:-2]) / (2 * h)
        gap = np.abs(dq**2 - 2.0 * wbar_eval(q[1:-1], params))
        assert gap.max() <= 1e-6

    def test_well_symmetry(self, params):
        # Wbar is symmetric about 1/2, so the profile is odd around (0, 1/2)
        xi = np.linspace(0.0, 10.0, 500)
        assert np.allclose(
            optimal_profile(params, -xi), 1.0 - optimal_profile(params, xi), atol=1e-9
        )

    def test_other_A_values(self):
        for a in (0.1, 0.4):
            p = PotentialParams(a)
            q = optimal_profile(p, np.linspace(-50.0, 50.0, 101))
            assert q[0] == 0.0 and q[-1] == 1.0
            assert np.all(np.diff(q) >= 0.0)
