import numpy as np
import pytest
from scipy import linalg, special

from pmetube import (
    DegenerateExponentError,
    InvalidParameterError,
    SectionGrid,
    analytic_lambda1,
    cosine_subsolution,
    critical_speed,
    dilate_profile,
    numeric_lambda1,
    relax_profile,
    shoot_profile,
    stationary_residual,
)

# Peak values from the closed-form quadrature (below), frozen at n = 201.
PHI_MAX = {(2.0, np.pi): 1.105939494266584, (3.0, np.pi): 0.7569228173949785,
           (1.5, 1.0): 0.0468767378399807}


def peak_closed_form(L, m):
    # First integral with w = Phi^m: (w')^2 = 2 kappa (W^q - w^q), q = (m+1)/m.
    # Then L/2 = W^(1-q/2) / sqrt(2 kappa) * B(1/q, 1/2) / q.
    q = (m + 1.0) / m
    kappa = m / ((m - 1.0) * (m + 1.0))
    beta = special.beta(1.0 / q, 0.5) / q
    W = (0.5 * L * np.sqrt(2 * kappa) / beta) ** (1.0 / (1.0 - q / 2.0))
    return W ** (1.0 / m)


def inverse_power_lambda1(L, n, iters=200):
    h = L / (n - 1)
    k = n - 2
    ab = np.zeros((3, k))
    ab[0, 1:] = -1.0 / h**2
    ab[1, :] = 2.0 / h**2
    ab[2, :-1] = -1.0 / h**2
    x = np.ones(k)
    lam = 0.0
    for _ in range(iters):
        y = linalg.solve_banded((1, 1), ab, x)
        lam = np.dot(x, x) / np.dot(x, y)
        x = y / np.linalg.norm(y)
    return lam


def rel_sup(a, b):
    return np.max(np.abs(a[1:-1] - b[1:-1])) / np.max(np.abs(b))


class TestEigenvalue:
    @pytest.mark.parametrize("L, val", [(np.pi, 1.0), (2 * np.pi, 0.25), (1.0, np.pi**2)])
    def test_analytic(self, L, val):
        assert analytic_lambda1(L) == pytest.approx(val, rel=1e-14)

    def test_analytic_rejects_nonpositive_length(self):
        with pytest.raises(InvalidParameterError):
            analytic_lambda1(0.0)

    @pytest.mark.parametrize("L, tol", [(np.pi, 1e-3), (1.0, 1e-2)])
    def test_numeric_against_inverse_power(self, L, tol):
        lam = numeric_lambda1(SectionGrid(L, 201))
        assert lam == pytest.approx(inverse_power_lambda1(L, 201), rel=1e-10)
        assert abs(lam - analytic_lambda1(L)) <= tol

    def test_numeric_matches_discrete_closed_form(self):
        g = SectionGrid(np.pi, 51)
        exact = 4.0 / g.h**2 * np.sin(np.pi * g.h / (2 * g.L)) ** 2
        assert numeric_lambda1(g) == pytest.approx(exact, rel=1e-12)

    def test_second_order(self):
        e1 = abs(numeric_lambda1(SectionGrid(np.pi, 201)) - 1.0)
        e2 = abs(numeric_lambda1(SectionGrid(np.pi, 401)) - 1.0)
        assert e2 / e1 == pytest.approx(0.25, abs=0.01)

    def test_grid_too_small(self):
        with pytest.raises(InvalidParameterError):
            SectionGrid(1.0, 2)


class TestCriticalSpeed:
    @pytest.mark.parametrize("m, lam, c", [(2, 1, 1.0), (3, 1, 0.5), (2, 0.25, 2.0)])
    def test_values(self, m, lam, c):
        assert critical_speed(m, lam) == pytest.approx(c, rel=1e-14)

    @pytest.mark.parametrize("m", [1.0, 0.5])
    def test_degenerate_exponent(self, m):
        with pytest.raises(DegenerateExponentError):
            critical_speed(m, 1.0)


class TestShooting:
    @pytest.mark.parametrize("m, L", list(PHI_MAX))
    def test_peak_against_closed_form(self, m, L):
        p = shoot_profile(L, m, 201)
        assert p.sup_phi == pytest.approx(peak_closed_form(L, m), rel=1e-9)
        assert p.sup_phi == pytest.approx(PHI_MAX[(m, L)], rel=1e-10)

    def test_boundary_and_symmetry(self):
        p = shoot_profile(np.pi, 2.0, 201)
        assert p.phi[0] == 0.0 and p.phi[-1] == 0.0
        assert np.argmax(p.phi) == 100
        assert np.array_equal(p.phi, p.phi[::-1])
        assert np.all(p.phi[1:-1] > 0)

    def test_residual_second_order(self):
        # O(h^2) on the middle 80% of the section; the wall rows see the
        # square-root singularity of Phi and decay only like h^(1/2)
        inner, wall = [], []
        for n in (101, 201, 401):
            p = shoot_profile(np.pi, 2.0, n)
            r = np.abs(stationary_residual(p.phi, p.grid.h, 2.0))
            k = r.size // 10
            inner.append(r[k:-k].max())
            wall.append(r.max())
        assert inner[0] / inner[1] == pytest.approx(4.0, rel=0.05)
        assert inner[1] / inner[2] == pytest.approx(4.0, rel=0.05)
        assert wall[2] < wall[1] < wall[0]

    def test_peak_scaling_in_length(self):
        # Phi_L scales like L^(2/(m-1)).
        for m in (1.5, 2.0, 3.0):
            a = shoot_profile(1.0, m, 101).sup_phi
            b = shoot_profile(np.pi, m, 101).sup_phi
            assert b / a == pytest.approx(np.pi ** (2 / (m - 1)), rel=1e-8)


class TestRelaxation:
    @pytest.mark.parametrize("m", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("L", [1.0, np.pi])
    def test_matches_oracle(self, m, L):
        pr = relax_profile(L, m, 201)
        ps = shoot_profile(L, m, 201)
        assert rel_sup(pr.phi, ps.phi) <= 1e-3
        assert pr.symmetry_defect() <= 10 * 1e-10 + 1e-12
        flux = pr.boundary_flux()
        assert flux[0] < 0 and flux[1] < 0

    @pytest.mark.parametrize("factor", [2.0, 0.5])
    def test_same_fixed_point_from_above_and_below(self, factor):
        ps = shoot_profile(np.pi, 2.0, 101)
        base = relax_profile(np.pi, 2.0, 101)
        p = relax_profile(np.pi, 2.0, 101, init=factor * ps.phi)
        assert rel_sup(p.phi, base.phi) <= 1e-8

    def test_fills_constants(self):
        p = relax_profile(np.pi, 3.0, 65)
        assert p.lambda1 == pytest.approx(1.0)
        assert p.cstar == pytest.approx(0.5)


class TestDilation:
    def test_identity(self):
        p = relax_profile(np.pi, 2.0, 101)
        d = dilate_profile(p, 1.0)
        assert np.array_equal(d.phi, p.phi) and d.grid.L == p.grid.L

    def test_rejects_contraction(self):
        p = relax_profile(np.pi, 2.0, 51)
        with pytest.raises(InvalidParameterError):
            dilate_profile(p, 0.9)

    @pytest.mark.parametrize("lam", [1.25, 2.0])
    def test_matches_direct_solve(self, lam):
        p = shoot_profile(np.pi, 2.0, 201)
        direct = shoot_profile(lam * np.pi, 2.0, 201)
        assert rel_sup(dilate_profile(p, lam).phi, direct.phi) <= 1e-3

    @pytest.mark.parametrize("eps", [0.1, 0.5])
    def test_epsilon_form(self, eps):
        # Phi(z) = (1 - eps) Phi_eps(lam_eps z) where Phi_eps lives on (0, lam_eps L).
        m = 2.0
        lam = (1 - eps) ** (-(m - 1) / 2)
        p = shoot_profile(np.pi, m, 201)
        d = dilate_profile(p, lam)
        # node i of the dilated grid sits at lam * z_i
        assert np.allclose((1 - eps) * d.phi, p.phi, rtol=1e-12)


class TestCosineSubsolution:
    def test_centre_row(self):
        p = shoot_profile(np.pi, 2.0, 65)
        s = cosine_subsolution(p, 0.5, 1e-6, 11)
        assert np.allclose(s.values[:, 5], 0.5 ** 0.5 * p.phi)
        assert np.all(s.values[:, 0] == 0) and np.all(s.values[:, -1] == 0)

    def test_equality_case_admissible(self):
        p = shoot_profile(np.pi, 2.0, 65)
        s = cosine_subsolution(p, 1.0, 1e-300, 5)
        assert s.admissible
        # lam < 1 with alpha on the boundary of the condition
        m = 2.0
        lam = 0.5
        alpha = np.sqrt((lam ** (-(m - 1) / m) - 1) / ((m - 1) * p.sup_phi ** (m - 1)))
        assert cosine_subsolution(p, lam, alpha, 9).admissible

    def test_condition_value(self):
        p = shoot_profile(np.pi, 2.0, 65)
        s = cosine_subsolution(p, 0.5, 0.1, 21)
        expected = 0.5 ** 0.5 * (1 + 0.01 * p.sup_phi) <= 1
        assert s.admissible == expected
        assert s.bracket == pytest.approx(0.5 ** 0.5 * (1 + 0.01 * p.sup_phi))

    def test_subsolution_residual(self):
        p = shoot_profile(np.pi, 2.0, 129)
        coarse = cosine_subsolution(p, 0.5, 0.3, 129)
        assert coarse.admissible
        r = coarse.residual()
        assert r.max() <= 5 * p.grid.h**2

    @pytest.mark.parametrize("lam, alpha, ny", [(0.0, 1.0, 5), (1.5, 1.0, 5), (0.5, -1.0, 5), (0.5, 1.0, 2)])
    def test_invalid(self, lam, alpha, ny):
        p = shoot_profile(np.pi, 2.0, 33)
        with pytest.raises(InvalidParameterError):
            cosine_subsolution(p, lam, alpha, ny)
