"""Kernel normalization, exact convolution over atoms, closedness, norm bounds."""

import numpy as np
import pytest

from anisogeom.carleson import carleson_norm_current, s_carleson_norm_current
from anisogeom.currents import (
    DiscreteCurrent,
    discrete_exterior_derivative,
    exterior_derivative_coeffs,
)
from anisogeom.domains import boundary_distance, project_to_boundary, shrunken_domain
from anisogeom.errors import EpsilonTooLarge
from anisogeom.fixtures import closed_dipole_current, interior_box_center, probe_points
from anisogeom.mollify import Mollifier, mollify_current, shrunken_support
from anisogeom.sampling import sobol_unit
from anisogeom.util import real_view, rng_for


class TestMollifier:
    @pytest.mark.parametrize("n", [2, 3])
    def test_unit_integral_independent_quadrature(self, n):
        m = Mollifier(0.1, n)
        d = 2 * n
        nodes, weights = np.polynomial.legendre.leggauss(80)
        r = 0.25 * (nodes + 1.0)
        from anisogeom.mollify import _sphere_area

        total = _sphere_area(d) * 0.25 * np.sum(weights * m.phi(r) * r ** (d - 1))
        assert abs(total - 1.0) < 1e-6

    def test_monte_carlo_mass(self):
        m = Mollifier(0.04, 2)
        u = sobol_unit(2**16, 4, 321, "mollmass")
        reals = (u - 0.5) * m.eps
        pts = reals[:, 0::2] + 1j * reals[:, 1::2]
        est = float(np.mean(m.phi_eps(pts))) * m.eps**4
        assert abs(est - 1.0) < 1e-3

    def test_nonnegative_and_supported(self):
        m = Mollifier(0.05, 2)
        r = np.linspace(0.0, 1.0, 101)
        vals = m.phi(r)
        assert np.all(vals >= 0.0)
        assert np.all(vals[r >= 0.5] == 0.0)
        z = np.array([[0.51 * 0.05, 0.0]], complex)
        assert m.phi_eps(z)[0] == 0.0

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            Mollifier(0.0, 2)


class TestMollifyCurrent:
    def test_single_atom_support_and_mass(self):
        eps = 0.04
        m = Mollifier(eps, 2)
        a = np.array([0.3, 0.1 + 0.2j], complex)
        T = DiscreteCurrent("0", a[None, :], np.array([[1.0 + 0j]]))
        fld = mollify_current(T, m)
        far = a + np.array([0.51 * eps / np.sqrt(2)] * 2)
        assert fld.coeffs_at(far[None, :])[0, 0] == 0.0
        assert np.real(fld.coeffs_at(a[None, :])[0, 0]) > 0.0
        u = sobol_unit(2**16, 4, 55, "atommass")
        reals = (u - 0.5) * eps + real_view(a[None, :])[0]
        pts = reals[:, 0::2] + 1j * reals[:, 1::2]
        est = float(np.real(np.mean(fld.coeffs_at(pts)[:, 0]))) * eps**4
        assert abs(est - 1.0) < 1e-3

    def test_linearity(self):
        m = Mollifier(0.05, 2)
        rng = rng_for(3, "lin")
        p1 = 0.2 * (rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2)))
        p2 = 0.2 * (rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
        c1 = rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2))
        c2 = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        T1 = DiscreteCurrent("1", p1, c1)
        T2 = DiscreteCurrent("1", p2, c2)
        q = 0.2 * (rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2)))
        lhs = mollify_current(T1 + T2, m).coeffs_at(q)
        rhs = mollify_current(T1, m).coeffs_at(q) + mollify_current(T2, m).coeffs_at(q)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_analytic_d_matches_finite_difference(self):
        m = Mollifier(0.04, 2)
        rng = rng_for(8, "fdcmp")
        pts = 0.1 * (rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2)))
        coeffs = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
        fld = mollify_current(DiscreteCurrent("1", pts, coeffs), m)
        q = 0.02 * (rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2)))
        tag, fd = exterior_derivative_coeffs(fld, q, step=1e-5)
        an = fld.analytic_d.coeffs_at(q)
        assert tag == fld.analytic_d.degree
        scale = np.max(np.abs(an)) + 1e-12
        assert np.max(np.abs(fd - an)) / scale < 1e-3

    def test_region_mask(self, ball):
        eps = 0.01
        m = Mollifier(eps, 2)
        deep = np.array([0.2, 0.1], complex)
        shallow = project_to_boundary(ball, np.array([0.9, 0.0], complex)) * (1.0 - eps / 4)
        T = DiscreteCurrent("0", np.vstack([deep, shallow]), np.ones((2, 1), complex))
        fld = mollify_current(T, m, region=shrunken_support(ball, eps))
        assert np.real(fld.coeffs_at(deep[None, :])[0, 0]) > 0.0
        assert fld.coeffs_at(shallow[None, :])[0, 0] == 0.0

    def test_dim_mismatch(self):
        m = Mollifier(0.05, 3)
        T = DiscreteCurrent("0", np.zeros((1, 2), complex), np.ones((1, 1), complex))
        with pytest.raises(ValueError):
            mollify_current(T, m)


class TestClosedness:
    def test_finite_difference_d_vanishes_at_audit_step(self, ball):
        eps = 0.04
        h = eps / 20
        m = Mollifier(eps, 2)
        for seed in (5, 11):
            fix = closed_dipole_current(ball, seed, step=h)
            fld = mollify_current(fix.current, m)
            probes = probe_points(fix, 16, seed=9, margin=-eps / 2)
            amp = float(np.max(np.abs(fld.coeffs_at(probes))))
            _, dcoef = exterior_derivative_coeffs(fld, probes, step=h)
            assert amp > 0.1  # the field is genuinely nonzero on the probes
            assert float(np.max(np.abs(dcoef))) < 1e-6

    def test_discrete_d_of_d_is_empty_mass(self):
        rng = rng_for(2, "ddmass")
        pts = 0.1 * (rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        S = DiscreteCurrent("0", pts, rng.normal(size=(3, 1)) + 0j)
        dS = discrete_exterior_derivative(S, step=1e-3)
        ddS = discrete_exterior_derivative(dS, step=1e-3)
        # atoms at coincident points with cancelling coefficients: pair them up
        from collections import defaultdict

        acc = defaultdict(lambda: 0.0)
        for p, c in zip(ddS.points, ddS.coeffs):
            key = tuple(np.round(real_view(p[None, :])[0], 9))
            acc[key] = acc[key] + c
        resid = max(float(np.max(np.abs(v))) for v in acc.values())
        assert resid < 1e-9 * float(np.max(np.abs(dS.coeffs)))


class TestNormBounds:
    def test_regularized_norm_ratio(self, ball):
        eps = 0.04
        m = Mollifier(eps, 2)
        ratios = []
        for seed in (1, 2, 3):
            fix = closed_dipole_current(ball, seed, step=eps / 20)
            fld = mollify_current(fix.current, m)
            rd = carleson_norm_current(ball, fix.current, boundary_count=8, seed=7, patch_samples=1000)
            rs = carleson_norm_current(
                ball, fld, boundary_count=8, seed=7, patch_samples=1000, tent_mc=128, mass_mc=2048
            )
            assert rd.norm_value > 0.0 and rs.norm_value > 0.0
            ratios.append(rs.norm_value / rd.norm_value)
        assert max(ratios) <= 10.0

    def test_global_shrunken_norm_ratio(self, ball):
        eps = 0.01
        m = Mollifier(eps, 2)
        dom_eps = shrunken_domain(ball, eps)
        fix = closed_dipole_current(ball, 4, step=eps / 20)
        fld = mollify_current(fix.current, m, region=shrunken_support(ball, eps))
        rd = carleson_norm_current(ball, fix.current, boundary_count=8, seed=7, patch_samples=1000)
        rs = s_carleson_norm_current(
            dom_eps, fld, s=eps, boundary_count=8, seed=7, patch_samples=1000, tent_mc=128, mass_mc=2048
        )
        assert rs.norm_value > 0.0
        assert rs.norm_value / rd.norm_value <= 10.0

    def test_shrunken_boundary_depth_ratio(self, ball, ellipsoid):
        for dom in (ball, ellipsoid):
            for eps in (0.002, 0.005):
                sh = shrunken_domain(dom, eps)
                zb = project_to_boundary(dom, np.array([0.7, 0.1], complex))
                inner = project_to_boundary(sh, 0.9 * zb)
                depth = boundary_distance(dom, inner)
                assert 1.0 <= depth / eps <= 8.0

    def test_epsilon_too_large_propagates(self, ball):
        with pytest.raises(EpsilonTooLarge):
            shrunken_domain(ball, ball.eta0)
