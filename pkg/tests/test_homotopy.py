"""Warped contraction solver: chart, covering, operator identity, cutoff solve."""

from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from anisogeom.currents import (
    SmoothFormField,
    exterior_derivative_coeffs,
    pair_one,
    pair_two,
)
from anisogeom.domains import builtin_domain
from anisogeom.errors import (
    ChartConstructionFailure,
    CutoffRadiusInvalid,
    InputNotClosed,
    McBudgetExceeded,
    OutsideChart,
)
from anisogeom.fixtures import (
    _one_form_d_map,
    annulus_one_form,
    closed_two_form_suite,
    radial_two_form,
)
from anisogeom.homotopy import (
    HomotopyConfig,
    _lam_batch,
    _real_dirs,
    _real_two_pairing,
    averaging_T,
    build_homotopy_system,
    build_local_chart,
    cutoff_solve,
    h_direction_derivative,
    h_lambda,
    h_velocity,
    homotopy_coeffs,
    homotopy_d_coeffs,
    verify_identity_suite,
    w_sample_grid,
)
from anisogeom.sampling import unit_polydisk_points
from anisogeom.util import rng_for

SEED = 11
BUDGET = dict(n_lambda=512, n_t=64, seed=SEED)


@pytest.fixture(scope="module")
def hsys():
    dom = builtin_domain("ball")
    p = np.array([1.0 + 0j, 0.0 + 0j])
    probe = w_sample_grid(build_local_chart(dom, p, seed=SEED), 6, 6)
    return build_homotopy_system(
        dom, p, cfg=HomotopyConfig(**BUDGET), grid_shape=(6, 6),
        calibration_samples=400, segment_points=probe[:3],
    )


@pytest.fixture(scope="module")
def suite_forms(hsys):
    ch = hsys.chart
    return closed_two_form_suite(2, 2, ch.r2 / 4.0, 5.0 * ch.r2 / 4.0, seed=13)


class TestChartAndCovering:
    def test_grid_inside_chart(self, hsys):
        assert np.all(hsys.chart.in_v(hsys.grid))

    def test_partition_sums_to_one(self, hsys):
        assert hsys.audit["phi_sum_defect"] < 1e-12
        assert hsys.audit["psi_sum_defect"] < 1e-12

    def test_calibrated_amplitude_is_audited_clean(self, hsys):
        c = hsys.cfg.c
        assert c is not None and c > 0.0
        tag = f"2^-{int(round(-np.log2(c)))}"
        assert hsys.audit["per_c"][tag] == 0

    def test_point_outside_covering_raises(self, hsys):
        far = hsys.chart.p + np.array([0.5 + 0j, 0.5 + 0j])
        with pytest.raises(OutsideChart):
            hsys.partitions.phi_weights(far[None, :])


class TestContractionMap:
    def test_endpoints_exact(self, hsys):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        lam = rng_for(5, "lam").normal(size=2) + 0j
        for z in hsys.grid[:3]:
            assert np.max(np.abs(h_lambda(ch, parts, cfg, lam, 0.0, z))) < 1e-12
            assert np.max(np.abs(h_lambda(ch, parts, cfg, lam, 1.0, z) - z)) < 1e-12

    def test_zero_warp_follows_the_ray(self, hsys):
        ch, parts = hsys.chart, hsys.partitions
        cfg0 = replace(hsys.cfg, c=1e-12)
        lam = np.array([0.3 + 0.1j, -0.2 + 0.4j])
        z = hsys.grid[4]
        for t in (0.15, 0.5, 0.85):
            assert np.max(np.abs(h_lambda(ch, parts, cfg0, lam, t, z) - t * z)) < 1e-9

    def test_direction_derivative_at_endpoint(self, hsys):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        lam = np.array([0.2 - 0.3j, 0.1 + 0.5j])
        v = np.array([0.6 + 0.2j, -0.4 + 0.1j])
        dv = h_direction_derivative(ch, parts, cfg, lam, 1.0, hsys.grid[2], v)
        assert np.max(np.abs(dv - v)) < 1e-6

    def test_velocity_of_the_unwarped_ray(self, hsys):
        ch, parts = hsys.chart, hsys.partitions
        cfg0 = replace(hsys.cfg, c=1e-12)
        z = hsys.grid[7]
        vel = h_velocity(ch, parts, cfg0, np.zeros(2, complex), 0.5, z)
        assert np.max(np.abs(vel - z)) < 1e-6

    def test_outside_chart_raises(self, hsys):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        z_bad = np.full(2, 10.0 + 0j)
        with pytest.raises(OutsideChart):
            h_lambda(ch, parts, cfg, np.zeros(2, complex), 0.5, z_bad)

    def test_uncalibrated_config_raises(self, hsys):
        ch, parts = hsys.chart, hsys.partitions
        cfg_raw = HomotopyConfig(**BUDGET)
        with pytest.raises(ChartConstructionFailure):
            h_lambda(ch, parts, cfg_raw, np.zeros(2, complex), 0.5, hsys.grid[0])


class TestOperatorOracle:
    def test_radial_form_matches_quadrature(self, hsys):
        # with a vanishing warp the operator reduces to the classical ray
        # integral, which is one scalar quadrature for a radial profile
        ch, parts = hsys.chart, hsys.partitions
        fld, g, const = radial_two_form(2, seed=3, r_lo=ch.r2 / 4.0,
                                        r_hi=5.0 * ch.r2 / 4.0)
        cfg0 = HomotopyConfig(c=1e-12, n_lambda=64, n_t=64, seed=5)
        zs = hsys.grid[:3]
        coeffs, _, _ = homotopy_coeffs(ch, parts, cfg0, fld, zs)
        dirs = _real_dirs(2)
        for i, z in enumerate(zs):
            r = float(np.linalg.norm(z))
            ival, _ = quad(lambda t: t * g(t * r), 0.0, 1.0, limit=200)
            got = np.array([pair_one("1", 2, coeffs[i], d) for d in dirs])
            want = np.array([ival * pair_two("2", 2, const, z, d) for d in dirs])
            scale = max(np.max(np.abs(want)), 1e-300)
            assert np.max(np.abs(got - want)) / scale < 1e-3

    def test_linearity_in_the_input_form(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        th1, th2 = suite_forms
        combo = replace(th1 + th2.scaled(2.5), support_hint=th1.support_hint)
        zs = hsys.grid[:2]
        lhs, _, _ = homotopy_coeffs(ch, parts, cfg, combo, zs)
        a, _, _ = homotopy_coeffs(ch, parts, cfg, th1, zs)
        b, _, _ = homotopy_coeffs(ch, parts, cfg, th2, zs)
        rhs = a + 2.5 * b
        scale = np.max(np.abs(rhs)) + 1e-300
        assert np.max(np.abs(lhs - rhs)) / scale < 1e-10


class TestIdentity:
    def test_residual_small_on_window_points(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        reps = verify_identity_suite(ch, parts, cfg, suite_forms, hsys.grid[:4])
        for rep in reps:
            assert rep["max"] < 2e-3
            assert rep["mc_stderr"] < 1e-3
            assert rep["imag_max"] < 1e-12
            assert rep["budgets"]["n_lambda"] == cfg.n_lambda
            assert len(rep["residual"]) == 4

    def test_more_warp_samples_shrink_the_residual(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        rep = verify_identity_suite(ch, parts, cfg, suite_forms[:1],
                                    hsys.grid[:2], shrink_factor=4,
                                    shrink_subset=2)[0]
        sh = rep["shrink"]
        assert sh["factor"] == 4
        assert sh["max_after"] < sh["max_before"]

    def test_worker_fanout_is_byte_identical(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        zs = hsys.grid[:2]
        r1 = verify_identity_suite(ch, parts, cfg, suite_forms[:1], zs)[0]
        r2 = verify_identity_suite(ch, parts, cfg, suite_forms[:1], zs,
                                   workers=2)[0]
        assert np.array_equal(r1["residual"], r2["residual"])
        assert r1["max"] == r2["max"] and r1["mc_stderr"] == r2["mc_stderr"]

    def test_warp_batch_prefix_extension(self):
        # doubling the budget keeps the leading samples, so refinement reuses
        # the same common random numbers
        cfg = HomotopyConfig(**BUDGET)
        a = _lam_batch(cfg, 2)
        b = _lam_batch(cfg, 2, 2 * cfg.n_lambda)
        assert np.array_equal(a, b[: cfg.n_lambda])


class TestEvaluationEquivalences:
    def test_family_stack_matches_single_members(self, suite_forms):
        fam = suite_forms[0].eval_group[0]
        rng = rng_for(99, "famchk")
        r_hi = fam.r_hi
        pts = rng.normal(size=(200, 2)) + 1j * rng.normal(size=(200, 2))
        pts *= 1.3 * r_hi * rng.random((200, 1)) / np.linalg.norm(
            pts, axis=1, keepdims=True)
        stack = fam.coeffs_stack(pts)
        for th in suite_forms:
            row = th.eval_group[1]
            ind = th.coeffs_at(pts)
            scale = max(np.max(np.abs(ind)), 1e-300)
            assert np.max(np.abs(stack[:, row] - ind)) / scale < 1e-12

    def test_folded_pairing_matches_generic(self, hsys, suite_forms):
        th = suite_forms[0]
        rng = rng_for(21, "foldchk")
        mid = 3.0 * hsys.chart.r2 / 4.0
        pts = mid * (lambda g: g / np.linalg.norm(g, axis=1, keepdims=True))(
            rng.normal(size=(40, 2)) + 1j * rng.normal(size=(40, 2)))
        u = rng.normal(size=(40, 2)) + 1j * rng.normal(size=(40, 2))
        v = rng.normal(size=(1, 40, 2)) + 1j * rng.normal(size=(1, 40, 2))
        coeffs = th.coeffs_at(pts)
        mono_d, mono_e = _real_two_pairing(2, u, v)
        folded = (2.0 * (mono_d[0] * coeffs[:, :1]).sum(axis=1)
                  + (mono_e[0] * coeffs[:, 1:5]).sum(axis=1)).real
        generic = pair_two("2", 2, coeffs, u, v[0])
        assert np.max(np.abs(generic.imag)) < 1e-12  # the form is real
        assert np.max(np.abs(folded - generic.real)) < 1e-12 * max(
            1.0, np.max(np.abs(generic)))

    def test_one_form_derivative_map_matches_reference(self):
        from anisogeom.currents import derivative_coeffs_from_columns

        n = 2
        l1, l2, l3, l4 = _one_form_d_map(n)
        rng = rng_for(7, "lmapchk")
        dz = rng.normal(size=(5, n, n)) + 1j * rng.normal(size=(5, n, n))
        dzbar = rng.normal(size=(5, n, n)) + 1j * rng.normal(size=(5, n, n))
        _, want = derivative_coeffs_from_columns("1", n, dz, dzbar)
        zf = dz.reshape(5, -1)
        bf = dzbar.reshape(5, -1)
        got = zf @ l1 + np.conj(zf) @ l2 + bf @ l3 + np.conj(bf) @ l4
        assert np.max(np.abs(got - want)) < 1e-12


class TestCutoffSolve:
    def test_dw_reproduces_the_input(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        theta = suite_forms[0]
        det = {}
        cutoff_solve(ch, parts, cfg, theta, details=det)
        pts = hsys.grid[:2]
        # d of the cutoff part through the shared stencil; d of the repair
        # primitive is its defining field away from the cutoff shell
        d_main, _, _ = homotopy_d_coeffs(ch, parts, cfg,
                                         _apply_cutoff(det["psi"], theta), pts)
        dw = d_main + det["g_field"].coeffs_at(pts)
        resid = np.max(np.abs(dw - theta.coeffs_at(pts)))
        assert resid < 5e-3

    def test_primitive_derivative_matches_its_field(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        det = {}
        cutoff_solve(ch, parts, cfg, suite_forms[0], details=det)
        z = hsys.grid[:1]
        _, dtau = exterior_derivative_coeffs(det["tau"], z, step=cfg.fd_step)
        gz = det["g_field"].coeffs_at(z)
        assert np.max(np.abs(dtau - gz)) / max(np.max(np.abs(gz)), 1e-300) < 1e-2

    def test_oversized_cutoff_radius_raises(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        with pytest.raises(CutoffRadiusInvalid):
            cutoff_solve(ch, parts, cfg, suite_forms[0], r_cut=ch.r1)

    def test_non_closed_input_raises(self, hsys):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        r = ch.r2

        def fn(z):
            z = np.atleast_2d(z)
            out = np.zeros((z.shape[0], 6), dtype=complex)
            out[:, 0] = np.abs(z[:, 0]) ** 2
            return out

        bad = SmoothFormField("2", 2, fn,
                              support_hint=(np.zeros(2, complex), r / 4, r))
        with pytest.raises(InputNotClosed):
            cutoff_solve(ch, parts, cfg, bad)

    def test_mc_cap_exceeded(self, hsys, suite_forms):
        ch, parts, cfg = hsys.chart, hsys.partitions, hsys.cfg
        tight = replace(cfg, mc_cap=1e-14)
        with pytest.raises(McBudgetExceeded):
            homotopy_coeffs(ch, parts, tight, suite_forms[0], hsys.grid[:1])


class TestAveraging:
    def test_zero_function_gives_zero(self, hsys):
        dom = hsys.chart.domain
        val = averaging_T(dom, hsys.cfg, lambda z: np.zeros(len(z)),
                          hsys.grid[0], hsys.chart)
        assert val == 0.0

    def test_homogeneous_of_degree_one(self, hsys):
        dom = hsys.chart.domain
        z = hsys.grid[3]

        def f(pts):
            return np.linalg.norm(pts, axis=1)

        a = averaging_T(dom, hsys.cfg, f, z, hsys.chart)
        b = averaging_T(dom, hsys.cfg, lambda p: 3.0 * f(p), z, hsys.chart)
        assert a > 0.0
        assert abs(b - 3.0 * a) < 1e-12 * abs(b)

    def test_monotone_in_the_integrand(self, hsys):
        dom = hsys.chart.domain
        z = hsys.grid[3]
        lo = averaging_T(dom, hsys.cfg, lambda p: np.ones(len(p)), z, hsys.chart)
        hi = averaging_T(dom, hsys.cfg, lambda p: 2.0 * np.ones(len(p)), z,
                         hsys.chart)
        assert 0.0 < lo < hi


def _apply_cutoff(psi, theta):
    def fn(z):
        z = np.atleast_2d(z)
        return psi(np.linalg.norm(z, axis=1))[:, None] * theta.coeffs_at(z)

    return SmoothFormField("2", theta.dim_n, fn,
                           support_hint=theta.support_hint)
