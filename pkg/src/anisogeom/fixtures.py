"""Seeded test-input generators shared by the test suites and verify reports.

Closed degree-2 inputs are built as exterior derivatives of random degree-1
potentials.  Two families: quadratic-coefficient potentials (their d has
linear coefficients, so centered finite differences reproduce derivatives
exactly and closedness survives discretization at tight tolerances), and
compactly supported bump potentials (used where support localization matters
more than derivative flatness).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .currents import (
    DiscreteCurrent,
    SmoothFormField,
    atomize_field,
    derivative_coeffs_from_columns,
    discrete_exterior_derivative,
    exterior_derivative,
    exterior_derivative_coeffs,
    zero_field,
)
from .domains import DomainSpec
from .sampling import sphere_directions
from .util import real_view, rng_for, smooth_bump_unit, smooth_step, smooth_step_d


def random_quadratic_potential(n: int, seed: int, amplitude: float = 1.0) -> SmoothFormField:
    """Degree-1 field whose coefficients are random quadratics in (z, zbar)."""
    rng = rng_for(seed, "quadpot")

    def draw(*shape):
        return amplitude * (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)

    c0 = draw(n)
    az = draw(n, n)
    ab = draw(n, n)
    qzz = draw(n, n, n)
    qzb = draw(n, n, n)
    qbb = draw(n, n, n)

    def fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        zb = np.conj(z)
        out = c0[None, :] + z @ az.T + zb @ ab.T
        out = out + np.einsum("ijk,mj,mk->mi", qzz, z, z)
        out = out + np.einsum("ijk,mj,mk->mi", qzb, z, zb)
        out = out + np.einsum("ijk,mj,mk->mi", qbb, zb, zb)
        return out

    return SmoothFormField("1", n, fn)


def random_bump_potential(
    n: int, seed: int, center: np.ndarray, radius: float, amplitude: float = 1.0
) -> SmoothFormField:
    """Degree-1 field with a compactly supported radial bump profile."""
    rng = rng_for(seed, "bumppot")
    c = amplitude * (rng.normal(size=n) + 1j * rng.normal(size=n)) / np.sqrt(2.0)
    center = np.asarray(center, dtype=complex)

    def fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        b = smooth_bump_unit(np.linalg.norm(z - center, axis=-1) / radius)
        return b[:, None] * c[None, :]

    return SmoothFormField("1", n, fn, support_hint=(center, 0.0, radius))


@dataclass(frozen=True)
class ClosedCurrentFixture:
    current: DiscreteCurrent
    theta: SmoothFormField  # the underlying smooth closed degree-2 form
    box_lo: np.ndarray
    box_hi: np.ndarray
    spacing: float
    scale: float  # applied so that max |theta| over the box is about 1


def interior_box_center(domain: DomainSpec, seed: int, depth: float) -> np.ndarray:
    """A point at the given depth below the boundary along a seeded ray."""
    d = sphere_directions(1, domain.dim_n, seed, "boxdir")[0]
    lo, hi = 0.0, 1.0
    while domain.rho((hi * d)[None, :])[0] < 0:
        hi *= 2.0
        if hi > 64:
            raise ValueError("unbounded ray")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if domain.rho((mid * d)[None, :])[0] < 0:
            lo = mid
        else:
            hi = mid
    return (lo - depth) * d


def closed_polynomial_current(
    domain: DomainSpec,
    seed: int,
    depth: float = 0.13,
    halfwidth: float = 0.04,
    spacing: float = 0.008,
) -> ClosedCurrentFixture:
    """Atomized d(random quadratic potential) on a deep interior box.

    The smooth form has linear coefficients, hence is exactly closed and flat
    to third order; midpoint-cell atomization keeps the regularized field's
    finite-difference d small."""
    n = domain.dim_n
    center = interior_box_center(domain, seed, depth)
    pot = random_quadratic_potential(n, seed)
    theta = exterior_derivative(pot, step=1e-3)

    cr = real_view(center[None, :])[0]
    lo = cr - halfwidth
    hi = cr + halfwidth
    probe = atomize_field(theta, lo, hi, spacing=2 * halfwidth / 4)
    peak = float(np.max(np.abs(theta.coeffs_at(probe.points)))) if probe.n_atoms else 1.0
    scale = 1.0 / max(peak, 1e-12)
    theta = theta.scaled(scale)

    T = atomize_field(theta, lo, hi, spacing=spacing)
    return ClosedCurrentFixture(T, theta, lo, hi, spacing, scale)


def closed_dipole_current(
    domain: DomainSpec,
    seed: int,
    step: float,
    depth: float = 0.13,
    radius: float = 0.04,
    spacing: float = 0.01,
) -> ClosedCurrentFixture:
    """Degree-2 current that is d (at the given step) of an atomized potential.

    The potential is a compact random bump 1-form sampled on a cell grid; its
    discrete exterior derivative is closed against a centered finite
    difference at the same step, so the mollified field passes closedness
    audits at that step regardless of the grid spacing."""
    n = domain.dim_n
    center = interior_box_center(domain, seed, depth)
    eta = random_bump_potential(n, seed, center, radius)
    theta = exterior_derivative(eta, step=min(spacing / 4, 1e-3))

    cr = real_view(center[None, :])[0]
    lo = cr - radius
    hi = cr + radius
    S = atomize_field(eta, lo, hi, spacing=spacing, keep_tol=1e-14)
    T = discrete_exterior_derivative(S, step=step)
    return ClosedCurrentFixture(T, theta, lo, hi, spacing, 1.0)


def probe_points(fix: ClosedCurrentFixture, count: int, seed: int, margin: float) -> np.ndarray:
    """Random points inside the fixture box keeping `margin` off every face."""
    rng = rng_for(seed, "probes")
    lo = fix.box_lo + margin
    hi = fix.box_hi - margin
    if np.any(hi <= lo):
        raise ValueError("margin leaves no probe region")
    u = rng.uniform(size=(count, lo.size))
    reals = lo + u * (hi - lo)
    return reals[:, 0::2] + 1j * reals[:, 1::2]


# ---------------------------------------------------------------------------
# annulus-supported smooth forms with analytic derivatives


def annulus_envelope(r_lo: float, r_hi: float):
    """Radial C-infinity profile on [r_lo, r_hi] and its derivative.

    Rises over the first quarter of the annulus width, sits at 1 on the
    middle plateau, falls over the last quarter."""
    rise = 0.25 * (r_hi - r_lo)

    def g(r):
        r = np.asarray(r, dtype=np.float64)
        return smooth_step((r - r_lo) / rise) * smooth_step((r_hi - r) / rise)

    def gp(r):
        r = np.asarray(r, dtype=np.float64)
        up = smooth_step_d((r - r_lo) / rise) / rise
        dn = smooth_step_d((r_hi - r) / rise) / rise
        return up * smooth_step((r_hi - r) / rise) - smooth_step((r - r_lo) / rise) * dn

    return g, gp


_ONE_FORM_D_MAPS: dict[int, tuple] = {}


def _one_form_d_map(n: int) -> tuple:
    """R-linear map from Wirtinger columns of a real 1-form to d coefficients.

    Probing derivative_coeffs_from_columns once per entry gives matrices so
    that the packed degree-2 layout is
    dz_flat @ l1 + conj(dz_flat) @ l2 + dzbar_flat @ l3 + conj(dzbar_flat) @ l4
    for columns flattened row-major as (derivative dir, coefficient)."""
    if n in _ONE_FORM_D_MAPS:
        return _ONE_FORM_D_MAPS[n]
    nn = n * n
    mats = []
    for slot in range(2):
        rows_lin, rows_con = [], []
        for e in range(nn):
            unit = np.zeros((1, n, n), dtype=np.complex128)
            unit.flat[e] = 1.0
            zero = np.zeros((1, n, n), dtype=np.complex128)
            pair = (unit, zero) if slot == 0 else (zero, unit)
            _, c_re = derivative_coeffs_from_columns("1", n, *pair)
            pair_i = (1j * unit, zero) if slot == 0 else (zero, 1j * unit)
            _, c_im = derivative_coeffs_from_columns("1", n, *pair_i)
            rows_lin.append(0.5 * (c_re[0] - 1j * c_im[0]))
            rows_con.append(0.5 * (c_re[0] + 1j * c_im[0]))
        mats.append(np.stack(rows_lin))
        mats.append(np.stack(rows_con))
    _ONE_FORM_D_MAPS[n] = tuple(mats)
    return _ONE_FORM_D_MAPS[n]


def annulus_one_form(n: int, seed: int, r_lo: float, r_hi: float):
    """Real 1-form g(|z|) q(z) with affine q and its exact derivative.

    Returns (eta, theta): theta = d eta assembled from analytic Wirtinger
    columns, so theta is closed identically and eta.analytic_d is exact.
    Both are normalized so max |theta| over the support is close to 1.
    """
    rng = rng_for(seed, "annulus-form")
    g, gp = annulus_envelope(r_lo, r_hi)
    rise = 0.25 * (r_hi - r_lo)

    def draw(*shape):
        return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)

    a = draw(n)
    bz = draw(n, n) / r_hi
    bb = draw(n, n) / r_hi
    l1, l2, l3, l4 = _one_form_d_map(n)
    nn = n * n
    l_lin = np.vstack([l1, l3])          # acts on [dz_flat | dzbar_flat]
    l_con = np.vstack([l2, l4])
    bz_t = np.ascontiguousarray(bz.T)
    bb_t = np.ascontiguousarray(bb.T)
    const_flat = np.concatenate([bz_t.reshape(-1), bb_t.reshape(-1)])

    def q(z):
        return a[None, :] + z @ bz.T + np.conj(z) @ bb.T

    def eta_fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        r = np.linalg.norm(z, axis=-1)
        return g(r)[:, None] * q(z)

    def theta_fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        m = z.shape[0]
        r = np.linalg.norm(z, axis=-1)
        live = np.nonzero((r > r_lo) & (r < r_hi))[0]
        ncoef = l_lin.shape[1]
        out = np.zeros((m, ncoef), dtype=complex)
        if live.size == 0:
            return out
        zl, rl = z[live], r[live]
        s_up = smooth_step((rl - r_lo) / rise)
        s_dn = smooth_step((r_hi - rl) / rise)
        gv = s_up * s_dn
        gd = (smooth_step_d((rl - r_lo) / rise) * s_dn
              - s_up * smooth_step_d((r_hi - rl) / rise)) / rise
        qv = q(zl)
        al = (gd / (2.0 * rl))[:, None, None]
        cols = np.empty((live.size, 2 * nn), dtype=complex)
        czv = np.conj(zl)
        np.multiply(al * czv[:, :, None], qv[:, None, :],
                    out=cols[:, :nn].reshape(-1, n, n))
        np.multiply(al * zl[:, :, None], qv[:, None, :],
                    out=cols[:, nn:].reshape(-1, n, n))
        cols += gv[:, None] * const_flat[None, :]
        out[live] = cols @ l_lin + np.conj(cols) @ l_con
        return out

    hint = (np.zeros(n, dtype=complex), r_lo, r_hi)
    probe = _annulus_probe(n, r_lo, r_hi, seed)
    scale = 1.0 / max(np.max(np.abs(theta_fn(probe))), 1e-30)
    theta = SmoothFormField("2", n, theta_fn, support_hint=hint)
    theta = theta.scaled(scale)
    zero3 = zero_field("3", n)
    theta = SmoothFormField("2", n, theta.coeff_fn,
                            analytic_d=SmoothFormField("3", n, zero3.coeff_fn,
                                                       support_hint=hint),
                            support_hint=hint)
    eta = SmoothFormField("1", n, eta_fn, support_hint=hint).scaled(scale)
    eta = SmoothFormField("1", n, eta.coeff_fn, analytic_d=theta, support_hint=hint)
    return eta, theta


class _AnnulusTwoFamily:
    """Stacked evaluator for closed annulus 2-forms sharing one envelope.

    Redraws the member parameters from their seeds, so single-member and
    stacked evaluation agree by construction; the radial profile, band mask
    and probe normalization are computed once for every member."""

    def __init__(self, n: int, r_lo: float, r_hi: float, seeds):
        self.n = n
        self.r_lo, self.r_hi = r_lo, r_hi
        self.rise = 0.25 * (r_hi - r_lo)
        k = len(seeds)
        nn = n * n
        a_all = np.empty((k, n), dtype=complex)
        bz_all = np.empty((k, n, n), dtype=complex)
        bb_all = np.empty((k, n, n), dtype=complex)
        for ki, seed in enumerate(seeds):
            rng = rng_for(seed, "annulus-form")

            def draw(*shape):
                return (rng.normal(size=shape)
                        + 1j * rng.normal(size=shape)) / np.sqrt(2.0)

            a_all[ki] = draw(n)
            bz_all[ki] = draw(n, n) / r_hi
            bb_all[ki] = draw(n, n) / r_hi
        l1, l2, l3, l4 = _one_form_d_map(n)
        self.l_lin = np.vstack([l1, l3])
        self.l_con = np.vstack([l2, l4])
        self.ncoef = self.l_lin.shape[1]
        self.a_all = a_all
        self.bzt_cat = np.concatenate([bz_all[ki].T for ki in range(k)], axis=1)
        self.bbt_cat = np.concatenate([bb_all[ki].T for ki in range(k)], axis=1)
        self.const_all = np.stack(
            [np.concatenate([bz_all[ki].T.reshape(-1),
                             bb_all[ki].T.reshape(-1)]) for ki in range(k)])
        self.scales = np.ones(k)
        for ki, seed in enumerate(seeds):
            probe = _annulus_probe(n, r_lo, r_hi, seed)
            raw = self.coeffs_stack(probe)[:, ki, :]
            self.scales[ki] = 1.0 / max(float(np.max(np.abs(raw))), 1e-30)

    def coeffs_stack(self, z: np.ndarray) -> np.ndarray:
        """Coefficients of every member at once, shape (m, k, ncoef)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        n, nn = self.n, self.n * self.n
        k = self.a_all.shape[0]
        m = z.shape[0]
        r = np.sqrt((z.real * z.real + z.imag * z.imag).sum(axis=1))
        live = np.nonzero((r > self.r_lo) & (r < self.r_hi))[0]
        out = np.zeros((m, k, self.ncoef), dtype=complex)
        if live.size == 0:
            return out
        zl, rl = z[live], r[live]
        s_up = smooth_step((rl - self.r_lo) / self.rise)
        s_dn = smooth_step((self.r_hi - rl) / self.rise)
        gv = s_up * s_dn
        gd = (smooth_step_d((rl - self.r_lo) / self.rise) * s_dn
              - s_up * smooth_step_d((self.r_hi - rl) / self.rise)) / self.rise
        czl = np.conj(zl)
        qv = (self.a_all[None, :, :]
              + (zl @ self.bzt_cat).reshape(-1, k, n)
              + (czl @ self.bbt_cat).reshape(-1, k, n))
        al = gd / (2.0 * rl)
        cols = np.empty((live.size, k, 2 * nn), dtype=complex)
        np.multiply((al[:, None] * czl)[:, None, :, None], qv[:, :, None, :],
                    out=cols[:, :, :nn].reshape(-1, k, n, n))
        np.multiply((al[:, None] * zl)[:, None, :, None], qv[:, :, None, :],
                    out=cols[:, :, nn:].reshape(-1, k, n, n))
        cols += gv[:, None, None] * self.const_all[None, :, :]
        flat = cols.reshape(-1, 2 * nn)
        res = (flat @ self.l_lin + np.conj(flat) @ self.l_con).reshape(
            live.size, k, self.ncoef)
        res *= self.scales[None, :, None]
        out[live] = res
        return out


def closed_two_form_suite(n: int, count: int, r_lo: float, r_hi: float,
                          seed: int) -> list[SmoothFormField]:
    """Closed real degree-2 fields sharing one support annulus.

    Members carry an eval_group handle so batch consumers can evaluate the
    whole family in one stacked pass."""
    seeds = [seed + k for k in range(count)]
    family = _AnnulusTwoFamily(n, r_lo, r_hi, seeds)
    out = []
    for k, s in enumerate(seeds):
        theta = annulus_one_form(n, s, r_lo, r_hi)[1]
        out.append(replace(theta, eval_group=(family, k)))
    return out


def radial_two_form(n: int, seed: int, r_lo: float, r_hi: float):
    """Non-closed oracle input: constant real 2-form times a radial envelope.

    Returns (field, g, const_coeffs); contraction averages of this field
    reduce to a 1-d profile integral against the constant part.
    """
    g, _ = annulus_envelope(r_lo, r_hi)
    pot = random_quadratic_potential(n, seed)
    const = exterior_derivative_coeffs(pot, np.zeros((1, n), dtype=complex))[1][0]
    const = const / max(np.max(np.abs(const)), 1e-30)

    def fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        return g(np.linalg.norm(z, axis=-1))[:, None] * const[None, :]

    hint = (np.zeros(n, dtype=complex), r_lo, r_hi)
    return SmoothFormField("2", n, fn, support_hint=hint), g, const


def _annulus_probe(n: int, r_lo: float, r_hi: float, seed: int) -> np.ndarray:
    rng = rng_for(seed, "annulus-probe")
    d = rng.standard_normal((256, 2 * n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, size=256)
    flat = d * r[:, None]
    return flat[:, :n] + 1j * flat[:, n:]
