"""Oracle and property suites that audit each subsystem at a chosen budget.

Every suite returns a JSON-ready report: the resolved configuration, a list
of named checks with their measured constants, and tables for rendering.
Tier "small" is a fast smoke pass, "default" runs the standard sample
counts, "full" raises the counts that have heavier settings.  Reports are
deterministic for a fixed (domain, seed, budget) triple.
"""

from __future__ import annotations

import os

import numpy as np

from .carleson import (
    bmo_s_norm,
    carleson_norm_current,
    carleson_norm_measure,
    pointwise_k_norm,
    s_carleson_norm_current,
    s_carleson_norm_measure,
)
from .currents import DiscreteCurrent, SmoothFormField, exterior_derivative_coeffs
from .domains import DomainSpec, boundary_distance, shrunken_domain
from .errors import OutOfRange
from .fixtures import closed_dipole_current, closed_two_form_suite, probe_points
from .geometry import (
    Polydisk,
    extremal_frame,
    k_weight,
    pseudo_distance_d,
    pseudo_distance_d1,
    tau,
    tau_batch,
)
from .homotopy import (
    HomotopyConfig,
    audit_partition,
    averaging_T,
    build_homotopy_system,
    cutoff_solve,
    h_direction_derivative,
    h_lambda,
    homotopy_d_coeffs,
    measure_contraction_constants,
    verify_identity_suite,
)
from .mollify import Mollifier, mollify_current, shrunken_support
from .sampling import sphere_directions
from .util import rng_for

BUDGET_TIERS = ("small", "default", "full")
SUITES = ("geometry", "carleson", "mollify", "homotopy")


# ---------------------------------------------------------------------------
# report plumbing


def _check(name: str, passed, **measured) -> dict:
    entry = {"name": name, "passed": bool(passed)}
    entry.update(measured)
    return entry


def _table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _report(suite, domain, seed, tier, resolved, checks, tables) -> dict:
    return {
        "suite": suite,
        "domain": {
            "name": domain.name,
            "params": [int(p) for p in domain.params],
            "constants": domain.constants_dict(),
        },
        "seed": int(seed),
        "budget": {"tier": tier, **resolved},
        "checks": checks,
        "tables": tables,
        "passed": all(c["passed"] for c in checks),
    }


def _pick_budget(table: dict, tier: str) -> dict:
    if tier not in table:
        raise ValueError(f"unknown budget tier {tier!r}; use one of {BUDGET_TIERS}")
    return dict(table[tier])


def _band_points(domain: DomainSpec, count: int, seed: int, *tags,
                 depth_lo: float = 0.005, depth_hi: float = 0.04) -> np.ndarray:
    """Interior points at controlled boundary depth, star-shaped scan."""
    rng = rng_for(seed, "verify-band", *tags)
    dirs = sphere_directions(count, domain.dim_n, seed, "verify-band", *tags)
    depths = depth_lo + (depth_hi - depth_lo) * rng.random(count)
    pts = np.empty_like(dirs)
    for i, (u, d) in enumerate(zip(dirs, depths)):
        lo, hi = 0.0, 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if domain.rho(mid * u) < 0.0:
                lo = mid
            else:
                hi = mid
        pts[i] = u * 0.5 * (lo + hi) * (1.0 - d)
    return pts


def _base_point(domain: DomainSpec, depth: float = 0.1) -> np.ndarray:
    """Interior point on the first axis at the given boundary depth."""
    lo, hi = 0.0, 2.0
    e1 = np.zeros(domain.dim_n, dtype=np.complex128)
    e1[0] = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if domain.rho(mid * e1) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * (1.0 - depth) * e1


def _axis(n: int, i: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.complex128)
    v[i] = 1.0
    return v


# ---------------------------------------------------------------------------
# geometry suite

_GEOM_BUDGETS = {
    "small": dict(scale_samples=40, decomp_dirs=30, pair_samples=40,
                  triple_samples=60, radius_samples=30, frame_samples=8,
                  witness_samples=8, ladder_dirs=3),
    "default": dict(scale_samples=200, decomp_dirs=100, pair_samples=200,
                    triple_samples=500, radius_samples=200, frame_samples=20,
                    witness_samples=16, ladder_dirs=5),
    "full": dict(scale_samples=200, decomp_dirs=100, pair_samples=200,
                 triple_samples=500, radius_samples=500, frame_samples=30,
                 witness_samples=24, ladder_dirs=5),
}


def _tau_oracle_checks(domain: DomainSpec, seed: int, checks, tables) -> None:
    n = domain.dim_n
    rows = []
    worst = 0.0
    if domain.name == "ellipsoid":
        # axis directions at (r, 0, ...): the slice profiles integrate in
        # closed form, normal slot -r + sqrt(r^2 + eps), slot j eps^(1/2mj)
        r = 0.9
        zeta = r * _axis(n, 0)
        exps = np.asarray(domain.params, dtype=float)
        for eps in (1e-2, 1e-3, 1e-4):
            for j in range(n):
                got = tau(domain, zeta, _axis(n, j), eps)
                if j == 0:
                    want = -r + np.sqrt(r * r + eps)
                else:
                    want = eps ** (1.0 / (2.0 * exps[j]))
                rel = abs(got - want) / want
                worst = max(worst, rel)
                rows.append([f"axis-{j}", float(eps), float(got), float(want), float(rel)])
        tol = 1e-3
    elif domain.name == "ball":
        # random directions: the slice is |zeta + mu v|^2, tau solves
        # lam^2 + 2 g lam = eps with g = |<v, conj zeta>|
        zetas = _band_points(domain, 10, seed, "tau-oracle", depth_lo=0.02, depth_hi=0.2)
        dirs = sphere_directions(10, n, seed, "tau-oracle-dirs")
        for i, (zeta, v) in enumerate(zip(zetas, dirs)):
            eps = float(10.0 ** (-2 - (i % 3)))
            g = abs(np.sum(v * np.conj(zeta)))
            want = -g + np.sqrt(g * g + eps)
            got = tau(domain, zeta, v, eps)
            rel = abs(got - want) / want
            worst = max(worst, rel)
            rows.append([f"random-{i}", eps, float(got), float(want), float(rel)])
        tol = 5e-3
    else:
        return
    checks.append(_check("tau-closed-form", worst <= tol,
                         max_rel_err=float(worst), tol=tol))
    tables["tau_oracle"] = _table(["direction", "eps", "tau", "oracle", "rel_err"], rows)


def _scaling_checks(domain: DomainSpec, seed: int, cnt: dict, checks, tables) -> None:
    n, m_type = domain.dim_n, domain.type_m
    zeta0 = _base_point(domain)
    eps_ladder = 1e-2 * 4.0 ** -np.arange(4)

    def fit_exponent(v):
        taus = tau_batch(domain, zeta0, np.repeat(v[None, :], len(eps_ladder), axis=0),
                         eps_ladder)
        slope = np.polyfit(np.log(eps_ladder), np.log(taus), 1)[0]
        return float(slope)

    rows = [["tangential", fit_exponent(_axis(n, n - 1))],
            ["normal", fit_exponent(_axis(n, 0))]]
    for i, v in enumerate(sphere_directions(cnt["ladder_dirs"], n, seed, "ladder")):
        rows.append([f"random-{i}", fit_exponent(v)])
    tan_exp, nor_exp = rows[0][1], rows[1][1]
    checks.append(_check("scaling-exponents",
                         abs(tan_exp - 1.0 / m_type) < 0.1 and abs(nor_exp - 1.0) < 0.1,
                         tangential=tan_exp, normal=nor_exp,
                         expected_tangential=1.0 / m_type))
    tables["scaling_law"] = _table(["direction", "exponent"], rows)

    # two-sided dilation bounds tau(lam eps) / tau(eps) in [lam^(1/m)/2, 2 lam]
    rng = rng_for(seed, "verify", "scale-ratio")
    zetas = _band_points(domain, cnt["scale_samples"], seed, "scale",
                         depth_lo=0.01, depth_hi=0.1)
    dirs = sphere_directions(cnt["scale_samples"], n, seed, "scale-dirs")
    lams = np.array([2.0, 4.0, 8.0])[np.arange(cnt["scale_samples"]) % 3]
    epss = 10.0 ** rng.uniform(-4, -2, size=cnt["scale_samples"])
    lo_margin, hi_margin = np.inf, 0.0
    violations = 0
    for zeta, v, lam, eps in zip(zetas, dirs, lams, epss):
        ratio = tau(domain, zeta, v, lam * eps) / tau(domain, zeta, v, eps)
        lo, hi = 0.5 * lam ** (1.0 / m_type), 2.0 * lam
        lo_margin = min(lo_margin, ratio / lo)
        hi_margin = max(hi_margin, ratio / hi)
        if not lo <= ratio <= hi:
            violations += 1
    checks.append(_check("scale-ratio-bounds", violations == 0,
                         samples=int(cnt["scale_samples"]), violations=violations,
                         min_over_lower=float(lo_margin), max_over_upper=float(hi_margin)))

    if domain.name == "ellipsoid":
        zeta = 0.9 * _axis(n, 0)
        v, eps = _axis(n, n - 1), 1e-3
        base = tau(domain, zeta, v, eps)
        worst = 0.0
        for lam in (2.0, 4.0, 8.0):
            ratio = tau(domain, zeta, v, lam * eps) / base
            worst = max(worst, abs(ratio - lam ** (1.0 / m_type)) / lam ** (1.0 / m_type))
        checks.append(_check("tangential-dilation-power", worst <= 1e-2,
                             max_rel_err=float(worst)))


def _decomposition_check(domain: DomainSpec, seed: int, cnt: dict, checks) -> None:
    n = domain.dim_n
    eps = 1e-3
    per_point = cnt["decomp_dirs"] // 2
    lo_all, hi_all = np.inf, 0.0
    violations = 0
    for k, depth in enumerate((0.05, 0.15)):
        zeta = _base_point(domain, depth)
        fr = extremal_frame(domain, zeta, eps)
        dirs = sphere_directions(per_point, n, seed, "decomp", k)
        taus = tau_batch(domain, zeta, dirs, eps)
        coords = np.abs(dirs @ np.conj(fr.vectors.T))
        bound = np.sum(coords / fr.radii, axis=1)
        ratio = (1.0 / taus) / bound
        lo_all = min(lo_all, float(np.min(ratio)))
        hi_all = max(hi_all, float(np.max(ratio)))
        violations += int(np.sum((ratio < 1.0 / 8.0) | (ratio > 8.0)))
    checks.append(_check("directional-decomposition", violations == 0,
                         dirs=2 * per_point, violations=violations,
                         ratio_band=[lo_all, hi_all]))


def _distance_checks(domain: DomainSpec, seed: int, cnt: dict, checks, tables) -> None:
    n = domain.dim_n
    rng = rng_for(seed, "verify", "distance")
    base = _band_points(domain, cnt["pair_samples"], seed, "dist",
                        depth_lo=0.01, depth_hi=0.05)
    offs = sphere_directions(cnt["pair_samples"], n, seed, "dist-offs")
    steps = 10.0 ** rng.uniform(-2.5, -1.3, size=cnt["pair_samples"])
    ratio_hi = 0.0
    used = 0
    for zeta, u, s in zip(base, offs, steps):
        z = zeta + s * u
        if domain.rho(z) >= 0.0:
            continue
        try:
            dv = pseudo_distance_d(domain, zeta, z)
            d1v = pseudo_distance_d1(domain, zeta, z)
        except OutOfRange:
            continue
        used += 1
        ratio_hi = max(ratio_hi, dv / d1v, d1v / dv)
    eq_ok = used >= cnt["pair_samples"] // 2 and np.isfinite(ratio_hi) and ratio_hi <= 64.0
    checks.append(_check("distance-equivalence", eq_ok,
                         pairs=used, equivalence_constant=float(ratio_hi)))

    trip_base = _band_points(domain, cnt["triple_samples"], seed, "tri",
                             depth_lo=0.01, depth_hi=0.05)
    offs = sphere_directions(2 * cnt["triple_samples"], n, seed, "tri-offs")
    steps = 10.0 ** rng.uniform(-2.5, -1.5, size=(cnt["triple_samples"], 2))
    k_max = 0.0
    tri_used = 0
    for i, a in enumerate(trip_base):
        b = a + steps[i, 0] * offs[2 * i]
        c = a + steps[i, 1] * offs[2 * i + 1]
        if domain.rho(b) >= 0.0 or domain.rho(c) >= 0.0:
            continue
        try:
            dac = pseudo_distance_d(domain, a, c)
            dab = pseudo_distance_d(domain, a, b)
            dbc = pseudo_distance_d(domain, b, c)
        except OutOfRange:
            continue
        tri_used += 1
        k_max = max(k_max, dac / max(dab + dbc, 1e-300))
    tri_ok = tri_used >= cnt["triple_samples"] // 2 and np.isfinite(k_max) and k_max <= 64.0
    checks.append(_check("quasi-triangle", tri_ok,
                         triples=tri_used, K=float(k_max)))
    tables["distance"] = _table(
        ["quantity", "value", "samples"],
        [["d-vs-d1 equivalence C", float(ratio_hi), used],
         ["quasi-triangle K", float(k_max), tri_used]])


def _point_radius_check(domain: DomainSpec, seed: int, cnt: dict, checks) -> None:
    # re-derive the membership crossing with an independent dense scan and
    # compare against the bisected radius
    n = domain.dim_n
    rng = rng_for(seed, "verify", "radius")
    zetas = _band_points(domain, cnt["radius_samples"], seed, "radius",
                         depth_lo=0.01, depth_hi=0.1)
    dirs = sphere_directions(cnt["radius_samples"], n, seed, "radius-dirs")
    epss = 10.0 ** rng.uniform(-4, -2, size=cnt["radius_samples"])
    angles = np.exp(2j * np.pi * np.arange(128) / 128.0)
    lo_r, hi_r = np.inf, 0.0
    for zeta, v, eps in zip(zetas, dirs, epss):
        t = tau(domain, zeta, v, eps)
        rho0 = float(domain.rho(zeta))
        lam = t * np.geomspace(0.25, 4.0, 400)
        pts = zeta[None, None, :] + (lam[:, None] * angles[None, :])[:, :, None] * v[None, None, :]
        dev = np.max(domain.rho(pts), axis=1) - rho0
        crossed = np.nonzero(dev >= eps)[0]
        if crossed.size == 0:
            hi_r = np.inf
            continue
        ratio = lam[crossed[0]] / t
        lo_r = min(lo_r, ratio)
        hi_r = max(hi_r, ratio)
    checks.append(_check("point-radius-consistency",
                         0.93 <= lo_r and hi_r <= 1.07,
                         samples=int(cnt["radius_samples"]),
                         crossing_band=[float(lo_r), float(hi_r)]))


def _frame_checks(domain: DomainSpec, seed: int, cnt: dict, checks) -> None:
    n = domain.dim_n
    eps = 1e-3
    zetas = _band_points(domain, cnt["frame_samples"], seed, "frames",
                         depth_lo=0.02, depth_hi=0.1)
    shifts = sphere_directions(cnt["frame_samples"], n, seed, "frame-shift")
    lo_r, hi_r = np.inf, 0.0
    for zeta, u in zip(zetas, shifts):
        fr = extremal_frame(domain, zeta, eps)
        fr.validate()
        fr2 = extremal_frame(domain, zeta + 0.3 * np.min(fr.radii) * u, eps)
        ratio = np.sort(fr2.radii) / np.sort(fr.radii)
        lo_r = min(lo_r, float(np.min(ratio)))
        hi_r = max(hi_r, float(np.max(ratio)))
    checks.append(_check("frame-stability", lo_r >= 0.25 and hi_r <= 4.0,
                         samples=int(cnt["frame_samples"]),
                         radii_ratio_band=[lo_r, hi_r]))


def _witness_check(domain: DomainSpec, seed: int, cnt: dict, checks) -> None:
    # polydisk against pseudo-ball: probe points planted on one boundary must
    # sit at comparable pseudo-distance under the other
    n = domain.dim_n
    eps = 1e-3
    zetas = _band_points(domain, cnt["witness_samples"], seed, "witness",
                         depth_lo=0.02, depth_hi=0.08)
    dirs = sphere_directions(cnt["witness_samples"], n, seed, "witness-dirs")
    k_wit = 0.0
    for zeta, u in zip(zetas, dirs):
        fr = extremal_frame(domain, zeta, eps)
        pd = Polydisk(frame=fr, dilation=1.0, c0=domain.c0)
        z_ball = zeta + 0.9 * domain.c0 * tau(domain, zeta, u, eps) * u
        z_poly = zeta + 0.9 * pd.slot_radii[n - 1] * fr.vectors[n - 1]
        try:
            k_wit = max(k_wit,
                        pseudo_distance_d1(domain, zeta, z_ball) / eps,
                        eps / pseudo_distance_d1(domain, zeta, z_ball),
                        pseudo_distance_d(domain, zeta, z_poly) / eps,
                        eps / pseudo_distance_d(domain, zeta, z_poly))
        except OutOfRange:
            k_wit = np.inf
    checks.append(_check("polydisk-pseudoball-witness",
                         np.isfinite(k_wit) and k_wit <= 64.0,
                         samples=int(cnt["witness_samples"]),
                         witness_constant=float(k_wit)))


def verify_geometry(domain: DomainSpec, *, seed: int = 0,
                    budget: str = "default") -> dict:
    cnt = _pick_budget(_GEOM_BUDGETS, budget)
    checks, tables = [], {}
    _tau_oracle_checks(domain, seed, checks, tables)
    _scaling_checks(domain, seed, cnt, checks, tables)
    _decomposition_check(domain, seed, cnt, checks)
    _distance_checks(domain, seed, cnt, checks, tables)
    _point_radius_check(domain, seed, cnt, checks)
    _frame_checks(domain, seed, cnt, checks)
    _witness_check(domain, seed, cnt, checks)
    return _report("geometry", domain, seed, budget, cnt, checks, tables)


# ---------------------------------------------------------------------------
# carleson suite

_CARL_BUDGETS = {
    "small": dict(boundary_count=8, patch_samples=1000, atoms=12, levels=4,
                  tent_mc=64, mass_mc=1024, dipoles=1),
    "default": dict(boundary_count=16, patch_samples=2000, atoms=24, levels=6,
                    tent_mc=128, mass_mc=2048, dipoles=2),
    "full": dict(boundary_count=24, patch_samples=4000, atoms=32, levels=6,
                 tent_mc=128, mass_mc=4096, dipoles=3),
}


def _const_one_form(n: int, coeffs) -> SmoothFormField:
    coeffs = np.asarray(coeffs, dtype=complex)

    def fn(z):
        z = np.atleast_2d(z)
        return np.broadcast_to(coeffs, (z.shape[0], coeffs.size)).copy()

    return SmoothFormField("(0,1)", n, fn)


def _random_measure(domain: DomainSpec, atoms: int, seed: int, *tags) -> DiscreteCurrent:
    rng = rng_for(seed, "verify", "measure", *tags)
    pts = _band_points(domain, atoms, seed, "atoms", *tags,
                       depth_lo=0.003, depth_hi=0.06)
    masses = rng.uniform(0.2, 1.5, size=(atoms, 1)).astype(complex)
    return DiscreteCurrent("0", pts, masses)


def verify_carleson(domain: DomainSpec, *, seed: int = 0,
                    budget: str = "default") -> dict:
    cnt = _pick_budget(_CARL_BUDGETS, budget)
    n = domain.dim_n
    checks, tables = [], {}
    kw = dict(boundary_count=cnt["boundary_count"],
              patch_samples=cnt["patch_samples"], seed=seed)

    # unit atom at the deep center sits below every tent: norm is its mass
    center = np.zeros((1, n), dtype=complex)
    dirac = DiscreteCurrent("0", center, np.ones((1, 1), complex))
    rep1 = carleson_norm_measure(domain, dirac, **kw)
    rep2 = carleson_norm_measure(domain, dirac.scaled(2.0), **kw)
    checks.append(_check("dirac-center-norm",
                         rep1.norm_value == 1.0 and rep2.norm_value == 2.0,
                         norm=float(rep1.norm_value), doubled=float(rep2.norm_value)))

    mu1 = _random_measure(domain, cnt["atoms"], seed, 1)
    mu2 = _random_measure(domain, cnt["atoms"], seed, 2)
    n1 = carleson_norm_measure(domain, mu1, **kw).norm_value
    n2 = carleson_norm_measure(domain, mu2, **kw).norm_value
    ns = carleson_norm_measure(domain, mu1 + mu2, **kw).norm_value
    nh = carleson_norm_measure(domain, mu1.scaled(2.5), **kw).norm_value
    checks.append(_check("homogeneity-triangle",
                         abs(nh - 2.5 * n1) <= 1e-12 * nh
                         and ns <= (n1 + n2) * (1.0 + 1e-12),
                         norm_sum=float(ns), norm_parts=float(n1 + n2),
                         homogeneity_defect=float(abs(nh - 2.5 * n1))))

    # more dyadic levels widen the tent family, the sup can only grow;
    # raising the scale floor s prunes it
    lv = cnt["levels"]
    v_lo = s_carleson_norm_measure(domain, mu1, s=0.0, levels=lv, **kw).norm_value
    v_hi = s_carleson_norm_measure(domain, mu1, s=0.0, levels=lv + 2, **kw).norm_value
    v_s1 = s_carleson_norm_measure(domain, mu1, s=domain.eps0 / 16, levels=lv, **kw).norm_value
    v_s2 = s_carleson_norm_measure(domain, mu1, s=domain.eps0 / 4, levels=lv, **kw).norm_value
    checks.append(_check("scale-monotonicity",
                         v_lo <= v_hi + 1e-15 and v_s2 <= v_s1 + 1e-15
                         and v_s1 <= v_lo + 1e-15,
                         levels_lo=float(v_lo), levels_hi=float(v_hi),
                         floor_quarter=float(v_s2), floor_sixteenth=float(v_s1)))
    tables["scale_monotonicity"] = _table(
        ["variant", "norm"],
        [[f"levels={lv}", float(v_lo)], [f"levels={lv + 2}", float(v_hi)],
         ["s=eps0/16", float(v_s1)], ["s=eps0/4", float(v_s2)]])

    # mollification moves the norm by at most the structural factor 4
    eps_m = 0.04
    m = Mollifier(eps_m, n)
    ratio_band = [np.inf, 0.0]
    for k in range(cnt["dipoles"]):
        fix = closed_dipole_current(domain, seed + 17 * k, step=eps_m / 20)
        fld = mollify_current(fix.current, m)
        rd = carleson_norm_current(domain, fix.current, boundary_count=8,
                                   seed=seed, patch_samples=1000)
        rs = carleson_norm_current(domain, fld, boundary_count=8, seed=seed,
                                   patch_samples=1000, tent_mc=cnt["tent_mc"],
                                   mass_mc=cnt["mass_mc"])
        r = rs.norm_value / rd.norm_value
        ratio_band = [min(ratio_band[0], r), max(ratio_band[1], r)]
    checks.append(_check("smooth-discrete-consistency",
                         0.25 <= ratio_band[0] and ratio_band[1] <= 4.0,
                         ratio_band=[float(ratio_band[0]), float(ratio_band[1])]))

    # directional weight against the closed-form slice radii
    z_near = _base_point(domain, depth=0.02)
    delta = boundary_distance(domain, z_near)
    k_nor = k_weight(domain, z_near, _axis(n, 0))
    g = abs(z_near[0])
    nor_oracle = delta / (-g + np.sqrt(g * g + delta))
    rel_nor = abs(k_nor - nor_oracle) / nor_oracle
    k_rows = [["normal", float(k_nor), float(nor_oracle), float(rel_nor)]]
    ok = rel_nor <= 5e-3
    if domain.name == "ellipsoid":
        m_hi = float(max(domain.params))
        k_tan = k_weight(domain, z_near, _axis(n, n - 1))
        tan_oracle = delta ** (1.0 - 1.0 / (2.0 * m_hi))
        rel_tan = abs(k_tan - tan_oracle) / tan_oracle
        k_rows.append(["tangential", float(k_tan), float(tan_oracle), float(rel_tan)])
        ok = ok and rel_tan <= 5e-3
    k_shift = k_weight(domain, z_near - 1e-3 * _axis(n, 0), _axis(n, 0))
    cont = k_shift / k_nor
    ok = ok and 0.5 <= cont <= 2.0
    checks.append(_check("k-weight-oracle", ok, continuity_ratio=float(cont)))
    tables["k_weight"] = _table(["direction", "k", "oracle", "rel_err"], k_rows)

    fld = _const_one_form(n, [0.7] + [0.4j] * (n - 1))
    z_mid = _base_point(domain, depth=0.05)
    a = pointwise_k_norm(domain, fld, z_mid, seed=seed, method="tau")
    b = pointwise_k_norm(domain, fld, z_mid, seed=seed, method="frame")
    checks.append(_check("k-norm-method-equivalence", 1.0 / 6.0 < b / a < 6.0,
                         tau_method=float(a), frame_method=float(b)))

    def f_const(z):
        return np.full(np.atleast_2d(z).shape[0], 2.3)

    def f_var(z):
        z = np.atleast_2d(z)
        return np.real(z[:, 0] ** 2) + 0.3 * np.abs(z[:, -1])

    bk = dict(boundary_count=cnt["boundary_count"],
              patch_samples=cnt["patch_samples"], seed=seed, levels=cnt["levels"])
    b_const = bmo_s_norm(domain, f_const, s=0.01, **bk)
    b_var = bmo_s_norm(domain, f_var, s=0.01, **bk)
    b_shift = bmo_s_norm(domain, lambda z: f_var(z) + 5.0, s=0.01, **bk)
    checks.append(_check("bmo-constants",
                         b_const <= 1e-12 and abs(b_shift - b_var) <= 1e-12 * max(b_var, 1.0),
                         constant_norm=float(b_const), shift_defect=float(abs(b_shift - b_var))))

    return _report("carleson", domain, seed, budget, cnt, checks, tables)


# ---------------------------------------------------------------------------
# mollify suite

_MOLL_BUDGETS = {
    "small": dict(n_currents=5, n_global=1, boundary_count=8,
                  patch_samples=1000, probes=12),
    "default": dict(n_currents=20, n_global=3, boundary_count=8,
                    patch_samples=1000, probes=16),
    "full": dict(n_currents=20, n_global=3, boundary_count=16,
                 patch_samples=2000, probes=16),
}


def verify_mollify(domain: DomainSpec, *, seed: int = 0,
                   budget: str = "default") -> dict:
    cnt = _pick_budget(_MOLL_BUDGETS, budget)
    n = domain.dim_n
    checks, tables = [], {}
    eps = 0.04
    h = eps / 20
    m = Mollifier(eps, n)

    d_max = 0.0
    amp_min = np.inf
    ratio_rows = []
    ratio_max = 0.0
    for k in range(cnt["n_currents"]):
        fix = closed_dipole_current(domain, seed + k, step=h)
        fld = mollify_current(fix.current, m)
        pts = probe_points(fix, cnt["probes"], seed=seed + 100 + k, margin=-eps / 2)
        amp_min = min(amp_min, float(np.max(np.abs(fld.coeffs_at(pts)))))
        _, dcoef = exterior_derivative_coeffs(fld, pts, step=h)
        d_max = max(d_max, float(np.max(np.abs(dcoef))))
        rd = carleson_norm_current(domain, fix.current,
                                   boundary_count=cnt["boundary_count"],
                                   seed=seed, patch_samples=cnt["patch_samples"])
        rs = carleson_norm_current(domain, fld,
                                   boundary_count=cnt["boundary_count"],
                                   seed=seed, patch_samples=cnt["patch_samples"],
                                   tent_mc=128, mass_mc=2048)
        r = rs.norm_value / rd.norm_value
        ratio_max = max(ratio_max, r)
        ratio_rows.append([seed + k, float(rd.norm_value), float(rs.norm_value), float(r)])
    checks.append(_check("closedness-fd", d_max <= 1e-3 and amp_min > 0.1,
                         currents=int(cnt["n_currents"]), fd_step=float(h),
                         max_fd_d=float(d_max), min_amplitude=float(amp_min)))
    checks.append(_check("norm-ratio-local", ratio_max <= 10.0,
                         max_ratio=float(ratio_max)))
    tables["norm_ratios"] = _table(["seed", "discrete", "smooth", "ratio"], ratio_rows)

    eps_g = 0.01
    m_g = Mollifier(eps_g, n)
    dom_eps = shrunken_domain(domain, eps_g)
    g_max = 0.0
    for k in range(cnt["n_global"]):
        fix = closed_dipole_current(domain, seed + 31 * (k + 1), step=eps_g / 20)
        fld = mollify_current(fix.current, m_g, region=shrunken_support(domain, eps_g))
        rd = carleson_norm_current(domain, fix.current,
                                   boundary_count=cnt["boundary_count"],
                                   seed=seed, patch_samples=cnt["patch_samples"])
        rs = s_carleson_norm_current(dom_eps, fld, s=eps_g,
                                     boundary_count=cnt["boundary_count"],
                                     seed=seed, patch_samples=cnt["patch_samples"],
                                     tent_mc=128, mass_mc=2048)
        g_max = max(g_max, rs.norm_value / rd.norm_value)
    checks.append(_check("norm-ratio-global", g_max <= 10.0,
                         max_ratio=float(g_max), s=float(eps_g)))

    return _report("mollify", domain, seed, budget, cnt, checks, tables)


# ---------------------------------------------------------------------------
# homotopy suite

_HOMO_BUDGETS = {
    "small": dict(n_lambda=512, n_t=64, grid_shape=[6, 6], subset=6, n_forms=2,
                  calibration_samples=400, constants_samples=100,
                  cutoff_points=2, residual_tol=5e-3),
    "default": dict(n_lambda=4096, n_t=64, grid_shape=[20, 20], subset=25,
                    n_forms=5, calibration_samples=1000, constants_samples=500,
                    cutoff_points=4, residual_tol=5e-3),
    "full": dict(n_lambda=4096, n_t=64, grid_shape=[20, 20], subset=None,
                 n_forms=5, calibration_samples=1000, constants_samples=500,
                 cutoff_points=6, residual_tol=5e-3),
}


def _cutoff_field(psi, theta: SmoothFormField) -> SmoothFormField:
    def fn(z):
        z = np.atleast_2d(z)
        return psi(np.linalg.norm(z, axis=1))[:, None] * theta.coeffs_at(z)

    return SmoothFormField("2", theta.dim_n, fn, support_hint=theta.support_hint)


def _grid_subset(grid: np.ndarray, subset) -> np.ndarray:
    if subset is None or subset >= grid.shape[0]:
        return grid
    idx = np.unique(np.linspace(0, grid.shape[0] - 1, subset).round().astype(int))
    return grid[idx]


def verify_homotopy(domain: DomainSpec, *, seed: int = 0,
                    budget: str = "default", workers: int | None = None) -> dict:
    cnt = _pick_budget(_HOMO_BUDGETS, budget)
    if workers is None and budget != "small":
        workers = os.cpu_count()
    n = domain.dim_n
    checks, tables = [], {}
    p = np.zeros(n, dtype=complex)
    p[0] = 1.0
    cfg = HomotopyConfig(n_lambda=cnt["n_lambda"], n_t=cnt["n_t"], seed=seed)
    sys_ = build_homotopy_system(domain, p, cfg=cfg,
                                 grid_shape=tuple(cnt["grid_shape"]),
                                 calibration_samples=cnt["calibration_samples"])
    ch, parts, cfg = sys_.chart, sys_.partitions, sys_.cfg

    lam = rng_for(seed, "verify", "endpoint-lam").normal(size=n) + 0j
    v = sphere_directions(1, n, seed, "endpoint-dir")[0]
    end_max = 0.0
    dv_max = 0.0
    for z in _grid_subset(sys_.grid, 4):
        end_max = max(end_max,
                      float(np.max(np.abs(h_lambda(ch, parts, cfg, lam, 0.0, z)))),
                      float(np.max(np.abs(h_lambda(ch, parts, cfg, lam, 1.0, z) - z))))
        dv = h_direction_derivative(ch, parts, cfg, lam, 1.0, z, v)
        dv_max = max(dv_max, float(np.max(np.abs(dv - v))))
    checks.append(_check("contraction-endpoints", end_max <= 1e-12 and dv_max <= 1e-6,
                         endpoint_defect=float(end_max),
                         direction_derivative_defect=float(dv_max)))

    audit = sys_.audit
    tag = f"2^-{int(round(-np.log2(cfg.c)))}"
    checks.append(_check("warp-containment", audit["per_c"].get(tag, 1) == 0,
                         c=float(cfg.c), samples=int(audit["n_samples"]),
                         violations=int(audit["per_c"].get(tag, -1))))
    tables["containment"] = _table(
        ["amplitude", "violations"],
        [[k, int(vv)] for k, vv in sorted(audit["per_c"].items())])

    pa = audit_partition(parts, seed=seed, n_check=256)
    checks.append(_check("partition-of-unity",
                         pa["phi_sum_defect"] <= 1e-10 and pa["psi_sum_defect"] <= 1e-10
                         and np.isfinite(pa["phi_derivative_constant"]),
                         phi_sum_defect=float(pa["phi_sum_defect"]),
                         psi_sum_defect=float(pa["psi_sum_defect"]),
                         phi_derivative_constant=float(pa["phi_derivative_constant"]),
                         psi_derivative_constant=float(pa["psi_derivative_constant"])))

    cc = measure_contraction_constants(ch, parts, cfg, sys_.grid,
                                       n_samples=cnt["constants_samples"], seed=seed)
    cc_ok = (cc["image_inside_fraction"] == 1.0
             and cc["c1_inverse_containment"] is not None
             and np.isfinite(cc["depth_comparability"][1]))
    checks.append(_check("contraction-constants", cc_ok, **{
        k: cc[k] for k in ("depth_comparability", "covering_dilation_k",
                           "near_branch_depth_ratio", "far_branch_depth_ratio",
                           "image_inside_fraction", "c1_inverse_containment",
                           "volume_ratio_band")}))

    r_hint = ch.r2 / 4.0
    thetas = closed_two_form_suite(n, cnt["n_forms"], r_hint, 5.0 * r_hint,
                                   seed=seed + 13)
    grid_eval = _grid_subset(sys_.grid, cnt["subset"])
    reports = verify_identity_suite(ch, parts, cfg, thetas, grid_eval,
                                    workers=workers)
    res_rows = [[i, r["max"], r["mean"], r["mc_stderr"], r["imag_max"]]
                for i, r in enumerate(reports)]
    res_max = max(r["max"] for r in reports)
    checks.append(_check("operator-identity", res_max <= cnt["residual_tol"],
                         forms=len(reports), points=int(grid_eval.shape[0]),
                         max_residual=float(res_max),
                         mc_stderr=float(max(r["mc_stderr"] for r in reports)),
                         imag_max=float(max(r["imag_max"] for r in reports))))
    tables["identity_residuals"] = _table(
        ["form", "max", "mean", "mc_stderr", "imag_max"], res_rows)

    det = {}
    theta = thetas[0]
    cutoff_solve(ch, parts, cfg, theta, details=det)
    pts = _grid_subset(sys_.grid, cnt["cutoff_points"])
    d_main, _, _ = homotopy_d_coeffs(ch, parts, cfg,
                                     _cutoff_field(det["psi"], theta), pts)
    dw = d_main + det["g_field"].coeffs_at(pts)
    resid = float(np.max(np.abs(dw - theta.coeffs_at(pts))))
    g_sup = float(np.max(np.abs(det["g_field"].coeffs_at(pts))))
    checks.append(_check("cutoff-solve-residual", resid <= 5e-3 and np.isfinite(g_sup),
                         max_residual=resid, correction_sup=g_sup,
                         points=int(pts.shape[0]),
                         closedness_defect=float(det["closedness_defect"])))

    z_avg = sys_.grid[3]
    f_one = averaging_T(domain, cfg, lambda q: np.ones(len(q)), z_avg, ch)
    f_scaled = averaging_T(domain, cfg, lambda q: 3.0 * np.ones(len(q)), z_avg, ch)
    f_norm = averaging_T(domain, cfg, lambda q: np.linalg.norm(q, axis=1), z_avg, ch)
    checks.append(_check("averaging-operator",
                         f_one > 0.0 and abs(f_scaled - 3.0 * f_one) <= 1e-12 * f_scaled
                         and 0.0 < f_norm <= 2.0 * f_one,
                         unit_average=float(f_one),
                         homogeneity_defect=float(abs(f_scaled - 3.0 * f_one)),
                         norm_average=float(f_norm)))

    resolved = dict(cnt)
    resolved["workers"] = workers
    resolved["c"] = float(cfg.c)
    return _report("homotopy", domain, seed, budget, resolved, checks, tables)


_SUITE_FNS = {
    "geometry": verify_geometry,
    "carleson": verify_carleson,
    "mollify": verify_mollify,
    "homotopy": verify_homotopy,
}


def run_suite(suite: str, domain: DomainSpec, *, seed: int = 0,
              budget: str = "default", **kw) -> dict:
    """Dispatch one verification suite by name."""
    if suite not in _SUITE_FNS:
        raise ValueError(f"unknown suite {suite!r}; use one of {SUITES}")
    return _SUITE_FNS[suite](domain, seed=seed, budget=budget, **kw)
