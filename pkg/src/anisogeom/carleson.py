"""Tent-based Carleson norms for measures, currents, and smooth forms.

The W1 norm of a measure is the sup over boundary tents of mass/area plus the
total mass.  Currents of degree >= 1 are reduced to scalar measures through
direction dictionaries weighted by the anisotropic k-weight; smooth forms go
through the pointwise k-norm density.  All suprema are grid-relative lower
estimates over declared boundary-sample and scale grids.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .currents import DiscreteCurrent, SmoothFormField, slot_pair_two
from .domains import DomainSpec, boundary_distance_batch
from .errors import BadDegree, EmptyScaleRange
from .geometry import (
    extremal_frame,
    greedy_cover,
    polydisk,
    tau_batch,
    tent_membership,
)
from .sampling import sobol_unit, sphere_directions, unit_polydisk_points
from .util import re_inner, rng_for


# ---------------------------------------------------------------------------
# boundary sampling and patch measure


def boundary_samples(
    domain: DomainSpec,
    count: int,
    seed: int = 0,
    patch_center: Optional[np.ndarray] = None,
    patch_spread: float = 0.3,
) -> np.ndarray:
    """Quasi-uniform boundary points: radial projection of sphere directions.

    With patch_center the directions cluster around that point's ray within
    the given angular spread."""
    n = domain.dim_n
    dirs = sphere_directions(count, n, seed, "bdry")
    if patch_center is not None:
        c = np.asarray(patch_center, dtype=complex)
        c = c / np.linalg.norm(c)
        dirs = c[None, :] + patch_spread * dirs
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    out = np.empty((count, n), dtype=complex)
    for i, d in enumerate(dirs):
        # scale the ray until it exits, then bisect rho = 0
        lo, hi = 0.1, 1.0
        while domain.rho(hi * d[None, :])[0] < 0:
            lo, hi = hi, 2.0 * hi
            if hi > 64:
                raise ValueError("unbounded ray while projecting to boundary")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if domain.rho(mid * d[None, :])[0] < 0:
                lo = mid
            else:
                hi = mid
        out[i] = 0.5 * (lo + hi) * d
    return out


@dataclass(frozen=True)
class PatchSample:
    """MC sample of a boundary patch P_eps(xi) on the boundary surface."""

    points: np.ndarray
    weights: np.ndarray  # area weights; sum approximates the patch area
    area: float
    n_attempted: int


_PATCH_CACHE: OrderedDict = OrderedDict()
_PATCH_CACHE_MAX = 4096


def surface_patch_sample(
    domain: DomainSpec,
    xi: np.ndarray,
    eps: float,
    n_samples: int = 10_000,
    seed: int = 0,
) -> PatchSample:
    """Sample the boundary patch by a graph over the tangential coordinates.

    In the extremal frame at (xi, eps) the patch is the graph of the normal
    coordinate over the box  [-r1, r1] x D(r_2) x ... x D(r_n)  (r_k the
    polydisk slot radii); roots are found by bisection along the normal and
    weighted by the area Jacobian of the graph."""
    xi = np.asarray(xi, dtype=complex)
    key = (id(domain), xi.tobytes(), float(eps), int(n_samples), int(seed))
    if key in _PATCH_CACHE:
        _PATCH_CACHE.move_to_end(key)
        return _PATCH_CACHE[key]

    n = domain.dim_n
    pd = polydisk(domain, xi, eps)
    fr = pd.frame
    radii = pd.slot_radii
    r1 = radii[0]

    # tangential box sample: Im(lambda_1) uniform, lambda_k uniform on disks
    u = sobol_unit(n_samples, 2 * n - 1, seed, "patch", float(eps))
    y1 = (2.0 * u[:, 0] - 1.0) * r1
    lam = np.zeros((n_samples, n), dtype=complex)
    lam[:, 0] = 1j * y1
    for k in range(1, n):
        rr = radii[k] * np.sqrt(u[:, 2 * k - 1])
        th = 2.0 * np.pi * u[:, 2 * k]
        lam[:, k] = rr * np.exp(1j * th)
    base = xi + lam @ fr.vectors

    # bracket the normal coordinate: rho < 0 inward, > 0 outward
    span = 4.0 * r1
    v1 = fr.vectors[0]
    lo = np.full(n_samples, -span)
    hi = np.full(n_samples, span)
    rho_lo = domain.rho(base + lo[:, None] * v1)
    rho_hi = domain.rho(base + hi[:, None] * v1)
    ok = (rho_lo < 0) & (rho_hi > 0)
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        neg = domain.rho(base + mid[:, None] * v1) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    x1 = 0.5 * (lo + hi)
    # polydisk membership of the full first-slot coordinate
    ok &= (x1 * x1 + y1 * y1) <= r1 * r1
    pts = base + x1[:, None] * v1

    grad = domain.real_gradient(pts)
    d_x1 = re_inner(grad, v1)
    tang_dirs = [1j * v1] + [w for k in range(1, n) for w in (fr.vectors[k], 1j * fr.vectors[k])]
    slope2 = np.zeros(n_samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        for w in tang_dirs:
            slope2 += (re_inner(grad, w) / d_x1) ** 2
    jac = np.sqrt(1.0 + slope2)
    jac = np.where(np.isfinite(jac), np.minimum(jac, 1e6), 1e6)

    box_vol = (2.0 * r1) * float(np.prod(np.pi * radii[1:] ** 2))
    weights = np.where(ok, jac, 0.0) * (box_vol / n_samples)
    sample = PatchSample(points=pts[ok], weights=weights[ok], area=float(np.sum(weights)), n_attempted=n_samples)
    _PATCH_CACHE[key] = sample
    if len(_PATCH_CACHE) > _PATCH_CACHE_MAX:
        _PATCH_CACHE.popitem(last=False)
    return sample


def surface_patch_measure(
    domain: DomainSpec,
    xi: np.ndarray,
    eps: float,
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Surface measure of P_eps(xi) cut by the boundary (MC estimate)."""
    return surface_patch_sample(domain, xi, eps, n_samples, seed).area


def tent_sample(domain: DomainSpec, xi: np.ndarray, eps: float, count: int, seed: int = 0):
    """Uniform sample of the tent P_eps(xi) with the volume weight per point.

    Returns (points inside the tent, scalar weight), weight = cell volume /
    attempted count, so sums of g(points) * weight estimate the tent integral.
    """
    pd = polydisk(domain, np.asarray(xi, dtype=complex), eps)
    offs = unit_polydisk_points(count, domain.dim_n, seed, "tent", float(eps))
    pts = pd.frame.center + (offs * pd.slot_radii) @ pd.frame.vectors
    inside = domain.rho(pts) < 0.0
    cell = float(np.prod(np.pi * pd.slot_radii**2))
    return pts[inside], cell / count


def dyadic_scales(domain: DomainSpec, s: float = 0.0, levels: int = 6) -> list[float]:
    """Dyadic scale grid in (s, eps0]; raises when the range is empty."""
    if s >= domain.eps0:
        raise EmptyScaleRange(
            f"scale floor {s} leaves no scales below eps0={domain.eps0}", s=s, eps0=domain.eps0
        )
    out = []
    for j in range(levels):
        e = domain.eps0 * 0.5**j
        if e > s:
            out.append(e)
    if not out:
        raise EmptyScaleRange(f"no dyadic scales in ({s}, {domain.eps0}]", s=s, eps0=domain.eps0)
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CarlesonReport:
    norm_value: float
    witness: Optional[tuple]
    per_tent: list
    total_mass: float
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        best = max((r for _, _, r in self.per_tent), default=0.0)
        if abs(self.norm_value - (best + self.total_mass)) > 1e-12 * max(1.0, self.norm_value):
            raise ValueError("report norm does not equal max tent ratio plus mass")

    def to_json(self) -> dict:
        wit = None
        if self.witness is not None:
            xi, eps = self.witness
            wit = {"xi": _flat(xi), "eps": float(eps)}
        return {
            "norm_value": self.norm_value,
            "total_mass": self.total_mass,
            "witness": wit,
            "per_tent": [
                {"xi": _flat(xi), "eps": float(e), "ratio": float(r)} for xi, e, r in self.per_tent
            ],
            "params": self.params,
        }

    def tent_rows(self) -> list[dict]:
        rows = []
        for xi, e, r in self.per_tent:
            row = {"eps": float(e), "ratio": float(r)}
            for k, c in enumerate(np.atleast_1d(xi)):
                row[f"xi{k}_re"] = float(np.real(c))
                row[f"xi{k}_im"] = float(np.imag(c))
            rows.append(row)
        return rows


def _flat(z) -> list[float]:
    out = []
    for c in np.atleast_1d(np.asarray(z, dtype=complex)):
        out.extend([float(c.real), float(c.imag)])
    return out


def _assemble_report(tents, total_mass, params) -> CarlesonReport:
    best = 0.0
    witness = None
    for xi, e, r in tents:
        if r > best:
            best, witness = r, (xi, e)
    return CarlesonReport(
        norm_value=best + total_mass,
        witness=witness,
        per_tent=tents,
        total_mass=total_mass,
        params=params,
    )


# ---------------------------------------------------------------------------
# measures


def carleson_norm_measure(
    domain: DomainSpec,
    mu: DiscreteCurrent,
    boundary_count: int = 24,
    scales: Optional[Sequence[float]] = None,
    seed: int = 0,
    patch_samples: int = 4000,
    masses: Optional[np.ndarray] = None,
    mass_total: Optional[float] = None,
) -> CarlesonReport:
    """W1 norm of an atomic measure: sup of tent mass over patch area + mass.

    `masses` overrides the per-atom masses (used by the current norms to feed
    weighted variants through the same tent machinery)."""
    if scales is None:
        scales = dyadic_scales(domain)
    params = {
        "boundary_count": boundary_count,
        "scales": [float(s) for s in scales],
        "seed": seed,
        "patch_samples": patch_samples,
    }
    if mu.n_atoms == 0:
        return _assemble_report([], 0.0, params)
    if masses is None:
        masses = mu.atom_masses()
    total = float(np.sum(masses)) if mass_total is None else float(mass_total)

    xis = boundary_samples(domain, boundary_count, seed)
    tents = []
    for xi in xis:
        for eps in scales:
            inside = tent_membership(domain, xi, float(eps), mu.points)
            m = float(np.sum(masses[inside]))
            if m == 0.0:
                tents.append((xi, float(eps), 0.0))
                continue
            area = surface_patch_measure(domain, xi, float(eps), patch_samples, seed)
            tents.append((xi, float(eps), m / area))
    return _assemble_report(tents, total, params)


def s_carleson_norm_measure(
    domain: DomainSpec,
    mu: DiscreteCurrent,
    s: float,
    boundary_count: int = 24,
    seed: int = 0,
    patch_samples: int = 4000,
    levels: int = 6,
) -> CarlesonReport:
    """W1_s norm: same sup with the scale grid restricted to (s, eps0]."""
    scales = dyadic_scales(domain, s=s, levels=levels)
    rep = carleson_norm_measure(
        domain, mu, boundary_count=boundary_count, scales=scales, seed=seed, patch_samples=patch_samples
    )
    params = dict(rep.params)
    params["s"] = float(s)
    return CarlesonReport(rep.norm_value, rep.witness, rep.per_tent, rep.total_mass, params)


# ---------------------------------------------------------------------------
# pointwise k-norm


def _decomposition_k(delta: np.ndarray, frame_radii: np.ndarray, coords_abs: np.ndarray) -> np.ndarray:
    # k(z, v) ~ delta * sum_i |a_i| / tau_i through the directional decomposition
    return delta * np.sum(coords_abs / frame_radii, axis=-1)


def _direction_dictionary(n: int, n_dirs: int, seed: int, tags: tuple, frame_vectors: Optional[np.ndarray]):
    dirs = [sphere_directions(n_dirs, n, seed, *tags)]
    if frame_vectors is not None:
        dirs.insert(0, frame_vectors)
    return np.vstack(dirs)


def pointwise_k_norm(
    domain: DomainSpec,
    form: SmoothFormField,
    zeta: np.ndarray,
    n_dirs: int = 512,
    seed: int = 0,
    method: str = "tau",
    refine: bool = True,
) -> float:
    """Sup over unit directions of the k-weighted form magnitude at zeta.

    method "tau" evaluates k through directional radii for every dictionary
    direction; "frame" uses the extremal-frame decomposition of k (much
    cheaper, equivalent up to the decomposition constants)."""
    zeta = np.asarray(zeta, dtype=complex)
    n = domain.dim_n
    delta = float(boundary_distance_batch(domain, zeta[None, :])[0])
    fr = extremal_frame(domain, zeta, delta)
    dirs = _direction_dictionary(n, n_dirs, seed, ("knorm",), fr.vectors)

    if method == "frame":
        coords = np.abs(dirs @ np.conj(fr.vectors.T))
        k = _decomposition_k(delta, fr.radii, coords)
    elif method == "tau":
        taus = tau_batch(domain, zeta, dirs, delta)
        k = delta / taus
    else:
        raise ValueError(f"unknown k method {method!r}")

    def objective(dmat, kvec):
        if form.degree in ("1", "(0,1)"):
            c = form.coeffs_at(zeta[None, :])[0]
            if form.degree == "1":
                vals = 2.0 * np.abs(dmat @ c)  # sup over the phase of the direction
            else:
                vals = np.abs(np.conj(dmat) @ c)
            return vals / kvec, None
        c = form.coeffs_at(zeta[None, :])[0]
        m = dmat.shape[0]
        pairs = slot_pair_two(
            form.degree, n, c[None, None, :], dmat[:, None, :], dmat[None, :, :]
        )
        mat = np.abs(pairs) / (kvec[:, None] * kvec[None, :])
        return mat, np.unravel_index(np.argmax(mat), mat.shape)

    if form.degree in ("1", "(0,1)"):
        vals, _ = objective(dirs, k)
        best = float(np.max(vals))
        bi = int(np.argmax(vals))
        best_dirs = [dirs[bi]]
    elif form.degree in ("(1,1)", "2"):
        mat, idx = objective(dirs, k)
        best = float(np.max(mat))
        best_dirs = [dirs[idx[0]], dirs[idx[1]]]
    else:
        raise BadDegree(f"pointwise k norm undefined for degree {form.degree!r}", degree=form.degree)

    if refine:
        rng = rng_for(seed, "knorm-refine")
        for radius in (0.25, 0.1, 0.04, 0.015):
            for slot in range(len(best_dirs)):
                probes = best_dirs[slot][None, :] + radius * (
                    rng.normal(size=(12, n)) + 1j * rng.normal(size=(12, n))
                )
                probes /= np.linalg.norm(probes, axis=1, keepdims=True)
                cand = np.vstack([best_dirs[slot][None, :], probes])
                if method == "tau":
                    kk = delta / tau_batch(domain, zeta, cand, delta)
                else:
                    cc = np.abs(cand @ np.conj(fr.vectors.T))
                    kk = _decomposition_k(delta, fr.radii, cc)
                if len(best_dirs) == 1:
                    vals, _ = objective(cand, kk)
                    j = int(np.argmax(vals))
                    if vals[j] > best:
                        best = float(vals[j])
                        best_dirs[slot] = cand[j]
                else:
                    other = best_dirs[1 - slot]
                    if method == "tau":
                        ko = delta / tau_batch(domain, zeta, other[None, :], delta)
                    else:
                        co = np.abs(other[None, :] @ np.conj(fr.vectors.T))
                        ko = _decomposition_k(delta, fr.radii, co)
                    c = form.coeffs_at(zeta[None, :])[0]
                    if slot == 0:
                        pv = slot_pair_two(form.degree, n, c[None, :], cand, other[None, :])
                    else:
                        pv = slot_pair_two(form.degree, n, c[None, :], other[None, :], cand)
                    vals = np.abs(pv) / (kk * ko[0])
                    j = int(np.argmax(vals))
                    if vals[j] > best:
                        best = float(vals[j])
                        best_dirs[slot] = cand[j]
    return best


# ---------------------------------------------------------------------------
# current norms


def _discrete_current_norm(
    domain: DomainSpec,
    T: DiscreteCurrent,
    boundary_count: int,
    scales: Sequence[float],
    seed: int,
    patch_samples: int,
    covering_budget: int,
) -> CarlesonReport:
    n = T.dim_n
    delta = boundary_distance_batch(domain, T.points)
    cover = greedy_cover(domain, T.points, budget=covering_budget)
    frames = [pd.frame for pd in cover.polydisks]

    masses_by_pair = []
    pair_labels = []
    if T.degree in ("1", "(0,1)"):
        for p in range(n):
            w = np.zeros(T.n_atoms)
            for ci, fr in enumerate(frames):
                sel = cover.assignment == ci
                if not np.any(sel):
                    continue
                vp = fr.vectors[p]
                if T.degree == "1":
                    vals = 2.0 * np.abs(T.coeffs[sel] @ vp)
                else:
                    vals = np.abs(T.coeffs[sel] @ np.conj(vp))
                k = delta[sel] / fr.radii[p]
                w[sel] = vals / k
            masses_by_pair.append(w)
            pair_labels.append(f"u{p}")
        total = T.total_mass()
    elif T.degree in ("(1,1)", "2"):
        for p in range(n):
            for q in range(n):
                w = np.zeros(T.n_atoms)
                for ci, fr in enumerate(frames):
                    sel = cover.assignment == ci
                    if not np.any(sel):
                        continue
                    vals = np.abs(
                        slot_pair_two(T.degree, n, T.coeffs[sel], fr.vectors[p], fr.vectors[q])
                    )
                    kp = delta[sel] / fr.radii[p]
                    kq = delta[sel] / fr.radii[q]
                    w[sel] = delta[sel] * vals / (kp * kq)
                masses_by_pair.append(w)
                pair_labels.append(f"u{p}u{q}")
        total = float(np.sum(delta * T.atom_masses()))
    else:
        raise BadDegree(
            f"current norm undefined for degree {T.degree!r}; use carleson_norm_measure",
            degree=T.degree,
        )

    xis = boundary_samples(domain, boundary_count, seed)
    tents = []
    for xi in xis:
        for eps in scales:
            inside = tent_membership(domain, xi, float(eps), T.points)
            best_pair = 0.0
            if np.any(inside):
                best_pair = max(float(np.sum(w[inside])) for w in masses_by_pair)
            if best_pair == 0.0:
                tents.append((xi, float(eps), 0.0))
                continue
            area = surface_patch_measure(domain, xi, float(eps), patch_samples, seed)
            tents.append((xi, float(eps), best_pair / area))
    params = {
        "boundary_count": boundary_count,
        "scales": [float(s) for s in scales],
        "seed": seed,
        "patch_samples": patch_samples,
        "dictionary": pair_labels,
        "covering_size": len(frames),
        "input": "discrete",
    }
    return _assemble_report(tents, total, params)


def _smooth_density(domain: DomainSpec, T: SmoothFormField, pts: np.ndarray, seed: int, tags: tuple, k_dirs: int):
    """delta-weighted pointwise k-norm density at sample points.

    Uses one covering frame per point group and the frame decomposition of k;
    degree-1 densities omit the delta factor."""
    m = pts.shape[0]
    if m == 0:
        return np.zeros(0)
    n = domain.dim_n
    delta = boundary_distance_batch(domain, pts)
    cover = greedy_cover(domain, pts)
    coeffs = T.coeffs_at(pts)
    out = np.zeros(m)
    for ci, pd in enumerate(cover.polydisks):
        sel = np.flatnonzero(cover.assignment == ci)
        if sel.size == 0:
            continue
        fr = pd.frame
        dirs = _direction_dictionary(n, k_dirs, seed, tags + ("density", ci), fr.vectors)
        coords = np.abs(dirs @ np.conj(fr.vectors.T))
        inv_tau = np.sum(coords / fr.radii, axis=1)  # 1 / tau(., dir, delta) proxy
        if T.degree in ("1", "(0,1)"):
            if T.degree == "1":
                vals = 2.0 * np.abs(coeffs[sel] @ dirs.T)
            else:
                vals = np.abs(coeffs[sel] @ np.conj(dirs.T))
            k = delta[sel, None] * inv_tau[None, :]
            out[sel] = np.max(vals / k, axis=1)
        else:
            pv = slot_pair_two(
                T.degree, n, coeffs[sel][:, None, None, :], dirs[None, :, None, :], dirs[None, None, :, :]
            )
            k = delta[sel, None, None] ** 2 * inv_tau[None, :, None] * inv_tau[None, None, :]
            dens = np.max(np.abs(pv) / k, axis=(1, 2))
            out[sel] = delta[sel] * dens
    return out


def _tent_integral_smooth(
    domain: DomainSpec,
    T: SmoothFormField,
    xi: np.ndarray,
    eps: float,
    tent_mc: int,
    seed: int,
    tag: int,
    k_dirs: int,
) -> float:
    """MC integral of the k-norm density over one tent.

    When the form's support box is smaller than the tent cell the sample is
    drawn over the support box and filtered by tent membership, otherwise the
    tent itself is sampled; either way the estimator is unbiased for the
    integral over the intersection."""
    pd = polydisk(domain, np.asarray(xi, dtype=complex), eps)
    cell_vol = float(np.prod(np.pi * pd.slot_radii**2))
    n = domain.dim_n
    use_support = False
    if T.support_hint is not None:
        c0, _, rhi = T.support_hint
        box_vol = (2.0 * rhi) ** (2 * n)
        use_support = box_vol < cell_vol
        # quick reject: support ball far from the tent's euclidean envelope
        gap = np.linalg.norm(np.asarray(c0) - pd.frame.center)
        if gap > rhi + pd.euclidean_radius():
            return 0.0
    if use_support:
        c0, _, rhi = T.support_hint
        center = np.asarray(c0, dtype=complex)
        u = sobol_unit(tent_mc, 2 * n, seed, "tentbox", tag, float(eps))
        reals = (2.0 * u - 1.0) * rhi
        pts = center + (reals[:, 0::2] + 1j * reals[:, 1::2])
        keep = tent_membership(domain, xi, eps, pts)
        w = box_vol / tent_mc
        pts = pts[keep]
    else:
        pts, w = tent_sample(domain, xi, eps, tent_mc, seed)
        if T.support_hint is not None and pts.shape[0]:
            c0, _, rhi = T.support_hint
            pts = pts[np.linalg.norm(pts - np.asarray(c0), axis=1) <= rhi]
    if pts.shape[0] == 0:
        return 0.0
    dens = _smooth_density(domain, T, pts, seed, ("tmc", tag), k_dirs)
    return float(np.sum(dens) * w)


def _smooth_current_norm(
    domain: DomainSpec,
    T: SmoothFormField,
    boundary_count: int,
    scales: Sequence[float],
    seed: int,
    patch_samples: int,
    tent_mc: int,
    mass_mc: int,
    k_dirs: int,
) -> CarlesonReport:
    if T.degree not in ("1", "(0,1)", "(1,1)", "2"):
        raise BadDegree(f"current norm undefined for degree {T.degree!r}", degree=T.degree)
    xis = boundary_samples(domain, boundary_count, seed)
    tents = []
    for i, xi in enumerate(xis):
        for eps in scales:
            mass = _tent_integral_smooth(domain, T, xi, float(eps), tent_mc, seed, i, k_dirs)
            if mass == 0.0:
                tents.append((xi, float(eps), 0.0))
                continue
            area = surface_patch_measure(domain, xi, float(eps), patch_samples, seed)
            tents.append((xi, float(eps), mass / area))

    # total mass over a box around the support
    if T.support_hint is not None:
        c0, _, rhi = T.support_hint
        center = np.asarray(c0, dtype=complex)
        half = rhi
    else:
        center = np.zeros(domain.dim_n, dtype=complex)
        half = 1.1
    u = sobol_unit(mass_mc, 2 * domain.dim_n, seed, "mass")
    reals = (2.0 * u - 1.0) * half
    pts = center + (reals[:, 0::2] + 1j * reals[:, 1::2])
    inside = domain.rho(pts) < 0
    dens = np.zeros(mass_mc)
    if np.any(inside):
        dens[inside] = _smooth_density(domain, T, pts[inside], seed, ("massd",), k_dirs)
    total = float(np.mean(dens) * (2.0 * half) ** (2 * domain.dim_n))
    params = {
        "boundary_count": boundary_count,
        "scales": [float(s) for s in scales],
        "seed": seed,
        "patch_samples": patch_samples,
        "tent_mc": tent_mc,
        "mass_mc": mass_mc,
        "k_dirs": k_dirs,
        "input": "smooth",
    }
    return _assemble_report(tents, total, params)


def carleson_norm_current(
    domain: DomainSpec,
    T,
    boundary_count: int = 24,
    scales: Optional[Sequence[float]] = None,
    seed: int = 0,
    patch_samples: int = 4000,
    covering_budget: int = 100_000,
    tent_mc: int = 64,
    mass_mc: int = 4096,
    k_dirs: int = 48,
) -> CarlesonReport:
    """W1 norm of a degree >= 1 current.

    Discrete input: sup over the covering frame dictionary of k-weighted tent
    sums (n fields for degree 1, n*n pairs for degree 2).  Smooth input: tent
    integrals of the pointwise k-norm density (delta-weighted in degree 2)."""
    if scales is None:
        scales = dyadic_scales(domain)
    if isinstance(T, DiscreteCurrent):
        if T.n_atoms == 0:
            return _assemble_report([], 0.0, {"input": "discrete", "scales": [float(s) for s in scales]})
        return _discrete_current_norm(
            domain, T, boundary_count, scales, seed, patch_samples, covering_budget
        )
    if isinstance(T, SmoothFormField):
        return _smooth_current_norm(
            domain, T, boundary_count, scales, seed, patch_samples, tent_mc, mass_mc, k_dirs
        )
    raise TypeError(f"unsupported current type {type(T).__name__}")


def s_carleson_norm_current(domain: DomainSpec, T, s: float, **kw) -> CarlesonReport:
    scales = dyadic_scales(domain, s=s)
    rep = carleson_norm_current(domain, T, scales=scales, **kw)
    params = dict(rep.params)
    params["s"] = float(s)
    return CarlesonReport(rep.norm_value, rep.witness, rep.per_tent, rep.total_mass, params)


# ---------------------------------------------------------------------------
# boundary mean oscillation


def bmo_s_norm(
    domain: DomainSpec,
    f: Callable[[np.ndarray], np.ndarray],
    s: float,
    boundary_count: int = 24,
    patch_samples: int = 4000,
    seed: int = 0,
    levels: int = 6,
    centers: Optional[np.ndarray] = None,
) -> float:
    """Mean-oscillation seminorm over boundary patches with scales above s.

    The outer integral over the patch is not normalized (only the inner mean
    is), matching the defining formula.  `centers` replaces the quasi-uniform
    boundary grid with an explicit set of boundary points."""
    scales = dyadic_scales(domain, s=s, levels=levels)
    xis = boundary_samples(domain, boundary_count, seed) if centers is None else np.atleast_2d(centers)
    best = 0.0
    for xi in xis:
        for eps in scales:
            patch = surface_patch_sample(domain, xi, float(eps), patch_samples, seed)
            if patch.area <= 0.0:
                continue
            vals = np.real(np.asarray(f(patch.points)))
            mean = float(np.sum(patch.weights * vals) / patch.area)
            osc = float(np.sum(patch.weights * np.abs(vals - mean)))
            best = max(best, osc)
    return best
