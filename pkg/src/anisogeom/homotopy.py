"""Warped homotopy operator for d on near-boundary charts.

The central object is the contraction ``h(t, z) = t z + c t M(t, z) @ lam``
that pulls a near-boundary chart onto an interior anchor point while warping
by anisotropic frame vectors drawn from a polydisk covering.  Averaging the
pullback integral over the warp parameter ``lam`` in the unit polydisk gives
an operator H with ``dH + Hd = identity`` on forms supported away from the
anchor; a radial cutoff plus a straight-line primitive then solves ``dw = T``
on the near-boundary window W.

All chart-level functions take and return coordinates translated so the
interior anchor sits at the origin; ambient evaluation happens internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .domains import (
    DomainSpec,
    boundary_distance,
    boundary_distance_batch,
    project_to_boundary,
)
from .geometry import Polydisk, extremal_frame, greedy_cover, tau_batch
from .currents import (
    SmoothFormField,
    coefficient_count,
    derivative_coeffs_from_columns,
    exterior_derivative,
    generator_basis,
    pair_one,
    pair_two,
    pair_three,
    wedge_fields,
)
from .errors import (
    ChartConstructionFailure,
    CutoffRadiusInvalid,
    InputNotClosed,
    McBudgetExceeded,
    OutsideChart,
)
from .sampling import kronecker_lattice, unit_polydisk_points
from .util import cnorm, ramp_down, rng_for, smooth_step, smooth_step_d

K_MAX = 20          # dyadic radial index clamp; scales below 2^-K_MAX never arise
PAD_FACTOR = 6.0    # a-priori warp padding multiplier used for node placement


# ---------------------------------------------------------------------------
# local chart


@dataclass(frozen=True)
class LocalChart:
    """Near-boundary chart: boundary point p, interior anchor a_p, radii.

    V is the working ball B(p, r1) inside the domain, W the near-boundary
    window B(p, r2) & {distance < eta1}.  Chart coordinates put a_p at 0.
    """

    domain: DomainSpec
    p: np.ndarray
    a_p: np.ndarray
    r1: float
    r2: float
    eta1: float
    nu_out: np.ndarray
    audit: dict = field(compare=False, default_factory=dict)

    def __post_init__(self):
        if not (self.r1 > 4.0 * self.r2 > 8.0 * self.eta1):
            raise ChartConstructionFailure(
                "radii must satisfy r1 > 4 r2 > 8 eta1",
                r1=self.r1, r2=self.r2, eta1=self.eta1,
            )
        if not self.r1 < self.domain.delta1:
            raise ChartConstructionFailure(
                "r1 must stay below the domain band width",
                r1=self.r1, delta1=self.domain.delta1,
            )

    def to_ambient(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.complex128) + self.a_p

    def to_chart(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.complex128) - self.a_p

    def in_v(self, z: np.ndarray) -> np.ndarray:
        """Membership of chart points in V = B(p, r1) & Omega."""
        amb = np.atleast_2d(self.to_ambient(z))
        near = np.linalg.norm(amb - self.p, axis=-1) < self.r1
        return near & (self.domain.rho(amb) < 0.0)

    def in_w(self, z: np.ndarray) -> np.ndarray:
        amb = np.atleast_2d(self.to_ambient(z))
        near = np.linalg.norm(amb - self.p, axis=-1) < self.r2
        out = near & (self.domain.rho(amb) < 0.0)
        if np.any(out):
            out[out] = boundary_distance_batch(self.domain, amb[out]) < self.eta1
        return out


def _ball_points(center: np.ndarray, radius: float, count: int, rng) -> np.ndarray:
    """Uniform points in a real 2n-ball around a complex center."""
    n = center.shape[0]
    g = rng.standard_normal((count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / (2 * n))
    flat = g * r[:, None]
    return center + flat[:, :n] + 1j * flat[:, n:]


def build_local_chart(
    domain: DomainSpec,
    p: np.ndarray,
    *,
    seed: int = 0,
    shrink_rounds: int = 8,
    n_audit: int = 200,
) -> LocalChart:
    """Select chart radii and the interior anchor, verified on samples.

    Starts from r1 = delta1/2, r2 = r1/8, eta1 = r2/4 and an anchor on the
    inward normal at depth 3 r1 / 8; halves r2 and eta1 until the sampled
    checks (band containment, anchor depth window, transversality of anchor
    rays against nearby normals) all pass.
    """
    p = np.asarray(p, dtype=np.complex128)
    if abs(float(domain.rho(p))) > 1e-8:
        raise ChartConstructionFailure(
            "chart center must lie on the boundary", rho=float(domain.rho(p))
        )
    nu = domain.real_gradient(p)
    nu = nu / cnorm(nu)
    r1 = 0.5 * domain.delta1
    depth = 3.0 * r1 / 8.0
    a_p = p - depth * nu
    delta_a = boundary_distance(domain, a_p)

    for round_idx in range(shrink_rounds + 1):
        r2 = r1 / 8.0 / 2.0**round_idx
        eta1 = r2 / 4.0
        rng = rng_for(seed, "chart-audit", round_idx)
        # band containment: V stays inside the finite-type band
        vs = _ball_points(p, r1, n_audit, rng)
        vs = vs[domain.rho(vs) < 0.0]
        band_ok = bool(np.all(boundary_distance_batch(domain, vs) < domain.delta1))
        depth_ok = 2.0 * r2 < delta_a < 0.5 * r1
        # transversality: anchor-to-point rays stay clamped to nearby normals
        zetas = _ball_points(p, 2.0 * r2, n_audit, rng)
        zetas = zetas[domain.rho(zetas) < 0.0]
        xis = _ball_points(p, 2.0 * r2, zetas.shape[0], rng)
        normals = domain.real_gradient(xis)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        rays = zetas - a_p
        ray_len = np.linalg.norm(rays, axis=1)
        cosines = np.abs(np.einsum("ij,ij->i", np.conj(normals), rays)) / ray_len
        trans_ok = bool(np.all(cosines >= 0.5))
        if band_ok and depth_ok and trans_ok:
            audit = {
                "round": round_idx,
                "anchor_depth": float(delta_a),
                "min_transversal_cosine": float(np.min(cosines)),
                "band_samples": int(vs.shape[0]),
            }
            return LocalChart(
                domain=domain, p=p, a_p=a_p, r1=float(r1), r2=float(r2),
                eta1=float(eta1), nu_out=nu, audit=audit,
            )
    raise ChartConstructionFailure(
        "no admissible chart after shrink rounds", rounds=shrink_rounds
    )


def w_sample_grid(
    chart: LocalChart, n_tangential: int = 20, n_depth: int = 20
) -> np.ndarray:
    """Deterministic W grid in chart coordinates: boundary patch x log depths.

    Tangential sites come from a Fibonacci layout in the real tangent space of
    the boundary at p, pushed onto the boundary; depths are log-spaced inside
    (eta1/8, 0.95 eta1).
    """
    domain, p = chart.domain, chart.p
    n = domain.dim_n
    nu_flat = np.concatenate([chart.nu_out.real, chart.nu_out.imag])
    basis = [nu_flat]
    for k in range(2 * n):
        e = np.zeros(2 * n)
        e[k] = 1.0
        for b in basis:
            e = e - np.dot(b, e) * b
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            basis.append(e / nrm)
    tang = np.stack(basis[1:])  # (2n-1, 2n) real tangent directions
    from scipy.special import ndtri

    u = kronecker_lattice(n_tangential, 2 * n - 1)
    dirs = ndtri(np.clip(u, 1e-6, 1.0 - 1e-6))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radial = 0.75 * chart.r2 * (((np.arange(n_tangential) + 0.5) / n_tangential)
                                ** (1.0 / (2 * n - 1)))
    offsets = (dirs * radial[:, None]) @ tang
    offsets_c = offsets[:, :n] + 1j * offsets[:, n:]
    depths = np.geomspace(chart.eta1 / 8.0, 0.95 * chart.eta1, n_depth)
    pts = []
    for off in offsets_c:
        xi = project_to_boundary(domain, p + off - 1e-4 * chart.nu_out)
        nu_xi = domain.real_gradient(xi)
        nu_xi = nu_xi / cnorm(nu_xi)
        for d in depths:
            pts.append(xi - d * nu_xi)
    pts = np.asarray(pts)
    ok = chart.in_w(chart.to_chart(pts))
    if not np.all(ok):
        raise ChartConstructionFailure(
            "W grid left the window; shrink the tangential extent",
            bad=int(np.sum(~ok)),
        )
    return chart.to_chart(pts)


# ---------------------------------------------------------------------------
# covering partition + dyadic radial weights


def _psi_pairs(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dyadic radial weights at u in (0, 1]: indices (m, 2) and weights (m, 2).

    psi_k is supported in (2^-k-1, 2^-k+1]; at most two consecutive indices
    contribute and they sum to 1.  u outside (0, 1] gets the k=0 tail.
    """
    u = np.asarray(u, dtype=np.float64)
    x = -np.log2(np.clip(u, 1e-300, None))
    k_lo = np.clip(np.floor(x).astype(np.int64), 0, K_MAX)
    ks = np.stack([k_lo, np.clip(k_lo + 1, 0, K_MAX)], axis=-1)
    xx = x[..., None]
    w_mid = smooth_step(xx - ks + 1.0) - smooth_step(xx - ks)
    w = np.where(ks == 0, 1.0 - smooth_step(xx), w_mid)
    w[ks[..., 0] == ks[..., 1], 1] = 0.0
    w[u <= 0.0, :] = 0.0
    return ks, w


@dataclass
class PartitionSystem:
    """Polydisk covering with smooth bumps, frozen before evaluation.

    Callers register every family of points the contraction will visit, then
    ``freeze`` builds a greedy covering by polydisks at the points' own
    boundary distances.  Bumps are products of per-slot radial ramps supported
    on the doubled polydisk, normalized to sum to 1 on the covered region.
    """

    domain: DomainSpec
    chart: LocalChart
    budget: int = 100_000
    registered: list = field(default_factory=list)
    frozen: bool = False
    centers: Optional[np.ndarray] = None
    delta_j: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None      # (J, n, n) frame rows per disk
    slot_radii: Optional[np.ndarray] = None   # (J, n) covering slot radii
    cols_delta: Optional[np.ndarray] = None   # (J, n, n) tau_i e_i columns
    reach: Optional[np.ndarray] = None        # (J,) euclidean support radius
    audit: dict = field(default_factory=dict)
    _ck_index: dict = field(default_factory=dict)
    _ck_cols: list = field(default_factory=list)
    _ck_stack: Optional[np.ndarray] = None
    _trees: list = field(default_factory=list)

    def register(self, points_amb: np.ndarray) -> None:
        if self.frozen:
            raise OutsideChart("partition already frozen; register earlier")
        pts = np.atleast_2d(np.asarray(points_amb, dtype=np.complex128))
        if pts.size:
            self.registered.append(pts)

    def freeze(self) -> None:
        if self.frozen:
            return
        if not self.registered:
            raise ChartConstructionFailure("no points registered for the covering")
        samples = np.vstack(self.registered)
        cover = greedy_cover(self.domain, samples, budget=self.budget)
        disks: list[Polydisk] = cover.polydisks
        self.centers = np.stack([d.frame.center for d in disks])
        self.delta_j = np.array([d.frame.scale for d in disks])
        self.vectors = np.stack([d.frame.vectors for d in disks])
        radii = np.stack([d.frame.radii for d in disks])
        self.slot_radii = self.domain.c0 * radii
        self.cols_delta = np.stack([d.frame.vectors.T * d.frame.radii[None, :]
                                    for d in disks])
        self.reach = 2.0 * np.sqrt(np.sum(self.slot_radii**2, axis=1))
        # octave-grouped kd-trees keep candidate lookups local despite the
        # hundredfold spread of disk reach
        from scipy.spatial import cKDTree
        from .util import real_view

        octave = np.floor(np.log2(self.reach)).astype(int)
        self._trees = []
        for o in np.unique(octave):
            idx = np.nonzero(octave == o)[0]
            tree = cKDTree(real_view(self.centers[idx]))
            self._trees.append((tree, idx, float(np.max(self.reach[idx]))))
        self.frozen = True
        self.audit = {
            "n_registered": int(samples.shape[0]),
            "n_disks": len(disks),
            "depth_range": [float(np.min(self.delta_j)), float(np.max(self.delta_j))],
        }

    # -- bump evaluation ----------------------------------------------------

    def _raw_bumps(self, pts_amb: np.ndarray):
        """Sparse (row, disk, value) triples of the unnormalized bumps.

        Query points snap onto a coarse per-octave grid first, so tightly
        packed stencil families share one tree lookup; the padded query
        radius keeps every true neighbour and the exact slot-ratio test
        below discards the extras."""
        from scipy.spatial import cKDTree
        from .util import real_view

        m = pts_amb.shape[0]
        pts_real = real_view(pts_amb)
        dim = pts_real.shape[1]
        rows_parts, js_parts = [], []
        for tree, idx, radius in self._trees:
            res = 0.125 * radius
            uk, inv = np.unique(np.floor(pts_real / res).astype(np.int64),
                                axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            reps = (uk + 0.5) * res
            pad = 0.5 * res * np.sqrt(dim)
            pairs = tree.sparse_distance_matrix(
                cKDTree(reps), 1.02 * radius + pad, output_type="ndarray")
            if pairs.size == 0:
                continue
            # expand (disk, cluster) hits back to the member points
            order = np.argsort(inv, kind="stable")
            counts = np.bincount(inv, minlength=uk.shape[0])
            offs = np.concatenate([[0], np.cumsum(counts)])
            cnt = counts[pairs["j"]]
            total = int(cnt.sum())
            if total == 0:
                continue
            starts = np.repeat(offs[pairs["j"]], cnt)
            ranks = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            rows_parts.append(order[starts + ranks])
            js_parts.append(np.repeat(idx[pairs["i"]], cnt))
        if not rows_parts:
            return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), m
        rows = np.concatenate(rows_parts)
        js = np.concatenate(js_parts)
        diff = pts_amb[rows] - self.centers[js]
        lam = np.einsum("pk,pik->pi", diff, np.conj(self.vectors[js]))
        ratio = np.abs(lam) / self.slot_radii[js]
        inside = np.all(ratio < 2.0, axis=1)
        rows, js, ratio = rows[inside], js[inside], ratio[inside]
        vals = np.prod(ramp_down(ratio, 1.0, 2.0), axis=1)
        keep = vals > 1e-14
        return rows[keep], js[keep], vals[keep], m

    def phi_weights(self, pts_amb: np.ndarray):
        """Normalized bump weights; raises if a point escapes the covering."""
        pts_amb = np.atleast_2d(np.asarray(pts_amb, dtype=np.complex128))
        if not self.frozen:
            raise OutsideChart("partition must be frozen before evaluation")
        rows, js, vals, m = self._raw_bumps(pts_amb)
        sums = np.zeros(m)
        np.add.at(sums, rows, vals)
        if np.any(sums <= 0.0):
            bad = int(np.argmax(sums <= 0.0))
            raise OutsideChart(
                "point not covered by the frozen partition",
                point=pts_amb[bad].tolist(),
                depth=float(self.domain.rho(pts_amb[bad])),
            )
        return rows, js, vals / sums[rows]

    def _cols_at_scale(self, js: np.ndarray, ks: np.ndarray) -> np.ndarray:
        """Frame columns tau_i e_i at (center j, scale 2^-k), cached."""
        pairs = np.stack([js, ks], axis=1)
        uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
        idxs = np.empty(uniq.shape[0], dtype=np.int64)
        grew = False
        for row, (j, k) in enumerate(uniq):
            key = (int(j), int(k))
            if key not in self._ck_index:
                fr = extremal_frame(self.domain, self.centers[int(j)], 2.0 ** -int(k))
                self._ck_index[key] = len(self._ck_cols)
                self._ck_cols.append(fr.vectors.T * fr.radii[None, :])
                grew = True
            idxs[row] = self._ck_index[key]
        if grew or self._ck_stack is None:
            self._ck_stack = np.stack(self._ck_cols)
        return self._ck_stack[idxs[inv]]

    def m_batch(self, pts_amb, u, neg_rho) -> np.ndarray:
        """Warp matrices M for rows (position of t z, radial u = 1-t, -rho(z)).

        Column i of M collects sum_{k,j} psi_k(u) Phi_j(tz) of the blended
        frame columns; the contraction warp is c t M @ lam.
        """
        pts_amb = np.atleast_2d(np.asarray(pts_amb, dtype=np.complex128))
        u = np.asarray(u, dtype=np.float64)
        neg_rho = np.asarray(neg_rho, dtype=np.float64)
        m, n = pts_amb.shape
        out = np.zeros((m, n, n), dtype=np.complex128)
        live = u > 0.0
        if not np.any(live):
            return out
        rows_l = np.nonzero(live)[0]
        prow, pj, pw = self.phi_weights(pts_amb[rows_l])
        prow = rows_l[prow]
        kk, kw = _psi_pairs(u)
        for slot in range(2):
            wpsi = kw[prow, slot]
            sel = wpsi > 1e-14
            if not np.any(sel):
                continue
            r3 = prow[sel]
            j3 = pj[sel]
            k3 = kk[r3, slot]
            w3 = pw[sel] * wpsi[sel]
            scale = 2.0 ** -k3.astype(np.float64)
            blend = ramp_down(scale / neg_rho[r3], 0.5, 1.0)
            term = np.zeros((r3.shape[0], n, n), dtype=np.complex128)
            near = blend > 0.0
            if np.any(near):
                fac = blend[near] * scale[near] / self.delta_j[j3[near]]
                term[near] += fac[:, None, None] * self.cols_delta[j3[near]]
            far = blend < 1.0
            if np.any(far):
                cols = self._cols_at_scale(j3[far], k3[far])
                term[far] += (1.0 - blend[far])[:, None, None] * cols
            np.add.at(out, r3, w3[:, None, None] * term)
        return out


def audit_partition(ps: PartitionSystem, *, seed: int = 0, n_check: int = 256) -> dict:
    """Measured partition constants: sum-to-one defects and derivative bounds."""
    rng = rng_for(seed, "partition-audit")
    samples = np.vstack(ps.registered)
    pick = rng.choice(samples.shape[0], size=min(n_check, samples.shape[0]),
                      replace=False)
    pts = samples[pick]
    rows, js, w = ps.phi_weights(pts)
    sums = np.zeros(pts.shape[0])
    np.add.at(sums, rows, w)
    phi_defect = float(np.max(np.abs(sums - 1.0)))
    # directional derivative of the bumps against the covering slot radii
    c_phi = 0.0
    sub = pick[: min(32, pick.size)]
    for idx in sub:
        z = samples[idx]
        r0, j0, w0 = ps.phi_weights(z[None, :])
        for j, wj in zip(j0, w0):
            for slot in range(ps.domain.dim_n):
                vec = ps.vectors[j][slot]
                h = 1e-3 * ps.slot_radii[j][slot]
                wp = _phi_of_disk(ps, (z + h * vec)[None, :], int(j))
                wm = _phi_of_disk(ps, (z - h * vec)[None, :], int(j))
                deriv = abs(wp - wm) / (2.0 * h)
                c_phi = max(c_phi, deriv * ps.slot_radii[j][slot] / ps.domain.c0)
    # dyadic radial weights: partition defect and derivative growth
    ug = np.geomspace(2.0**-15, 1.0, 400)
    ks, kw = _psi_pairs(ug)
    psi_defect = float(np.max(np.abs(np.sum(kw, axis=-1) - 1.0)))
    h = 1e-7
    kp, wp = _psi_pairs(ug + h)
    km, wm = _psi_pairs(ug - h)
    c_psi = 0.0
    for slot in range(2):
        match = (kp[:, slot] == km[:, slot])
        rate = np.abs(wp[match, slot] - wm[match, slot]) / (2.0 * h)
        scale = 2.0 ** -kp[match, slot].astype(float)
        c_psi = max(c_psi, float(np.max(rate * scale, initial=0.0)))
    report = {
        "phi_sum_defect": phi_defect,
        "phi_derivative_constant": float(c_phi),
        "psi_sum_defect": psi_defect,
        "psi_derivative_constant": float(c_psi),
    }
    ps.audit.update(report)
    return report


def _phi_of_disk(ps: PartitionSystem, pts_amb: np.ndarray, disk: int) -> float:
    rows, js, w = ps.phi_weights(pts_amb)
    mask = js == disk
    return float(np.sum(w[mask]))


# ---------------------------------------------------------------------------
# configuration and pseudo-ball containment


@dataclass(frozen=True)
class HomotopyConfig:
    """Budgets and the calibrated warp amplitude for the contraction."""

    c: Optional[float] = None
    t0: float = 0.01
    n_lambda: int = 4096
    n_t: int = 64
    fd_step: float = 1e-5
    seed: int = 0
    u_floor: float = 2.0**-16
    c_pad: float = 2.0**-7
    n_rep: int = 8
    mc_cap: Optional[float] = None
    s_nodes: int = 12
    avg_t_nodes: int = 16
    avg_q_samples: int = 64
    avg_angles: int = 16

    def __post_init__(self):
        if not 0.0 < self.t0 < 1.0:
            raise ChartConstructionFailure("t0 must lie in (0, 1)", t0=self.t0)
        if self.c is not None and not 0.0 < self.c <= self.c_pad:
            raise ChartConstructionFailure(
                "warp amplitude outside the recorded maximum",
                c=self.c, c_max=self.c_pad,
            )


def _lam_batch(cfg: HomotopyConfig, n: int, count: Optional[int] = None) -> np.ndarray:
    return unit_polydisk_points(count or cfg.n_lambda, n, cfg.seed, "warp-lambda")


def q_region(domain: DomainSpec, tz_amb: np.ndarray, one_minus_t: float,
             neg_rho_z: float):
    """Frame and scaled radii of the comparison region at (t, z).

    The region is the pseudo-ball at t z of radius 1-t, shrunk linearly once
    1-t falls below the depth gauge -rho(z).  Returns (frame, scale_factor).
    """
    if one_minus_t >= neg_rho_z:
        eps, fac = one_minus_t, 1.0
    else:
        eps, fac = neg_rho_z, one_minus_t / neg_rho_z
    frame = extremal_frame(domain, tz_amb, eps)
    return frame, fac


def q_membership(domain: DomainSpec, tz_amb: np.ndarray, one_minus_t: float,
                 neg_rho_z: float, pts_amb: np.ndarray,
                 *, n_angles: int = 16) -> np.ndarray:
    """Directionwise pseudo-ball membership test for candidate points."""
    frame, fac = q_region(domain, tz_amb, one_minus_t, neg_rho_z)
    pts_amb = np.atleast_2d(pts_amb)
    diff = pts_amb - tz_amb
    r = np.linalg.norm(diff, axis=-1)
    out = np.ones(pts_amb.shape[0], dtype=bool)
    far = r > 1e-14
    if np.any(far):
        dirs = diff[far] / r[far, None]
        taus = tau_batch(domain, tz_amb, dirs, frame.scale,
                         n_angles=n_angles, n_radial=4, rel_tol=1e-2)
        out[far] = r[far] < domain.c0 * fac * taus
    return out


def calibrate_homotopy(
    chart: LocalChart,
    partitions: PartitionSystem,
    cfg: HomotopyConfig,
    z_pool: np.ndarray,
    *,
    n_samples: int = 1000,
    qs: Sequence[int] = tuple(range(4, 13)),
) -> tuple[HomotopyConfig, dict]:
    """Pick the largest dyadic warp amplitude whose image stays inside the
    comparison region on an audit sample, and record warp statistics."""
    domain = chart.domain
    n = domain.dim_n
    rng = rng_for(cfg.seed, "warp-calibration")
    z_idx = rng.integers(0, z_pool.shape[0], size=n_samples)
    zs = z_pool[z_idx]
    ts = rng.uniform(0.02, 0.98, size=n_samples)
    lam = unit_polydisk_points(n_samples, n, cfg.seed, "warp-audit")
    pos_amb = chart.to_ambient(ts[:, None] * zs)
    neg_rho = -domain.rho(chart.to_ambient(zs))
    mats = partitions.m_batch(pos_amb, 1.0 - ts, neg_rho)
    warp_dir = np.einsum("mij,mj->mi", mats, lam)
    col_sum = np.sum(np.linalg.norm(mats, axis=1), axis=-1)
    in_v_cap = chart.r1 - np.linalg.norm(chart.p - chart.a_p)
    report: dict = {"per_c": {}}
    chosen = None
    for q in qs:
        c = 2.0**-q
        if c > cfg.c_pad:
            continue
        h_amb = pos_amb + (c * ts)[:, None] * warp_dir
        ok_v = (np.linalg.norm(h_amb - chart.p, axis=1) < chart.r1) & (
            domain.rho(h_amb) < 0.0
        )
        violations = int(np.sum(~ok_v))
        if violations == 0:
            for i in range(n_samples):
                if not q_membership(domain, pos_amb[i], 1.0 - ts[i],
                                    float(neg_rho[i]), h_amb[i][None, :])[0]:
                    violations += 1
        report["per_c"][f"2^-{q}"] = violations
        if violations == 0:
            chosen = c
            break
    if chosen is None:
        raise ChartConstructionFailure(
            "no warp amplitude passed the containment audit", tried=list(qs)
        )
    warp_sup = float(np.max(chosen * ts * col_sum))
    report.update({
        "c": chosen,
        "warp_sup": warp_sup,
        "column_norm_sup": float(np.max(col_sum)),
        "n_samples": n_samples,
    })
    return replace(cfg, c=chosen), report


# ---------------------------------------------------------------------------
# evaluation engine


_E_DIRS_CACHE: dict[int, np.ndarray] = {}


def _real_dirs(n: int) -> np.ndarray:
    """The 2n coordinate directions e_1, i e_1, ..., e_n, i e_n."""
    if n not in _E_DIRS_CACHE:
        eye = np.eye(n, dtype=np.complex128)
        out = np.empty((2 * n, n), dtype=np.complex128)
        out[0::2] = eye
        out[1::2] = 1j * eye
        _E_DIRS_CACHE[n] = out
    return _E_DIRS_CACHE[n]


def support_hint_of(theta: SmoothFormField) -> tuple[np.ndarray, float, float]:
    if theta.support_hint is None:
        raise OutsideChart("form needs a support hint for the time window")
    c, lo, hi = theta.support_hint
    return np.asarray(c, dtype=np.complex128), float(lo), float(hi)


def _effective_t0(cfg: HomotopyConfig, z_scale: float, hints) -> float:
    lows = []
    for (sc, lo, hi) in hints:
        dist0 = max(float(np.linalg.norm(sc)) - hi, lo - float(np.linalg.norm(sc)), 0.0)
        lows.append(dist0 / max(z_scale, 1e-12) - 0.05)
    return float(np.clip(min(lows) if lows else cfg.t0, cfg.t0 * 1e-2, 0.5))


def _warp_amplitude(cfg: HomotopyConfig) -> float:
    return cfg.c if cfg.c is not None else cfg.c_pad


def _pad(cfg: HomotopyConfig, t: np.ndarray, u: np.ndarray, m_type: int) -> np.ndarray:
    """A-priori bound on the warp displacement at time t, radial scale u."""
    c = _warp_amplitude(cfg)
    return PAD_FACTOR * c * t * np.maximum(u, cfg.u_floor) ** (1.0 / m_type)


def _band_active(dist, pad, lo, hi):
    return (dist - pad <= hi) & (dist + pad >= lo)


def _hint_hit(z, hints, ts, pads):
    hit = np.zeros(ts.shape[0], dtype=bool)
    for (sc, lo, hi) in hints:
        dist = np.linalg.norm(ts[:, None] * z[None, :] - sc[None, :], axis=1)
        hit |= _band_active(dist, pads, lo, hi)
    return hit


def _composite_gauss(a: float, b: float, n_nodes: int, max_order: int = 8):
    """Composite Gauss rule on [a, b]: subdivide so tight integrand features
    see several panels rather than one high-order rule."""
    n_sub = max(1, int(np.ceil(n_nodes / max_order)))
    order = max(2, int(np.ceil(n_nodes / n_sub)))
    gx, gw = np.polynomial.legendre.leggauss(order)
    cuts = np.linspace(a, b, n_sub + 1)
    xs, ws = [], []
    for i in range(n_sub):
        mid, half = 0.5 * (cuts[i] + cuts[i + 1]), 0.5 * (cuts[i + 1] - cuts[i])
        xs.append(mid + half * gx)
        ws.append(half * gw)
    return np.concatenate(xs), np.concatenate(ws)


def _nodes_for(cfg: HomotopyConfig, z: np.ndarray, hints, m_type: int):
    """Quadrature nodes in u = 1-t, concentrated on the support windows.

    Panels that cannot contribute, even padding by the warp bound, get no
    nodes at all; panels crossing the bare support band (core) take most of
    the budget, warp-reachable fringe panels share the rest.
    """
    t0 = _effective_t0(cfg, float(np.linalg.norm(z)), hints)
    u_hi = 1.0 - t0
    edges = [u_hi]
    k = 0
    while 2.0**-k >= u_hi:
        k += 1
    while 2.0**-k > cfg.u_floor:
        edges.append(2.0**-k)
        k += 1
    edges.append(cfg.u_floor)
    spans = [(edges[i + 1], edges[i]) for i in range(len(edges) - 1)
             if edges[i] > edges[i + 1]]
    core, fringe = [], []
    for (a, b) in spans:
        us = np.linspace(a, b, 5)
        ts = 1.0 - us
        if np.any(_hint_hit(z, hints, ts, np.full(5, 5e-5))):
            core.append((a, b))
        elif np.any(_hint_hit(z, hints, ts,
                              1.5 * _pad(cfg, ts, us, m_type) + 5e-5)):
            fringe.append((a, b))
    ts_all, ws_all = [], []
    n_core, n_fringe = len(core), len(fringe)
    if n_core == 0 and n_fringe == 0:
        return np.zeros(0), np.zeros(0), t0
    core_budget = cfg.n_t if n_fringe == 0 else int(0.65 * cfg.n_t)
    if n_core == 0:
        core_budget = 0
    fringe_budget = cfg.n_t - core_budget
    for (a, b) in core:
        xs, ws = _composite_gauss(a, b, max(6, core_budget // n_core))
        ts_all.append(1.0 - xs)
        ws_all.append(ws)
    for (a, b) in fringe:
        xs, ws = _composite_gauss(a, b, max(4, fringe_budget // max(n_fringe, 1)))
        ts_all.append(1.0 - xs)
        ws_all.append(ws)
    t = np.concatenate(ts_all)
    w = np.concatenate(ws_all)
    order = np.argsort(t)
    return t[order], w[order], t0


@dataclass
class _Workspace:
    """Per-point geometry shared by every form: warp matrices and stencils."""

    z: np.ndarray
    t: np.ndarray
    w: np.ndarray
    t0: float
    offsets: np.ndarray          # (S, n) chart offsets of the outer stencil
    m_of: np.ndarray             # (S, Q, n, n) warp matrix at each outer point
    dmdt: np.ndarray             # (S, Q, n, n)
    grad: np.ndarray             # (S, 2n, Q, n, n) directional matrix derivative
    warp_sup: np.ndarray         # (S, Q) measured warp radius bound (unit c)
    static_active: np.ndarray    # (Q,) nodes with any potential contribution


def _build_workspace(chart: LocalChart, partitions: PartitionSystem,
                     cfg: HomotopyConfig, z: np.ndarray, hints,
                     *, stencil: bool) -> _Workspace:
    domain = chart.domain
    n = domain.dim_n
    m_type = domain.type_m
    t, w, t0 = _nodes_for(cfg, z, hints, m_type)
    u = 1.0 - t
    dist_all = []
    pads = _pad(cfg, t, u, m_type)
    static = np.zeros(t.shape[0], dtype=bool)
    for (sc, lo, hi) in hints:
        dist = np.linalg.norm(t[:, None] * z[None, :] - sc[None, :], axis=1)
        static |= _band_active(dist, pads + 3e-5, lo, hi)
        dist_all.append(dist)
    qa = np.nonzero(static)[0]
    e_dirs = _real_dirs(n)
    h = cfg.fd_step
    if stencil:
        outer = np.vstack([np.zeros((1, n), dtype=np.complex128),
                           np.concatenate([[d * h, -d * h] for d in e_dirs])])
    else:
        outer = np.zeros((1, n), dtype=np.complex128)
    s_count = outer.shape[0]
    # distinct evaluation positions: outer points and their inner fd shifts
    pos_index: dict[tuple, int] = {}
    pos_list: list[np.ndarray] = []

    def pos_id(off):
        key = tuple(np.round(np.concatenate([off.real, off.imag]) / h).astype(int))
        if key not in pos_index:
            pos_index[key] = len(pos_list)
            pos_list.append(off)
        return pos_index[key]

    outer_ids = [pos_id(o) for o in outer]
    inner_ids = np.empty((s_count, 2 * n, 2), dtype=np.int64)
    for s, o in enumerate(outer):
        for r, d in enumerate(e_dirs):
            inner_ids[s, r, 0] = pos_id(o + h * d)
            inner_ids[s, r, 1] = pos_id(o - h * d)
    pos = np.stack(pos_list)                      # (P, n)
    endpoints = chart.to_ambient(z[None, :] + pos)
    neg_rho_pos = -domain.rho(endpoints)
    if np.any(neg_rho_pos <= 0.0):
        raise OutsideChart("stencil point left the domain", z=z.tolist())

    q_sub = t[qa]
    p_count = pos.shape[0]
    pts = chart.to_ambient(q_sub[:, None, None] * (z[None, None, :] + pos[None, :, :]))
    rows_m = partitions.m_batch(
        pts.reshape(-1, n),
        np.repeat(1.0 - q_sub, p_count),
        np.tile(neg_rho_pos, qa.shape[0]),
    ).reshape(qa.shape[0], p_count, n, n)

    dt = np.minimum(h, np.maximum(1.0 - q_sub, cfg.u_floor) / 8.0)
    m_of = np.zeros((s_count, t.shape[0], n, n), dtype=np.complex128)
    dmdt = np.zeros_like(m_of)
    grad = np.zeros((s_count, 2 * n, t.shape[0], n, n), dtype=np.complex128)
    for s in range(s_count):
        m_of[s, qa] = rows_m[:, outer_ids[s]]
        for r in range(2 * n):
            grad[s, r, qa] = (rows_m[:, inner_ids[s, r, 0]]
                              - rows_m[:, inner_ids[s, r, 1]]) / (2.0 * h)
    # time derivative of M at the outer points only
    for sign in (1.0, -1.0):
        tt = q_sub + sign * dt
        pts_t = chart.to_ambient(
            tt[:, None, None] * (z[None, None, :] + outer[None, :, :]))
        rows_t = partitions.m_batch(
            pts_t.reshape(-1, n),
            np.repeat(1.0 - tt, s_count),
            np.tile(neg_rho_pos[outer_ids], qa.shape[0]),
        ).reshape(qa.shape[0], s_count, n, n)
        for s in range(s_count):
            dmdt[s, qa] += sign * rows_t[:, s] / (2.0 * dt)[:, None, None]
    warp_sup = np.sum(np.linalg.norm(m_of, axis=2), axis=-1) * t[None, :]
    return _Workspace(z=z, t=t, w=w, t0=t0, offsets=outer, m_of=m_of,
                      dmdt=dmdt, grad=grad, warp_sup=warp_sup,
                      static_active=static)


def _slot_count(degree: str, n: int) -> int:
    return {"1": 1, "2": 2 * n, "3": n * (2 * n - 1)}[degree]


def _colmul(mats: np.ndarray, lam_t: np.ndarray) -> np.ndarray:
    """Batch product M_q @ lam_b as (Q, B, n) through one wide matmul."""
    q, n = mats.shape[0], mats.shape[-1]
    b = lam_t.shape[1]
    return (mats.reshape(q * n, n) @ lam_t).reshape(q, n, b).transpose(0, 2, 1)


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _real_two_pairing(n: int, u: np.ndarray, vs: np.ndarray):
    """Alternating monomials of a real degree-2 pairing, conjugate half folded.

    u is (..., n), vs is (R, ..., n); returns (d, e) with d of shape
    (R, ..., npairs) contracting against 2 * c_(2,0) and e of shape
    (R, ..., n*n) against c_(1,1); the real part of the sum is the full
    pairing of a real form on (u, vs[r])."""
    if n not in _TRIU_CACHE:
        _TRIU_CACHE[n] = np.triu_indices(n, 1)
    iu, ju = _TRIU_CACHE[n]
    d = u[None, ..., iu] * vs[..., ju]
    d -= vs[..., iu] * u[None, ..., ju]
    e = u[None, ..., :, None] * np.conj(vs)[..., None, :]
    e -= vs[..., :, None] * np.conj(u)[None, ..., None, :]
    return d, e.reshape(e.shape[:-2] + (n * n,))


def _contraction_slots(chart, cfg, ws: _Workspace, thetas, lam: np.ndarray,
                       *, s_list=None):
    """Replicate-blocked pairings of several forms along the contraction.

    All stencil positions share one warp geometry pass; every form reuses it.
    The warp batch runs one replicate block at a time so temporaries stay
    small enough for the allocator to recycle.  Returns (slots_list,
    imag_max, active_count) where slots_list[fi] is (S, n_rep, n_slots_fi)."""
    n = chart.domain.dim_n
    if s_list is None:
        s_list = range(ws.offsets.shape[0])
    s_list = list(s_list)
    qa = np.nonzero(ws.static_active)[0]
    n_rep = cfg.n_rep
    e_dirs = _real_dirs(n)
    slots_out = [np.zeros((len(s_list), n_rep, _slot_count(th.degree, n)))
                 for th in thetas]
    imag_max = 0.0
    if qa.size == 0:
        return slots_out, imag_max, 0
    b = lam.shape[0]
    bk = b // n_rep
    tq = ws.t[qa]
    wq = ws.w[qa]
    ct = (cfg.c * tq)[:, None, None]
    npair = n * (n - 1) // 2
    needs_two = any(th.degree == "2" for th in thetas)
    # degree-2 members of one family contract in a single batched einsum
    fam_groups: dict[int, tuple] = {}
    solo = []
    for fi, th in enumerate(thetas):
        if th.degree == "2" and th.eval_group is not None:
            fam, row = th.eval_group
            fam_groups.setdefault(id(fam), (fam, []))[1].append((fi, row))
        else:
            solo.append((fi, th))
    for si, s in enumerate(s_list):
        z1 = ws.z + ws.offsets[s]
        m_s = ws.m_of[s, qa]
        dm_s = ws.dmdt[s, qa]
        g_s = ws.grad[s, :, qa]          # (Q, 2n, n, n) after fancy indexing
        for rep in range(n_rep):
            lam_t = np.ascontiguousarray(lam[rep * bk:(rep + 1) * bk].T)
            warp = _colmul(m_s, lam_t)
            h_pts = tq[:, None, None] * z1[None, None, :] + ct * warp
            y = z1[None, None, :] + cfg.c * warp + ct * _colmul(dm_s, lam_t)
            z_dirs = np.empty((2 * n, qa.size, bk, n), dtype=np.complex128)
            for r in range(2 * n):
                z_dirs[r] = (tq[:, None, None] * e_dirs[r][None, None, :]
                             + ct * _colmul(g_s[:, r], lam_t))
            flat = h_pts.reshape(-1, n)
            if needs_two:
                mono_d, mono_e = _real_two_pairing(n, y, z_dirs)
            for fam, members in fam_groups.values():
                rows = [row for _, row in members]
                cf = fam.coeffs_stack(flat)[:, rows].reshape(
                    qa.size, bk, len(rows), -1)
                # folding the (0,2) block onto the (2,0) block needs the
                # real form symmetry; defects join the imag certificate
                sym = np.abs(cf[..., npair + n * n:]
                             - np.conj(cf[..., :npair]))
                imag_max = max(imag_max, float(np.max(sym, initial=0.0)))
                if npair == 1:
                    holo = mono_d[..., 0, None] * cf[None, ..., 0]
                else:
                    holo = np.einsum("rqbp,qbkp->rqbk", mono_d,
                                     cf[..., :npair])
                mixed = np.einsum("rqbp,qbkp->rqbk", mono_e,
                                  cf[..., npair:npair + n * n])
                imag_max = max(imag_max,
                               float(np.max(np.abs(mixed.imag), initial=0.0)))
                slot = np.einsum("rqk,q->rk",
                                 (2.0 * holo.real + mixed.real).mean(axis=2),
                                 wq)
                for ki, (fi, _) in enumerate(members):
                    slots_out[fi][si, rep] = slot[:, ki]
            for fi, th in solo:
                if th.eval_group is not None:
                    fam, row = th.eval_group
                    coeffs = fam.coeffs_stack(flat)[:, row].reshape(
                        qa.size, bk, th.n_coeffs)
                else:
                    coeffs = th.coeffs_at(flat).reshape(
                        qa.size, bk, th.n_coeffs)
                if th.degree == "1":
                    vals = pair_one("1", n, coeffs, y)[None]
                elif th.degree == "2":
                    sym = np.abs(coeffs[..., npair + n * n:]
                                 - np.conj(coeffs[..., :npair]))
                    imag_max = max(imag_max, float(np.max(sym, initial=0.0)))
                    if npair == 1:
                        holo = mono_d[..., 0] * coeffs[None, ..., 0]
                    else:
                        holo = np.einsum("rqbp,qbp->rqb", mono_d,
                                         coeffs[..., :npair])
                    mixed = np.einsum("rqbp,qbp->rqb", mono_e,
                                      coeffs[..., npair:npair + n * n])
                    imag_max = max(imag_max,
                                   float(np.max(np.abs(mixed.imag),
                                                initial=0.0)))
                    vals = 2.0 * holo.real + mixed.real
                else:
                    cvals = np.stack(
                        [pair_three(n, coeffs, y, z_dirs[r1], z_dirs[r2])
                         for r1 in range(2 * n)
                         for r2 in range(r1 + 1, 2 * n)])
                    imag_max = max(imag_max,
                                   float(np.max(np.abs(cvals.imag),
                                                initial=0.0)))
                    vals = cvals.real
                slots_out[fi][si, rep] = vals.mean(axis=2) @ wq
    return slots_out, imag_max, int(qa.size)


_TWO_FORM_SOLVE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _two_form_basis(n: int):
    """Real basis of degree-2 forms and the inverse pair-evaluation matrix."""
    if n in _TWO_FORM_SOLVE:
        return _TWO_FORM_SOLVE[n]
    ncoef = coefficient_count("2", n)
    basis_gens = generator_basis("2", n)
    pos_of = {g: i for i, g in enumerate(basis_gens)}
    vecs = []
    for i in range(n):
        for j in range(i + 1, n):
            for val in (1.0, 1j):
                v = np.zeros(ncoef, dtype=np.complex128)
                v[pos_of[(i, j)]] = val
                v[pos_of[(n + i, n + j)]] = np.conj(val)
                vecs.append(v)
    for i in range(n):
        v = np.zeros(ncoef, dtype=np.complex128)
        v[pos_of[(i, n + i)]] = 1j
        vecs.append(v)
    for i in range(n):
        for j in range(i + 1, n):
            for val in (1.0, 1j):
                v = np.zeros(ncoef, dtype=np.complex128)
                v[pos_of[(i, n + j)]] = val
                v[pos_of[(j, n + i)]] = -np.conj(val)
                vecs.append(v)
    basis = np.stack(vecs)
    e_dirs = _real_dirs(n)
    pairs = [(r1, r2) for r1 in range(2 * n) for r2 in range(r1 + 1, 2 * n)]
    mat = np.zeros((len(pairs), basis.shape[0]))
    for row, (r1, r2) in enumerate(pairs):
        for col in range(basis.shape[0]):
            val = pair_two("2", n, basis[col][None, :],
                           e_dirs[r1][None, :], e_dirs[r2][None, :])[0]
            mat[row, col] = float(np.real(val))
    inv = np.linalg.inv(mat)
    _TWO_FORM_SOLVE[n] = (basis, inv)
    return basis, inv


def _coeffs_from_slots(degree: str, n: int, slots: np.ndarray) -> np.ndarray:
    """Coefficients of the degree-lowered output from real pair evaluations.

    slots has shape (..., n_slots) with the slot layout of _form_contraction.
    Degree "2" input yields the n complex coefficients of a real 1-form;
    degree "3" input yields the packed degree-2 layout; degree "1" input is
    the scalar itself.
    """
    if degree == "1":
        return slots[..., 0:1].astype(np.complex128)
    if degree == "2":
        alpha = slots.reshape(slots.shape[:-1] + (n, 2))
        return 0.5 * (alpha[..., 0] - 1j * alpha[..., 1])
    basis, inv = _two_form_basis(n)
    xi = slots @ inv.T
    return xi @ basis


def homotopy_coeffs(chart, partitions, cfg, theta, pts,
                    *, lam: Optional[np.ndarray] = None):
    """Coefficients of H(theta) at chart points, with replicate standard errors.

    Returns (coeffs (m, k), stderr (m, k) real, diagnostics dict).  Degree
    "2" input gives the real 1-form convention, degree "3" the packed
    degree-2 layout, degree "1" a scalar column.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=np.complex128))
    n = chart.domain.dim_n
    if lam is None:
        lam = _lam_batch(cfg, n)
    if cfg.c is None:
        raise ChartConstructionFailure("config has no calibrated warp amplitude")
    hint = support_hint_of(theta)
    out, err = [], []
    diags = {"imag_max": 0.0, "active_nodes": 0}
    for z in pts:
        ws = _build_workspace(chart, partitions, cfg, z, [hint], stencil=False)
        slots_l, imag_max, n_act = _contraction_slots(chart, cfg, ws, [theta],
                                                      lam)
        coeffs_rep = _coeffs_from_slots(theta.degree, n, slots_l[0][0])
        out.append(coeffs_rep.mean(axis=0))
        err.append(np.std(np.abs(coeffs_rep - coeffs_rep.mean(axis=0)), axis=0)
                   / np.sqrt(cfg.n_rep))
        diags["imag_max"] = max(diags["imag_max"], imag_max)
        diags["active_nodes"] = max(diags["active_nodes"], n_act)
    coeffs = np.stack(out)
    stderr = np.stack(err)
    if cfg.mc_cap is not None and float(np.max(stderr, initial=0.0)) > cfg.mc_cap:
        raise McBudgetExceeded(
            "standard error above the requested cap",
            stderr=float(np.max(stderr)), cap=cfg.mc_cap,
            partial=coeffs,
        )
    return coeffs, stderr, diags


_H_OUT_TAG = {"1": "0", "2": "1", "3": "2"}


def homotopy_field(chart, partitions, cfg, theta) -> SmoothFormField:
    """H(theta) as an evaluable field on chart coordinates."""
    def fn(z):
        return homotopy_coeffs(chart, partitions, cfg, theta, z)[0]

    return SmoothFormField(_H_OUT_TAG[theta.degree], chart.domain.dim_n, fn)


def homotopy_apply(chart, partitions, cfg, theta, z, v=None, v2=None,
                   *, with_stderr: bool = False):
    """Averaged pullback integral of theta along the contraction at z.

    Degree-1 input returns the scalar; degree-2 takes one direction v;
    degree-3 takes a pair (v, v2).  Directions are paired through the
    reconstructed output coefficients.
    """
    coeffs, stderr, _ = homotopy_coeffs(chart, partitions, cfg, theta, z)
    c0, e0 = coeffs[0], stderr[0]
    n = chart.domain.dim_n
    if theta.degree == "1":
        val, err = complex(c0[0]), float(e0[0])
    elif theta.degree == "2":
        if v is None:
            raise OutsideChart("degree-2 input needs a direction")
        val = complex(pair_one("1", n, c0, np.asarray(v, dtype=np.complex128)))
        err = float(np.sum(e0) * 2.0)
    else:
        if v is None or v2 is None:
            raise OutsideChart("degree-3 input needs a direction pair")
        val = complex(pair_two("2", n, c0, np.asarray(v, dtype=np.complex128),
                               np.asarray(v2, dtype=np.complex128)))
        err = float(np.sum(e0))
    return (val, err) if with_stderr else val


# ---------------------------------------------------------------------------
# single-point contraction API


def _m_single(chart, partitions, t: float, z: np.ndarray) -> np.ndarray:
    amb = chart.to_ambient(t * z)
    neg_rho = -float(chart.domain.rho(chart.to_ambient(z)))
    return partitions.m_batch(amb[None, :], np.array([1.0 - t]),
                              np.array([neg_rho]))[0]


def _require_in_v(chart, z):
    if not bool(chart.in_v(z)[0]):
        raise OutsideChart("point outside the chart ball", z=np.asarray(z).tolist())


def h_lambda(chart, partitions, cfg, lam, t, z) -> np.ndarray:
    """The warped contraction h(t, z) for one warp parameter lam."""
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.complex128)
    _require_in_v(chart, z)
    if cfg.c is None:
        raise ChartConstructionFailure("config has no calibrated warp amplitude")
    if t == 0.0:
        return np.zeros_like(z)
    if t == 1.0:
        return z.copy()
    m = _m_single(chart, partitions, float(t), z)
    return t * z + cfg.c * t * (m @ lam)


def h_velocity(chart, partitions, cfg, lam, t, z) -> np.ndarray:
    """Time derivative of the contraction, one-sided at the ends."""
    h = cfg.fd_step
    t = float(t)
    dt = min(h, max(1.0 - t, t, cfg.u_floor) / 8.0)
    f = lambda tt: h_lambda(chart, partitions, cfg, lam, tt, z)
    if t - dt <= 0.0:
        return (-3.0 * f(t) + 4.0 * f(t + dt) - f(t + 2 * dt)) / (2.0 * dt)
    if t + dt >= 1.0:
        return (3.0 * f(t) - 4.0 * f(t - dt) + f(t - 2 * dt)) / (2.0 * dt)
    return (f(t + dt) - f(t - dt)) / (2.0 * dt)


def h_direction_derivative(chart, partitions, cfg, lam, t, z, v) -> np.ndarray:
    """Directional derivative of the contraction along the real direction v."""
    h = cfg.fd_step
    v = np.asarray(v, dtype=np.complex128)
    zp = h_lambda(chart, partitions, cfg, lam, t, np.asarray(z) + h * v)
    zm = h_lambda(chart, partitions, cfg, lam, t, np.asarray(z) - h * v)
    return (zp - zm) / (2.0 * h)


# ---------------------------------------------------------------------------
# identity verification


def _resolve_d(chart, cfg, theta, d_theta):
    """Exterior derivative to feed the identity, or None if identically 0."""
    n = chart.domain.dim_n
    if d_theta is None:
        d_theta = exterior_derivative(theta, step=cfg.fd_step)
    sc, lo, hi = support_hint_of(theta)
    rng = rng_for(cfg.seed, "d-zero-probe")
    g = rng.standard_normal((64, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    flat = g * rng.uniform(lo, hi, size=64)[:, None]
    probe = sc + flat[:, :n] + 1j * flat[:, n:]
    if float(np.max(np.abs(d_theta.coeffs_at(probe)), initial=0.0)) == 0.0:
        return None
    if d_theta.support_hint is None:
        d_theta = replace(d_theta, support_hint=theta.support_hint)
    return d_theta


def verify_homotopy_identity(chart, partitions, cfg, theta, grid,
                             *, d_theta: Optional[SmoothFormField] = None,
                             shrink_factor: Optional[int] = None,
                             shrink_subset: int = 25,
                             workers: Optional[int] = None) -> dict:
    """Residual of d H(theta) + H(d theta) - theta on a chart grid.

    The exterior derivative of the output runs central differences through
    the shared stencil geometry; the optional shrink check re-evaluates the
    worst points with ``shrink_factor`` times more warp samples.
    """
    reports = verify_identity_suite(chart, partitions, cfg, [theta], grid,
                                    d_thetas=[d_theta],
                                    shrink_factor=shrink_factor,
                                    shrink_subset=shrink_subset,
                                    workers=workers)
    return reports[0]


def verify_identity_suite(chart, partitions, cfg, thetas, grid,
                          *, d_thetas=None,
                          shrink_factor: Optional[int] = None,
                          shrink_subset: int = 25,
                          workers: Optional[int] = None) -> list[dict]:
    """Identity residuals for several forms sharing one stencil geometry.

    workers > 1 fans grid points over forked worker processes; results are
    identical to the serial pass because every point sees the same common
    warp sample batch."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.complex128))
    n = chart.domain.dim_n
    if cfg.c is None:
        raise ChartConstructionFailure("config has no calibrated warp amplitude")
    if d_thetas is None:
        d_thetas = [None] * len(thetas)
    d_thetas = [_resolve_d(chart, cfg, th, d) for th, d in zip(thetas, d_thetas)]
    res = _identity_fanout(chart, partitions, cfg, thetas, d_thetas, grid,
                           _lam_batch(cfg, n), workers)
    reports = []
    for fi in range(len(thetas)):
        reports.append({
            "max": float(np.max(res["residual"][fi])),
            "mean": float(np.mean(res["residual"][fi])),
            "mc_stderr": float(np.max(res["stderr"][fi])),
            "imag_max": res["imag_max"],
            "budgets": {"n_lambda": cfg.n_lambda, "n_t": cfg.n_t,
                        "fd_step": cfg.fd_step, "n_points": int(grid.shape[0])},
            "residual": res["residual"][fi],
        })
    if shrink_factor:
        worst_all = np.max(np.stack([r["residual"] for r in reports]), axis=0)
        worst = np.argsort(worst_all)[::-1][:shrink_subset]
        lam_big = _lam_batch(cfg, n, shrink_factor * cfg.n_lambda)
        res_big = _identity_fanout(chart, partitions, cfg, thetas, d_thetas,
                                   grid[worst], lam_big, workers)
        for fi, rep in enumerate(reports):
            rep["shrink"] = {
                "factor": shrink_factor,
                "subset": [int(i) for i in worst],
                "max_before": float(np.max(res["residual"][fi][worst])),
                "max_after": float(np.max(res_big["residual"][fi])),
            }
    return reports


_FANOUT_STATE = None


def _identity_chunk(idx):
    chart, partitions, cfg, thetas, d_thetas, grid, lam = _FANOUT_STATE
    return idx, _identity_pass(chart, partitions, cfg, thetas, d_thetas,
                               grid[idx], lam)


def _identity_fanout(chart, partitions, cfg, thetas, d_thetas, grid, lam,
                     workers):
    """Run the identity pass, optionally split over forked processes.

    Fork workers inherit the prepared state without pickling, which keeps
    closure-based form fields usable; platforms without fork fall back to
    the serial pass."""
    if not workers or workers <= 1 or grid.shape[0] <= 1:
        return _identity_pass(chart, partitions, cfg, thetas, d_thetas, grid,
                              lam)
    import concurrent.futures
    import multiprocessing

    if "fork" not in multiprocessing.get_all_start_methods():
        return _identity_pass(chart, partitions, cfg, thetas, d_thetas, grid,
                              lam)
    m = grid.shape[0]
    chunks = [c for c in np.array_split(np.arange(m), min(4 * workers, m))
              if c.size]
    residual = np.zeros((len(thetas), m))
    stderr = np.zeros((len(thetas), m))
    imag_max = 0.0
    global _FANOUT_STATE
    _FANOUT_STATE = (chart, partitions, cfg, thetas, d_thetas, grid, lam)
    try:
        ctx = multiprocessing.get_context("fork")
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=workers, mp_context=ctx) as ex:
            for idx, res in ex.map(_identity_chunk, chunks):
                residual[:, idx] = res["residual"]
                stderr[:, idx] = res["stderr"]
                imag_max = max(imag_max, res["imag_max"])
    finally:
        _FANOUT_STATE = None
    return {"residual": residual, "stderr": stderr, "imag_max": imag_max}


def _stencil_d_coeffs(n: int, h: float, slots: np.ndarray) -> np.ndarray:
    """Per-replicate d coefficients of the 1-form read off a central stencil.

    slots is (1 + 4n, n_rep, 2n) in the order [center, +e, -e, +ie, -ie, ...];
    returns (n_rep, ncoef) in the packed degree-2 layout."""
    w_out = _coeffs_from_slots("2", n, slots).transpose(1, 0, 2)
    fx = (w_out[:, 1::2][:, 0::2] - w_out[:, 2::2][:, 0::2]) / (2.0 * h)
    fy = (w_out[:, 1::2][:, 1::2] - w_out[:, 2::2][:, 1::2]) / (2.0 * h)
    dz_cols = 0.5 * (fx - 1j * fy)
    dzbar_cols = 0.5 * (fx + 1j * fy)
    _, d_h = derivative_coeffs_from_columns("1", n, dz_cols, dzbar_cols)
    return d_h


def homotopy_d_coeffs(chart, partitions, cfg, theta, pts,
                      *, lam: Optional[np.ndarray] = None):
    """Coefficients of d H(theta) at chart points via the shared stencil.

    Central differences of the averaged operator output run through one
    workspace per point, so every stencil shift sees the same warp batch.
    Degree-2 input gives the packed degree-2 layout of the derivative.
    Returns (coeffs (m, k), stderr (m, k) real, diagnostics dict)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.complex128))
    n = chart.domain.dim_n
    if cfg.c is None:
        raise ChartConstructionFailure("config has no calibrated warp amplitude")
    if lam is None:
        lam = _lam_batch(cfg, n)
    hint = support_hint_of(theta)
    out, err = [], []
    diags = {"imag_max": 0.0, "active_nodes": 0}
    for z in pts:
        ws = _build_workspace(chart, partitions, cfg, z, [hint], stencil=True)
        slots_l, im, n_act = _contraction_slots(chart, cfg, ws, [theta], lam)
        diags["imag_max"] = max(diags["imag_max"], im)
        diags["active_nodes"] = max(diags["active_nodes"], n_act)
        d_rep = _stencil_d_coeffs(n, cfg.fd_step, slots_l[0])
        out.append(d_rep.mean(axis=0))
        err.append(np.std(np.abs(d_rep - d_rep.mean(axis=0)), axis=0)
                   / np.sqrt(cfg.n_rep))
    return np.stack(out), np.stack(err), diags


def _identity_pass(chart, partitions, cfg, thetas, d_thetas, grid, lam):
    n = chart.domain.dim_n
    h = cfg.fd_step
    hints = [support_hint_of(th) for th in thetas]
    n_f = len(thetas)
    residual = np.zeros((n_f, grid.shape[0]))
    stderr = np.zeros((n_f, grid.shape[0]))
    imag_max = 0.0
    live_d = [d for d in d_thetas if d is not None]
    for gi, z in enumerate(grid):
        ws = _build_workspace(chart, partitions, cfg, z, hints, stencil=True)
        slots_l, im, _ = _contraction_slots(chart, cfg, ws, thetas, lam)
        imag_max = max(imag_max, im)
        if live_d:
            slots3_l, im3, _ = _contraction_slots(chart, cfg, ws, live_d, lam,
                                                  s_list=[0])
            imag_max = max(imag_max, im3)
            slots3_of = dict(zip((id(d) for d in live_d), slots3_l))
        for fi, (theta, d_theta) in enumerate(zip(thetas, d_thetas)):
            d_h = _stencil_d_coeffs(n, h, slots_l[fi])
            if d_theta is not None:
                d_h = d_h + _coeffs_from_slots("3", n, slots3_of[id(d_theta)][0])
            target = theta.coeffs_at(z[None, :])[0]
            diff = d_h - target[None, :]
            residual[fi, gi] = float(np.max(np.abs(diff.mean(axis=0))))
            spread = np.std(np.abs(diff - diff.mean(axis=0)), axis=0)
            stderr[fi, gi] = float(np.max(spread) / np.sqrt(cfg.n_rep))
    return {"residual": residual, "stderr": stderr, "imag_max": imag_max}


# ---------------------------------------------------------------------------
# cutoff solve


def _radial_cutoff(r_in: float):
    """Scalar profile 0 inside r_in, 1 outside 2 r_in, with its derivative."""
    def psi(r):
        return smooth_step((np.asarray(r) - r_in) / r_in)

    def dpsi(r):
        return smooth_step_d((np.asarray(r) - r_in) / r_in) / r_in

    return psi, dpsi


def _closedness_probe(theta: SmoothFormField, cfg, rng) -> float:
    """Closedness defect relative to the derivative magnitude of the form.

    Uses the declared analytic derivative when available; otherwise compares
    finite-difference d against the size of the Wirtinger columns, so tightly
    supported forms are not penalized for their envelope curvature."""
    sc, lo, hi = support_hint_of(theta)
    g = rng.standard_normal((64, 2 * theta.dim_n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = lo + (hi - lo) * rng.random(64)
    flat = g * r[:, None]
    pts = sc + flat[:, :theta.dim_n] + 1j * flat[:, theta.dim_n:]
    if theta.analytic_d is not None:
        vals = theta.analytic_d.coeffs_at(pts)
        scale = max(1.0, float(np.max(np.abs(theta.coeffs_at(pts)), initial=0.0)))
        return float(np.max(np.abs(vals), initial=0.0)) / scale
    step = min(cfg.fd_step, 1e-3 * (hi - lo))
    from .currents import _wirtinger_columns

    dz, dzbar = _wirtinger_columns(theta.coeffs_at, pts, step)
    _, dcoef = derivative_coeffs_from_columns(theta.degree, theta.dim_n, dz, dzbar)
    col_scale = max(1.0, float(np.max(np.abs(dz))), float(np.max(np.abs(dzbar))))
    return float(np.max(np.abs(dcoef), initial=0.0)) / col_scale


def poincare_primitive(g_field: SmoothFormField, z0: np.ndarray,
                       s_nodes: int = 12) -> SmoothFormField:
    """Straight-line primitive of a closed degree-2 field from the star
    center z0: returns a real 1-form tau with d tau = g on the star region."""
    n = g_field.dim_n
    z0 = np.asarray(z0, dtype=np.complex128)
    gx, gw = np.polynomial.legendre.leggauss(s_nodes)
    s_q = 0.5 * (gx + 1.0)
    s_w = 0.5 * gw
    e_dirs = _real_dirs(n)

    def fn(z):
        z = np.atleast_2d(z)
        out = np.zeros((z.shape[0], n), dtype=np.complex128)
        for i, zz in enumerate(z):
            ray = zz - z0
            pts = z0[None, :] + s_q[:, None] * ray[None, :]
            cof = g_field.coeffs_at(pts)
            alpha = np.empty(2 * n)
            for r in range(2 * n):
                vals = pair_two("2", n, cof, ray[None, :], e_dirs[r][None, :])
                alpha[r] = float(np.sum(s_w * s_q * np.real(vals)))
            out[i] = 0.5 * (alpha[0::2] - 1j * alpha[1::2])
        return out

    return SmoothFormField("1", n, fn)


def cutoff_solve(chart, partitions, cfg, theta, r_cut: Optional[float] = None,
                 *, details: Optional[dict] = None) -> SmoothFormField:
    """Solve dw = theta on the window W for a closed degree-2 field.

    Multiplies theta by a radial cutoff vanishing near the anchor, applies the
    averaged contraction operator, and repairs the cutoff defect with a
    straight-line primitive of the closed correction term.  The returned
    field evaluates on chart coordinates; each call runs the full quadrature.
    """
    domain = chart.domain
    n = domain.dim_n
    if r_cut is None:
        r_cut = chart.r2 / 4.0
    gap = np.linalg.norm(chart.p - chart.a_p) - chart.r2 - chart.eta1
    if not 0.0 < 2.0 * r_cut < min(gap, chart.r1):
        raise CutoffRadiusInvalid(
            "doubled cutoff ball must fit between the anchor and the window",
            r_cut=r_cut, gap=float(gap),
        )
    rng = rng_for(cfg.seed, "closedness-probe")
    defect = _closedness_probe(theta, cfg, rng)
    if defect > 5e-4:
        raise InputNotClosed("input form is not closed", defect=defect)
    psi, dpsi = _radial_cutoff(r_cut)
    sc, lo, hi = support_hint_of(theta)

    def psi_theta_fn(z):
        z = np.atleast_2d(z)
        return psi(np.linalg.norm(z, axis=1))[:, None] * theta.coeffs_at(z)

    psi_theta = SmoothFormField("2", n, psi_theta_fn,
                                support_hint=(sc, max(lo, r_cut), hi))

    def dpsi_fn(z):
        z = np.atleast_2d(z)
        r = np.linalg.norm(z, axis=1)
        fac = dpsi(r) / np.maximum(2.0 * r, 1e-300)
        return fac[:, None] * np.conj(z)

    dpsi_field = SmoothFormField(
        "1", n, dpsi_fn,
        support_hint=(np.zeros(n, dtype=np.complex128), r_cut, 2.0 * r_cut))
    wedge = wedge_fields(dpsi_field, theta)
    wedge = SmoothFormField("3", n, wedge.coeff_fn,
                            support_hint=dpsi_field.support_hint)
    h_main = homotopy_field(chart, partitions, cfg, psi_theta)
    g_field = homotopy_field(chart, partitions, cfg, wedge)
    z0 = chart.to_chart(chart.p - 0.5 * chart.eta1 * chart.nu_out)
    tau = poincare_primitive(g_field, z0, cfg.s_nodes)

    def w_fn(z):
        return h_main.coeffs_at(z) + tau.coeffs_at(z)

    w = SmoothFormField("1", n, w_fn)
    if details is not None:
        details.update({"r_cut": float(r_cut), "z0": z0, "psi": psi,
                        "g_field": g_field, "h_main": h_main, "tau": tau,
                        "closedness_defect": defect})
    return w


# ---------------------------------------------------------------------------
# averaging operator


def averaging_T(domain: DomainSpec, cfg: HomotopyConfig, f: Callable,
                z: np.ndarray, chart: LocalChart, *, tag=0) -> float:
    """Depth-weighted averages of f over the comparison regions along the
    contraction ray of z; f takes chart coordinates and returns nonnegative
    reals.  Deterministic for fixed (cfg.seed, tag)."""
    m_type = domain.type_m
    z = np.asarray(z, dtype=np.complex128)
    z_amb = chart.to_ambient(z)
    delta_z = boundary_distance(domain, z_amb)
    neg_rho = -float(domain.rho(z_amb))
    t, w, _ = _avg_nodes(cfg)
    total = 0.0
    for qi, (tq, wq) in enumerate(zip(t, w)):
        tz_amb = chart.to_ambient(tq * z)
        frame, fac = q_region(domain, tz_amb, 1.0 - tq, neg_rho)
        radii = domain.c0 * fac * frame.radii
        lam = unit_polydisk_points(cfg.avg_q_samples, domain.dim_n,
                                   cfg.seed, "avg-q", tag, qi)
        pts = tz_amb + (lam * radii[None, :]) @ frame.vectors
        diff = pts - tz_amb
        r = np.linalg.norm(diff, axis=1)
        ok = r > 1e-14
        taus = np.full(r.shape, np.inf)
        if np.any(ok):
            taus[ok] = tau_batch(domain, tz_amb, diff[ok] / r[ok, None],
                                 frame.scale, n_angles=cfg.avg_angles,
                                 n_radial=4, rel_tol=1e-2)
        accept = r < domain.c0 * fac * taus
        accept &= domain.rho(pts) < 0.0
        if not np.any(accept):
            continue
        depth = boundary_distance_batch(domain, pts[accept])
        vals = np.asarray(f(pts[accept] - chart.a_p), dtype=np.float64)
        contrib = np.zeros(pts.shape[0])
        contrib[accept] = vals * depth ** (1.0 - 2.0 / m_type)
        inner = float(np.mean(contrib))
        total += wq * (1.0 - tq) ** (1.0 / m_type - 1.0) * inner
    return float(delta_z ** (1.0 / m_type - 1.0) * total)


def _avg_nodes(cfg: HomotopyConfig):
    from .util import dyadic_time_nodes

    t, w = dyadic_time_nodes(cfg.t0, u_floor=cfg.u_floor, n_target=cfg.avg_t_nodes)
    return t, w, cfg.t0


# ---------------------------------------------------------------------------
# measured comparison constants


def measure_contraction_constants(chart, partitions, cfg, z_pool,
                                  *, n_samples: int = 500, seed: int = 0) -> dict:
    """Sampled constants of the contraction geometry.

    Reports depth-comparability bands along the rays, the depth of the warped
    image against the dyadic scale, the inverse containment factor c1, and
    the volume ratio between the warp image and the comparison region.
    """
    domain = chart.domain
    n = domain.dim_n
    rng = rng_for(seed, "contraction-constants")
    zs = z_pool[rng.integers(0, z_pool.shape[0], size=n_samples)]
    ts = rng.uniform(0.05, 0.95, size=n_samples)
    lam = unit_polydisk_points(n_samples, n, seed, "constants-lam")
    pos_amb = chart.to_ambient(ts[:, None] * zs)
    z_amb = chart.to_ambient(zs)
    neg_rho = -domain.rho(z_amb)
    mats = partitions.m_batch(pos_amb, 1.0 - ts, neg_rho)
    h_amb = pos_amb + (cfg.c * ts)[:, None] * np.einsum("mij,mj->mi", mats, lam)
    depth_tz = boundary_distance_batch(domain, pos_amb)
    inside = domain.rho(h_amb) < 0.0
    depth_h = np.full(n_samples, np.nan)
    depth_h[inside] = boundary_distance_batch(domain, h_amb[inside])
    # covering comparability along the rays
    rows, js, w = partitions.phi_weights(pos_amb)
    ratios = depth_tz[rows] / partitions.delta_j[js]
    lamc = np.einsum("pk,pik->pi", pos_amb[rows] - partitions.centers[js],
                     np.conj(partitions.vectors[js]))
    dilation_k = np.max(np.abs(lamc) / partitions.slot_radii[js], axis=1)
    # image depth against the dyadic scale in the far branch
    ks, kw = _psi_pairs(1.0 - ts)
    k_main = ks[np.arange(n_samples), np.argmax(kw, axis=1)]
    far = (2.0 ** -k_main.astype(float)) / neg_rho > 1.0
    scale_ratio = depth_h[far & inside[:]] / 2.0 ** -k_main[far & inside].astype(float)
    near_ratio = depth_h[~far & inside] / depth_tz[~far & inside]
    # inverse containment: shrink the comparison region until the linear warp
    # map reaches every target
    c1 = None
    sub = rng.integers(0, n_samples, size=64)
    for q in range(1, 12):
        cand = 2.0**-q
        ok = True
        for i in sub:
            fr, fac = q_region(domain, pos_amb[i], 1.0 - ts[i], float(neg_rho[i]))
            radii = cand * domain.c0 * fac * fr.radii
            targets = (unit_polydisk_points(8, n, seed, "c1", int(i))
                       * radii[None, :]) @ fr.vectors
            try:
                sol = np.linalg.solve(mats[i], targets.T).T / (cfg.c * ts[i])
            except np.linalg.LinAlgError:
                ok = False
                break
            if np.any(np.abs(sol) >= 1.0):
                ok = False
                break
        if ok:
            c1 = cand
            break
    # volume band: warp image volume against the comparison polydisk volume
    det = np.abs(np.linalg.det(mats)) ** 2
    vol_q1 = (np.pi ** n) * (cfg.c * ts) ** (2 * n) * det
    vol_q = np.empty(n_samples)
    for i in range(n_samples):
        fr, fac = q_region(domain, pos_amb[i], 1.0 - ts[i], float(neg_rho[i]))
        vol_q[i] = np.prod(np.pi * (domain.c0 * fac * fr.radii) ** 2)
    vol_ratio = vol_q1 / vol_q
    return {
        "depth_comparability": [float(np.min(ratios)), float(np.max(ratios))],
        "covering_dilation_k": float(np.max(dilation_k)),
        "near_branch_depth_ratio": _band(near_ratio),
        "far_branch_depth_ratio": _band(scale_ratio),
        "image_inside_fraction": float(np.mean(inside)),
        "c1_inverse_containment": c1,
        "volume_ratio_band": _band(vol_ratio),
    }


def _band(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return [None, None]
    return [float(np.min(x)), float(np.max(x))]


# ---------------------------------------------------------------------------
# system assembly


@dataclass
class HomotopySystem:
    """Chart, frozen partition, calibrated config, and the W grid."""

    chart: LocalChart
    partitions: PartitionSystem
    cfg: HomotopyConfig
    grid: np.ndarray
    z0: np.ndarray
    audit: dict


def default_hints(chart: LocalChart):
    """Support annuli the registration plans for: the test-form band and the
    cutoff correction band around the anchor."""
    n = chart.domain.dim_n
    r = chart.r2 / 4.0
    zero = np.zeros(n, dtype=np.complex128)
    return [(zero, r, 5.0 * r), (zero, 0.9 * r, 2.2 * r)]


def _u_ladder(cfg: HomotopyConfig, per_octave: int = 12) -> np.ndarray:
    octaves = int(np.ceil(-np.log2(cfg.u_floor)))
    ks = np.arange(octaves * per_octave + 1)
    return 2.0 ** -(ks / per_octave)


def build_homotopy_system(
    domain: DomainSpec,
    p: np.ndarray,
    *,
    cfg: Optional[HomotopyConfig] = None,
    grid_shape: tuple[int, int] = (20, 20),
    hints=None,
    segment_points: Optional[np.ndarray] = None,
    covering_budget: int = 100_000,
    calibration_samples: int = 1000,
) -> HomotopySystem:
    """Build a chart, register the contraction paths, freeze the covering,
    and calibrate the warp amplitude.  The registered families cover the W
    grid rays, the straight-line primitive segments, and the calibration
    sample, so later evaluations stay inside the frozen partition."""
    cfg = cfg or HomotopyConfig()
    chart = build_local_chart(domain, p, seed=cfg.seed)
    if hints is None:
        hints = default_hints(chart)
    grid = w_sample_grid(chart, *grid_shape)
    partitions = PartitionSystem(domain, chart, budget=covering_budget)
    m_type = domain.type_m
    ladder_u = _u_ladder(cfg)
    ladder_t = 1.0 - ladder_u
    ladder_t = ladder_t[ladder_t > 0.0]

    def register_family(ys: np.ndarray, full: bool):
        for y in ys:
            ts = ladder_t
            if not full:
                pads = 2.0 * _pad(cfg, ts, 1.0 - ts, m_type)
                keep = np.zeros(ts.shape[0], dtype=bool)
                for (sc, lo, hi) in hints:
                    dist = np.linalg.norm(ts[:, None] * y[None, :] - sc[None, :],
                                          axis=1)
                    keep |= _band_active(dist, pads + 1e-4, lo, hi)
                ts = ts[keep]
            if ts.size:
                partitions.register(chart.to_ambient(ts[:, None] * y[None, :]))

    register_family(grid, full=True)
    partitions.register(chart.to_ambient(np.zeros((1, domain.dim_n))))
    z0 = chart.to_chart(chart.p - 0.5 * chart.eta1 * chart.nu_out)
    if segment_points is not None:
        # straight-line primitive rays from the star center to these points
        # must stay inside the frozen covering; fd stencil shifts sit far
        # inside the covering margin at these depths
        seg = np.atleast_2d(np.asarray(segment_points, dtype=np.complex128))
        gx, _ = np.polynomial.legendre.leggauss(cfg.s_nodes)
        s_q = 0.5 * (gx + 1.0)
        segs = z0[None, None, :] + s_q[None, :, None] * (seg[:, None, :]
                                                         - z0[None, None, :])
        register_family(segs.reshape(-1, domain.dim_n), full=False)
    # calibration paths need coverage across the whole time range
    rng = rng_for(cfg.seed, "warp-calibration")
    z_idx = rng.integers(0, grid.shape[0], size=calibration_samples)
    ts = rng.uniform(0.02, 0.98, size=calibration_samples)
    partitions.register(chart.to_ambient(ts[:, None] * grid[z_idx]))
    partitions.freeze()
    audit = audit_partition(partitions, seed=cfg.seed)
    cfg2, calib = calibrate_homotopy(chart, partitions, cfg, grid,
                                     n_samples=calibration_samples)
    audit.update(calib)
    audit["chart"] = dict(chart.audit)
    return HomotopySystem(chart=chart, partitions=partitions, cfg=cfg2,
                          grid=grid, z0=z0, audit=audit)
