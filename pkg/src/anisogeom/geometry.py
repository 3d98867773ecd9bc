"""Anisotropic geometry: directional radii, extremal frames, polydisks.

The directional radius tau(zeta, v, eps) is the largest c such that rho stays
below rho(zeta) + eps on the full complex disk {zeta + lam v : |lam| < c}.  It
is phase invariant in v and nondecreasing in eps.  Extremal frames order an
orthonormal basis from the complex normal outward, each vector minimizing tau
over the remaining orthogonal subspace; polydisks are frame-aligned products
of disks with radii c0 * A * tau_i.

All searches are bisections over vectorized evaluations of rho, so the rho
callable of the domain must accept (..., n) batches.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.spatial import cKDTree

from .domains import (
    DomainSpec,
    boundary_distance,
    boundary_distance_batch,
    complex_normal,
)
from .errors import (
    BadScale,
    CoveringBudgetExceeded,
    DegenerateGradient,
    OutOfRange,
    TauBracketFailure,
)
from .sampling import fibonacci_sphere_directions
from .util import real_view

TAU_REL_TOL = 1e-4
_DEFAULT_ANGLES = 64
_REFINED_ANGLES = 256
_DEFAULT_RADIAL = 8


def _disk_grid(n_angles: int, n_radial: int) -> np.ndarray:
    """Unit-disk sample grid (n_radial, n_angles): rays at sampled angles."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    fracs = np.linspace(0.0, 1.0, n_radial + 1)[1:]
    return fracs[:, None] * np.exp(1j * theta)[None, :]


_GRID_CACHE: dict = {}


def _grid(n_angles: int, n_radial: int) -> np.ndarray:
    key = (n_angles, n_radial)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = _disk_grid(n_angles, n_radial)
    return _GRID_CACHE[key]


def tau_batch(
    domain: DomainSpec,
    zeta: np.ndarray,
    dirs: np.ndarray,
    eps,
    *,
    rel_tol: float = TAU_REL_TOL,
    n_angles: int = _DEFAULT_ANGLES,
    n_radial: int = _DEFAULT_RADIAL,
    c_max: float | None = None,
) -> np.ndarray:
    """Directional radii for a batch of unit directions at one center.

    Bisection on the disk radius c; the inner sup of rho over the disk is
    approximated by the max over ``n_angles`` rays with ``n_radial`` radial
    samples per ray (the endpoint is always included, which is exact for
    convex slices).  After convergence the crossing is re-checked on a 4x
    angular grid and the bisection is redone once if the coarse grid was
    ambiguous.  Relative accuracy ``rel_tol`` in c.
    """
    zeta = np.asarray(zeta, dtype=np.complex128)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.complex128))
    m = dirs.shape[0]
    eps_arr = np.broadcast_to(np.asarray(eps, dtype=np.float64), (m,)).copy()
    if np.any(eps_arr <= 0.0):
        raise BadScale("eps must be positive", eps=np.min(eps_arr))
    if c_max is None:
        c_max = 8.0 * (1.0 + float(np.linalg.norm(zeta)))
    rho0 = float(domain.rho(zeta))

    def sup_on_disk(c, grid):
        lam = c[:, None, None] * grid[None, :, :]
        pts = zeta[None, None, None, :] + lam[..., None] * dirs[:, None, None, :]
        return np.max(domain.rho(pts), axis=(1, 2)) - rho0

    def bisect(grid):
        hi = np.minimum(np.maximum(eps_arr ** (1.0 / domain.type_m), eps_arr), c_max)
        lo = np.zeros(m)
        # grow the bracket until the sup exceeds eps on every direction
        for _ in range(80):
            vals = sup_on_disk(hi, grid)
            need = vals < eps_arr
            if not np.any(need):
                break
            if np.any(need & (hi >= c_max)):
                raise TauBracketFailure(
                    "sup of rho never reached eps within c_max", c_max=c_max
                )
            lo = np.where(need, hi, lo)
            hi = np.where(need, np.minimum(hi * 2.0, c_max), hi)
        else:
            raise TauBracketFailure("bracket growth did not terminate")
        while np.max((hi - lo) / np.maximum(hi, 1e-300)) > rel_tol:
            mid = 0.5 * (lo + hi)
            vals = sup_on_disk(mid, grid)
            below = vals < eps_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    c = bisect(_grid(n_angles, n_radial))
    # ambiguity check on a refined angular grid (one extra vectorized pass)
    fine = _grid(_REFINED_ANGLES, n_radial)
    shift = sup_on_disk(c, fine) - sup_on_disk(c, _grid(n_angles, n_radial))
    if np.any(np.abs(shift) > 0.02 * eps_arr):
        c = bisect(fine)
    return c


def tau(domain: DomainSpec, zeta: np.ndarray, v: np.ndarray, eps: float, **kw) -> float:
    """Directional radius for a single direction (see ``tau_batch``)."""
    v = np.asarray(v, dtype=np.complex128)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise BadScale("direction must be nonzero")
    return float(tau_batch(domain, zeta, (v / nv)[None, :], eps, **kw)[0])


@dataclass(frozen=True)
class ExtremalFrame:
    """Orthonormal frame at (center, scale) with its directional radii.

    ``vectors`` holds the frame row-wise, vectors[0] being the complex normal
    slot; ``radii[i] = tau(center, vectors[i], scale)``.
    """

    center: np.ndarray
    scale: float
    vectors: np.ndarray
    radii: np.ndarray

    def validate(self, tol: float = 1e-10) -> None:
        gram = self.vectors @ np.conj(self.vectors.T)
        if np.max(np.abs(gram - np.eye(self.vectors.shape[0]))) > tol:
            raise ValueError("frame vectors are not orthonormal")
        if np.any(self.radii <= 0.0):
            raise ValueError("frame radii must be positive")

    def coords(self, z: np.ndarray) -> np.ndarray:
        """Frame coordinates lam_k = <z - center, v_k> for a (..., n) batch."""
        z = np.asarray(z, dtype=np.complex128)
        return (z - self.center) @ np.conj(self.vectors.T)


_FRAME_CACHE: OrderedDict = OrderedDict()
_FRAME_CACHE_CAP = 400_000


def _frame_key(domain: DomainSpec, zeta: np.ndarray, eps: float) -> tuple:
    return (id(domain), zeta.tobytes(), float(eps).hex())


def extremal_frame(
    domain: DomainSpec,
    zeta: np.ndarray,
    eps: float,
    *,
    n_sphere: int = 200,
    refine_tol: float = 1e-4,
    use_cache: bool = True,
) -> ExtremalFrame:
    """Greedy extremal frame at (zeta, eps).

    Slot 0 is the complex normal (canonical basis fallback at interior
    critical points of rho, where no normal direction exists).  Each further
    slot minimizes tau over the unit sphere of the remaining orthogonal
    complement: deterministic Fibonacci-lattice sampling (>= ``n_sphere``
    directions) followed by projected coordinate descent to ``refine_tol``
    relative in tau.  tau is phase invariant, so a complex complement of
    dimension 1 needs no search.
    """
    zeta = np.asarray(zeta, dtype=np.complex128)
    if eps <= 0.0:
        raise BadScale("eps must be positive", eps=eps)
    key = _frame_key(domain, zeta, eps)
    if use_cache and key in _FRAME_CACHE:
        _FRAME_CACHE.move_to_end(key)
        return _FRAME_CACHE[key]

    n = domain.dim_n
    try:
        v1 = complex_normal(domain, zeta)
    except DegenerateGradient:
        v1 = np.zeros(n, dtype=np.complex128)
        v1[0] = 1.0
    rows = [v1]

    for _ in range(1, n):
        prev = np.vstack(rows)
        comp = null_space(np.conj(prev))  # (n, r), orthonormal columns
        r = comp.shape[1]
        if r == 1:
            cand = comp[:, 0]
        else:
            local = fibonacci_sphere_directions(max(n_sphere, 8 * r), r)
            ambient = local @ comp.T
            taus = tau_batch(domain, zeta, ambient, eps)
            best = int(np.argmin(taus))
            u = local[best]
            best_tau = float(taus[best])
            step = 0.35
            while step > 1e-3:
                trial = []
                for j in range(r):
                    for delta in (step, -step, 1j * step, -1j * step):
                        t = u.copy()
                        t[j] += delta
                        trial.append(t / np.linalg.norm(t))
                trial = np.asarray(trial)
                t_taus = tau_batch(domain, zeta, trial @ comp.T, eps)
                jbest = int(np.argmin(t_taus))
                if t_taus[jbest] < best_tau * (1.0 - refine_tol):
                    best_tau = float(t_taus[jbest])
                    u = trial[jbest]
                else:
                    step *= 0.5
            cand = u @ comp.T
        # re-orthogonalize against earlier rows to keep the Gram identity tight
        for row in rows:
            cand = cand - np.vdot(row, cand) * row
        rows.append(cand / np.linalg.norm(cand))

    vectors = np.vstack(rows)
    radii = tau_batch(domain, zeta, vectors, eps)
    frame = ExtremalFrame(center=zeta, scale=float(eps), vectors=vectors, radii=radii)
    if use_cache:
        _FRAME_CACHE[key] = frame
        if len(_FRAME_CACHE) > _FRAME_CACHE_CAP:
            _FRAME_CACHE.popitem(last=False)
    return frame


def clear_frame_cache() -> None:
    _FRAME_CACHE.clear()


@dataclass(frozen=True)
class Polydisk:
    """Frame-aligned polydisk with per-slot radii c0 * dilation * tau_i."""

    frame: ExtremalFrame
    dilation: float
    c0: float

    @property
    def slot_radii(self) -> np.ndarray:
        return self.c0 * self.dilation * self.frame.radii

    def ratio(self, z: np.ndarray) -> np.ndarray:
        """max_k |lam_k| / slot_radius_k; membership is ratio <= 1."""
        lam = self.frame.coords(z)
        return np.max(np.abs(lam) / self.slot_radii, axis=-1)

    def contains(self, z: np.ndarray) -> np.ndarray:
        return self.ratio(z) <= 1.0

    def euclidean_radius(self) -> float:
        """Radius of a Euclidean ball around the center containing the polydisk."""
        return float(np.sqrt(np.sum(self.slot_radii**2)))


def polydisk(
    domain: DomainSpec, center: np.ndarray, eps: float, dilation: float = 1.0
) -> Polydisk:
    if dilation <= 0.0:
        raise BadScale("dilation must be positive", dilation=dilation)
    frame = extremal_frame(domain, np.asarray(center, dtype=np.complex128), eps)
    return Polydisk(frame=frame, dilation=float(dilation), c0=domain.c0)


def pseudo_distance_d1(
    domain: DomainSpec,
    zeta: np.ndarray,
    z: np.ndarray,
    *,
    rel_tol: float = 1e-3,
    eps_min: float = 1e-9,
    eps_max: float = 1.0,
) -> float:
    """Polydisk pseudo-distance: smallest eps with z in P_eps(zeta) (A = 1).

    Log-scale bisection over eps; returns ``eps_min`` as a floor when z is
    already inside the smallest polydisk, raises ``out-of-range`` when z is
    outside the largest.
    """
    zeta = np.asarray(zeta, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    if np.array_equal(zeta, z):
        return 0.0

    def member(eps):
        frame = extremal_frame(domain, zeta, eps)
        pd = Polydisk(frame=frame, dilation=1.0, c0=domain.c0)
        return bool(pd.contains(z[None, :])[0])

    if not member(eps_max):
        raise OutOfRange("point outside the largest polydisk", eps_max=eps_max)
    if member(eps_min):
        return eps_min
    lo, hi = np.log(eps_min), np.log(eps_max)
    while hi - lo > np.log1p(rel_tol):
        mid = 0.5 * (lo + hi)
        if member(np.exp(mid)):
            hi = mid
        else:
            lo = mid
    return float(np.exp(0.5 * (lo + hi)))


def pseudo_distance_d(
    domain: DomainSpec,
    zeta: np.ndarray,
    z: np.ndarray,
    *,
    rel_tol: float = 1e-3,
    eps_min: float = 1e-9,
    eps_max: float = 1.0,
) -> float:
    """Pseudo-ball pseudo-distance: smallest eps with |z - zeta| < c0 tau."""
    zeta = np.asarray(zeta, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    sep = np.linalg.norm(z - zeta)
    if sep == 0.0:
        return 0.0
    u = (z - zeta) / sep

    def member(eps):
        return sep < domain.c0 * tau(domain, zeta, u, eps)

    if not member(eps_max):
        raise OutOfRange("point outside the largest pseudo-ball", eps_max=eps_max)
    if member(eps_min):
        return eps_min
    lo, hi = np.log(eps_min), np.log(eps_max)
    while hi - lo > np.log1p(rel_tol):
        mid = 0.5 * (lo + hi)
        if member(np.exp(mid)):
            hi = mid
        else:
            lo = mid
    return float(np.exp(0.5 * (lo + hi)))


def k_weight(domain: DomainSpec, z: np.ndarray, u: np.ndarray) -> float:
    """Anisotropic weight k(z, u) = delta(z) / tau(z, u, delta(z))."""
    z = np.asarray(z, dtype=np.complex128)
    delta = boundary_distance(domain, z)
    return delta / tau(domain, z, u, delta)


def k_weight_dirs(domain: DomainSpec, z: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """k(z, u) for a batch of unit directions at one point."""
    z = np.asarray(z, dtype=np.complex128)
    delta = boundary_distance(domain, z)
    return delta / tau_batch(domain, z, dirs, delta)


def tent_membership(
    domain: DomainSpec, xi: np.ndarray, eps: float, z: np.ndarray
) -> np.ndarray:
    """Indicator of the tent (polydisk at xi intersected with Omega)."""
    frame = extremal_frame(domain, np.asarray(xi, dtype=np.complex128), eps)
    pd = Polydisk(frame=frame, dilation=1.0, c0=domain.c0)
    z = np.asarray(z, dtype=np.complex128)
    return pd.contains(z) & (domain.rho(z) < 0.0)


@dataclass
class GreedyCovering:
    """Result of a greedy polydisk covering of a finite sample set."""

    polydisks: list
    center_indices: np.ndarray
    assignment: np.ndarray  # first covering polydisk per sample, -1 if none
    depths: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return np.array([p.frame.center for p in self.polydisks])

    def multiplicity(self, samples: np.ndarray) -> np.ndarray:
        counts = np.zeros(samples.shape[0], dtype=np.int64)
        for p in self.polydisks:
            counts += p.contains(samples)
        return counts


def greedy_cover(
    domain: DomainSpec,
    samples: np.ndarray,
    *,
    budget: int = 100_000,
    depths: np.ndarray | None = None,
    dilation: float = 1.0,
) -> GreedyCovering:
    """Greedily cover sample points by polydisks P(Z, delta(Z)).

    Repeatedly picks the lowest-index uncovered sample, emits the polydisk at
    its own boundary distance, and marks every sample it contains as covered.
    A kd-tree prefilter keeps each membership pass local.  Exceeding
    ``budget`` polydisks raises ``covering-budget-exceeded`` with the partial
    covering attached.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.complex128))
    m = samples.shape[0]
    if depths is None:
        depths = boundary_distance_batch(domain, samples)
    tree = cKDTree(real_view(samples))
    uncovered = np.ones(m, dtype=bool)
    assignment = np.full(m, -1, dtype=np.int64)
    disks: list[Polydisk] = []
    centers: list[int] = []
    order = np.arange(m)
    ptr = 0
    while True:
        while ptr < m and not uncovered[order[ptr]]:
            ptr += 1
        if ptr >= m:
            break
        if len(disks) >= budget:
            partial = GreedyCovering(
                disks, np.asarray(centers), assignment, np.asarray(depths)
            )
            raise CoveringBudgetExceeded(
                "covering budget exhausted", emitted=len(disks), partial=partial
            )
        idx = int(order[ptr])
        Z = samples[idx]
        pd = polydisk(domain, Z, float(depths[idx]), dilation=dilation)
        cand = tree.query_ball_point(real_view(Z), 1.0001 * pd.euclidean_radius())
        cand = np.asarray(cand, dtype=np.int64)
        inside = pd.contains(samples[cand])
        hit = cand[inside]
        newly = hit[uncovered[hit]]
        assignment[newly] = len(disks)
        uncovered[hit] = False
        disks.append(pd)
        centers.append(idx)
        if not uncovered[idx]:
            continue
        # the emitting sample must be inside its own polydisk
        uncovered[idx] = False
        assignment[idx] = len(disks) - 1
    return GreedyCovering(disks, np.asarray(centers), assignment, np.asarray(depths))


@dataclass(frozen=True)
class BandRegion:
    """A sampling region: real-coordinate box intersected with a depth band."""

    box_lo: np.ndarray  # (2n,) real bounds
    box_hi: np.ndarray
    depth_lo: float
    depth_hi: float
    predicate: Callable[[np.ndarray], np.ndarray] | None = None

    def dyadic_samples(
        self,
        domain: DomainSpec,
        base_spacing: float,
        *,
        max_grid_points: int = 4_000_000,
    ) -> np.ndarray:
        """Dyadic-in-depth sample grid of the region.

        Level l uses grid spacing base_spacing / 2^l and keeps points whose
        boundary distance falls in the dyadic layer (depth_hi 2^-(l+1),
        depth_hi 2^-l]; levels continue until the layer floor drops below
        depth_lo.  Points must be interior and satisfy the predicate.  A level
        whose raw grid would exceed ``max_grid_points`` raises
        ``covering-budget-exceeded``.
        """
        lo = np.asarray(self.box_lo, dtype=np.float64)
        hi = np.asarray(self.box_hi, dtype=np.float64)
        dim = lo.size
        out = []
        level = 0
        layer_hi = self.depth_hi
        while layer_hi > self.depth_lo:
            layer_lo = max(layer_hi / 2.0, self.depth_lo)
            h = base_spacing / 2.0**level
            axes = [np.arange(lo[i] + h / 2.0, hi[i], h) for i in range(dim)]
            count = int(np.prod([a.size for a in axes]))
            if count > max_grid_points:
                raise CoveringBudgetExceeded(
                    "dyadic sample grid too large", level=level, points=count
                )
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([mm.ravel() for mm in mesh], axis=-1)
            z = pts.view(np.complex128).reshape(pts.shape[0], dim // 2)
            keep = domain.rho(z) < 0.0
            if self.predicate is not None:
                keep &= self.predicate(z)
            z = z[keep]
            if z.shape[0]:
                d = boundary_distance_batch(domain, z)
                sel = (d > layer_lo) & (d <= layer_hi)
                if np.any(sel):
                    out.append(z[sel])
            layer_hi = layer_lo
            level += 1
        if not out:
            return np.zeros((0, dim // 2), dtype=np.complex128)
        return np.concatenate(out, axis=0)


def minimal_covering(
    domain: DomainSpec,
    region: BandRegion,
    *,
    base_spacing: float,
    budget: int = 100_000,
) -> GreedyCovering:
    """Greedy covering of a band region from its dyadic sample grid."""
    samples = region.dyadic_samples(domain, base_spacing)
    return greedy_cover(domain, samples, budget=budget)
