"""Deterministic sample generators: low-discrepancy sequences, spheres, disks.

All randomized generators take an explicit seed; repeated calls with the same
arguments produce identical arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm as _norm
from scipy.stats import qmc

from .util import stable_seed


def _gen(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def halton_unit(n_points: int, dim: int, seed: int, *tags) -> np.ndarray:
    """Scrambled Halton points in [0, 1)^dim, deterministic per (seed, tags)."""
    eng = qmc.Halton(d=dim, scramble=True, seed=_gen(stable_seed(seed, "halton", *tags)))
    return eng.random(n_points)


def sobol_unit(n_points: int, dim: int, seed: int, *tags) -> np.ndarray:
    """Scrambled Sobol points in [0, 1)^dim; n_points need not be a power of 2."""
    eng = qmc.Sobol(d=dim, scramble=True, seed=_gen(stable_seed(seed, "sobol", *tags)))
    m = int(np.ceil(np.log2(max(n_points, 1))))
    pts = eng.random(2**m)
    return pts[:n_points]


def kronecker_lattice(n_points: int, dim: int) -> np.ndarray:
    """Unseeded generalized-Fibonacci (Kronecker) lattice in [0, 1)^dim.

    Uses the R_d sequence built from the plastic-constant generalization of
    the golden ratio; fully deterministic, no RNG involved.
    """
    # smallest root > 1 of x^(d+1) = x + 1
    d = dim
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    alpha = np.array([phi ** -(j + 1) for j in range(d)])
    i = np.arange(1, n_points + 1)[:, None]
    return np.mod(0.5 + i * alpha[None, :], 1.0)


def _unit_to_complex_sphere(u: np.ndarray, cdim: int) -> np.ndarray:
    """Map [0,1)^{2*cdim} points to the unit sphere of C^cdim via Gaussians."""
    g = _norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    z = g[:, :cdim] + 1j * g[:, cdim:]
    nrm = np.linalg.norm(z, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    return z / nrm


def sphere_directions(n_points: int, cdim: int, seed: int, *tags) -> np.ndarray:
    """Quasi-uniform unit vectors in C^cdim (seeded, deterministic)."""
    u = halton_unit(n_points, 2 * cdim, seed, "sphere", *tags)
    return _unit_to_complex_sphere(u, cdim)


def fibonacci_sphere_directions(n_points: int, cdim: int) -> np.ndarray:
    """Unseeded deterministic quasi-uniform unit vectors in C^cdim."""
    u = kronecker_lattice(n_points, 2 * cdim)
    return _unit_to_complex_sphere(u, cdim)


def unit_polydisk_points(n_points: int, cdim: int, seed: int, *tags) -> np.ndarray:
    """Low-discrepancy points of the unit polydisk D^cdim in C^cdim.

    Each complex coordinate is an area-uniform point of the unit disk obtained
    from a scrambled Sobol pair via r = sqrt(u), angle = 2 pi v.
    """
    u = sobol_unit(n_points, 2 * cdim, seed, "polydisk", *tags)
    r = np.sqrt(u[:, :cdim])
    th = 2.0 * np.pi * u[:, cdim:]
    return r * np.exp(1j * th)


def disk_points_uniform(n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Plain-MC area-uniform points of the unit disk."""
    r = np.sqrt(rng.random(n_points))
    th = 2.0 * np.pi * rng.random(n_points)
    return r * np.exp(1j * th)
