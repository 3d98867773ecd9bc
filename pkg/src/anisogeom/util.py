"""Small numeric helpers shared across modules.

Complex points in C^n double as points of R^{2n}; ``re_inner`` is the real
inner product in that identification.  The smooth profiles here are the C-inf
building blocks for every bump, ramp and dyadic partition in the package.
"""

from __future__ import annotations

import zlib

import numpy as np


def re_inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Real R^{2n} inner product of complex-encoded vectors (last axis)."""
    return np.real(np.sum(a * np.conj(b), axis=-1))


def cnorm(a: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis."""
    return np.linalg.norm(a, axis=-1)


def unitize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def real_view(z: np.ndarray) -> np.ndarray:
    """View (..., n) complex as (..., 2n) float, interleaved re/im."""
    z = np.ascontiguousarray(z, dtype=np.complex128)
    return z.view(np.float64).reshape(*z.shape[:-1], 2 * z.shape[-1])


def complex_view(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    return x.view(np.complex128).reshape(*x.shape[:-1], x.shape[-1] // 2)


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing between."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    out[x >= 1.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        xm = x[mid]
        a = np.exp(-1.0 / xm)
        b = np.exp(-1.0 / (1.0 - xm))
        out[mid] = a / (a + b)
    return out


def smooth_step_d(x: np.ndarray) -> np.ndarray:
    """Derivative of smooth_step; vanishes outside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        xm = x[mid]
        a = np.exp(-1.0 / xm)
        b = np.exp(-1.0 / (1.0 - xm))
        out[mid] = a * b * (1.0 / xm**2 + 1.0 / (1.0 - xm) ** 2) / (a + b) ** 2
    return out


def smooth_bump_unit(r: np.ndarray) -> np.ndarray:
    """Radial C-infinity bump: positive for r < 1, identically 0 for r >= 1."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    if np.any(inside):
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def ramp_down(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """1 for x <= lo, 0 for x >= hi, smooth in between."""
    return 1.0 - smooth_step((np.asarray(x, dtype=np.float64) - lo) / (hi - lo))


def dyadic_time_nodes(t0: float, u_floor: float = 2.0**-16, n_target: int = 64):
    """Gauss nodes/weights for int_{t0}^{1} f(t) dt on panels dyadic in u = 1-t.

    Panel edges sit exactly at u = 2^{-k}, which keeps any integrand built from
    a dyadic partition of unity in u smooth on each panel.  The tail (0, u_floor)
    is truncated; callers account for the O(u_floor) bias.  Returns (t, w).
    """
    if not 0.0 <= t0 < 1.0:
        raise ValueError("t0 must lie in [0, 1)")
    u_hi = 1.0 - t0
    edges = [u_hi]
    k = 0
    while 2.0**-k >= u_hi:
        k += 1
    while 2.0**-k > u_floor:
        edges.append(2.0**-k)
        k += 1
    edges.append(max(u_floor, 2.0**-k))
    n_panels = len(edges) - 1
    g = max(2, int(round(n_target / max(n_panels, 1))))
    gx, gw = np.polynomial.legendre.leggauss(g)
    ts, ws = [], []
    for a, b in zip(edges[1:], edges[:-1]):
        if b <= a:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        u = mid + half * gx
        ts.append(1.0 - u)
        ws.append(half * gw)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    order = np.argsort(t)
    return t[order], w[order]


def stable_seed(master: int, *tags) -> np.random.SeedSequence:
    """Derive a named SeedSequence from a master seed and hashable tags.

    The derivation is documented and stable across runs: each tag contributes
    crc32 of its repr.  Identical (master, tags) always yields the same stream.
    """
    words = [int(master) & 0xFFFFFFFF]
    for t in tags:
        words.append(zlib.crc32(repr(t).encode("utf-8")) & 0xFFFFFFFF)
    return np.random.SeedSequence(words)


def rng_for(master: int, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stable_seed(master, *tags)))
