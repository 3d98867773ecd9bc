"""Order-zero currents and smooth differential forms on domains in C^n.

Coefficient layouts (all complex valued, per point or per atom):

  degree "0"      1 entry, a scalar weight (a measure when used on atoms).
  degree "1"      n entries w; the form is sum_i w_i dz_i + conj(w_i) dzbar_i,
                  so it is real valued on tangent vectors.  This is the storage
                  convention for real 1-forms; complex forms are handled by
                  splitting into real and imaginary parts.
  degree "(0,1)"  n entries b for sum_i b_i dzbar_i.
  degree "(1,1)"  n*n entries, row major M[i, j] for dz_i wedge dzbar_j.
  degree "2"      n(2n-1) entries in three blocks:
                  (2,0) pairs i<j, then (1,1) row major, then (0,2) pairs i<j.
  degree "3"      blocks (3,0), (2,1), (1,2), (0,3); only SmoothFormField
                  carries degree 3 (needed for wedges of a 1-form with a
                  2-form).

Two evaluation conventions coexist:

  pair_*      the honest alternating evaluation of the form on tangent
              vectors; this is the one exterior calculus (d, wedge, pullback
              integrals) is consistent with.
  slot_pair_* plugs vector components into slots with conjugation fixed per
              block, e.g. T(u1, u2) = sum_{i<j} T0_ij u1_i u2_j
              + sum_ij T1_ij u1_i conj(u2_j) + sum_{i<j} T2_ij conj(u1_i u2_j).
              Norm computations use this convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BadDegree

CURRENT_DEGREES = ("0", "1", "(0,1)", "(1,1)", "2")
FIELD_DEGREES = CURRENT_DEGREES + ("3",)

_REAL_TOL = 1e-9


def _pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def _triples(n: int) -> list[tuple[int, int, int]]:
    return list(combinations(range(n), 3))


_GEN_BASIS_CACHE: dict[tuple[str, int], list[tuple[int, ...]]] = {}


def generator_basis(degree: str, n: int) -> list[tuple[int, ...]]:
    """Ordered basis as tuples of generator ids; id i < n is dz_i, id n+i is
    dzbar_i.  Matches the coefficient layout except for degree "1" whose real
    convention stores only the dz half."""
    key = (degree, n)
    if key not in _GEN_BASIS_CACHE:
        _GEN_BASIS_CACHE[key] = _generator_basis_build(degree, n)
    return _GEN_BASIS_CACHE[key]


def _generator_basis_build(degree: str, n: int) -> list[tuple[int, ...]]:
    if degree == "0":
        return [()]
    if degree == "1":
        return [(i,) for i in range(n)]
    if degree == "(0,1)":
        return [(n + i,) for i in range(n)]
    if degree == "(1,1)":
        return [(i, n + j) for i in range(n) for j in range(n)]
    if degree == "2":
        return (
            [(i, j) for i, j in _pairs(n)]
            + [(i, n + j) for i in range(n) for j in range(n)]
            + [(n + i, n + j) for i, j in _pairs(n)]
        )
    if degree == "3":
        return (
            [t for t in _triples(n)]
            + [(i, j, n + k) for i, j in _pairs(n) for k in range(n)]
            + [(i, n + j, n + k) for i in range(n) for j, k in _pairs(n)]
            + [tuple(n + i for i in t) for t in _triples(n)]
        )
    raise BadDegree(f"unsupported degree {degree!r}", degree=degree)


def coefficient_count(degree: str, n: int) -> int:
    return len(generator_basis(degree, n))


def form_degree(degree: str) -> int:
    return {"0": 0, "1": 1, "(0,1)": 1, "(1,1)": 2, "2": 2, "3": 3}[degree]


_LAYOUT_CACHE: dict[tuple[str, int], dict[tuple[int, ...], int]] = {}


def _layout_index(degree: str, n: int) -> dict[tuple[int, ...], int]:
    key = (degree, n)
    if key not in _LAYOUT_CACHE:
        _LAYOUT_CACHE[key] = {t: i for i, t in enumerate(generator_basis(degree, n))}
    return _LAYOUT_CACHE[key]


def _component(vectors: np.ndarray, gen: int, n: int) -> np.ndarray:
    # generator id < n reads dz_i(v) = v_i; id >= n reads dzbar_i(v) = conj(v_i)
    if gen < n:
        return vectors[..., gen]
    return np.conj(vectors[..., gen - n])


def _expand_generators(degree: str, n: int, coeffs: np.ndarray):
    """Yield (generator tuple, coefficient column) covering the full form.

    Degree "1" expands its implicit conjugate half so calculus sees the whole
    real form.
    """
    basis = generator_basis(degree, n)
    for pos, gens in enumerate(basis):
        yield gens, coeffs[..., pos]
    if degree == "1":
        for i in range(n):
            yield (n + i,), np.conj(coeffs[..., i])


def _sort_with_sign(gens: Sequence[int]) -> tuple[Optional[tuple[int, ...]], int]:
    g = list(gens)
    sign = 1
    for i in range(1, len(g)):
        j = i
        while j > 0 and g[j - 1] > g[j]:
            g[j - 1], g[j] = g[j], g[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(g)):
        if g[i - 1] == g[i]:
            return None, 0
    return tuple(g), sign


def _degree_tag_for(p: int) -> str:
    try:
        return {1: "1", 2: "2", 3: "3"}[p]
    except KeyError:
        raise BadDegree(f"no canonical layout for degree {p}", degree=str(p))


def _collapse_generators(gen_terms: dict, p: int, n: int, shape) -> tuple[str, np.ndarray]:
    """Pack a generator dict into the canonical layout of total degree p.

    Degree-1 results are returned in the real convention; the dzbar half must
    match the conjugate of the dz half (real form check)."""
    tag = _degree_tag_for(p)
    if tag == "1":
        w = np.zeros(shape + (n,), dtype=complex)
        wbar = np.zeros_like(w)
        for gens, col in gen_terms.items():
            if gens[0] < n:
                w[..., gens[0]] += col
            else:
                wbar[..., gens[0] - n] += col
        mism = np.max(np.abs(wbar - np.conj(w))) if w.size else 0.0
        scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        if mism > 1e-6 * scale:
            raise BadDegree(
                "degree-1 result is not a real form; split the input into real "
                "and imaginary parts first",
                mismatch=float(mism),
            )
        return tag, w
    index = _layout_index(tag, n)
    out = np.zeros(shape + (len(index),), dtype=complex)
    for gens, col in gen_terms.items():
        out[..., index[gens]] += col
    return tag, out


# ---------------------------------------------------------------------------
# pairings


def pair_one(degree: str, n: int, coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate a degree-1-family form on one tangent vector."""
    coeffs = np.asarray(coeffs)
    u = np.asarray(u)
    if degree == "1":
        return 2.0 * np.real(np.sum(coeffs * u, axis=-1))
    if degree == "(0,1)":
        return np.sum(coeffs * np.conj(u), axis=-1)
    raise BadDegree(f"pair_one does not apply to degree {degree!r}", degree=degree)


def pair_two(degree: str, n: int, coeffs: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Alternating evaluation of a degree-2-family form on a vector pair."""
    if degree not in ("(1,1)", "2"):
        raise BadDegree(f"pair_two does not apply to degree {degree!r}", degree=degree)
    basis = generator_basis(degree, n)
    coeffs = np.asarray(coeffs)
    out = np.zeros(np.broadcast(coeffs[..., 0], u1[..., 0], u2[..., 0]).shape, dtype=complex)
    for pos, (g1, g2) in enumerate(basis):
        a1, a2 = _component(u1, g1, n), _component(u1, g2, n)
        b1, b2 = _component(u2, g1, n), _component(u2, g2, n)
        out = out + coeffs[..., pos] * (a1 * b2 - b1 * a2)
    return out


def pair_three(n: int, coeffs: np.ndarray, u1, u2, u3) -> np.ndarray:
    """Alternating evaluation of a degree-3 form on a vector triple."""
    basis = generator_basis("3", n)
    coeffs = np.asarray(coeffs)
    out = np.zeros(np.broadcast(coeffs[..., 0], u1[..., 0]).shape, dtype=complex)
    for pos, (g1, g2, g3) in enumerate(basis):
        a = [_component(u1, g, n) for g in (g1, g2, g3)]
        b = [_component(u2, g, n) for g in (g1, g2, g3)]
        c = [_component(u3, g, n) for g in (g1, g2, g3)]
        det = (
            a[0] * (b[1] * c[2] - b[2] * c[1])
            - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
        )
        out = out + coeffs[..., pos] * det
    return out


def slot_pair_two(degree: str, n: int, coeffs: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Slot evaluation T(u1, u2) with per-block conjugation (norm convention)."""
    coeffs = np.asarray(coeffs)
    if degree == "(1,1)":
        m = coeffs.reshape(coeffs.shape[:-1] + (n, n))
        return np.einsum("...ij,...i,...j->...", m, u1, np.conj(u2))
    if degree == "2":
        q = len(_pairs(n))
        t0, t1, t2 = coeffs[..., :q], coeffs[..., q : q + n * n], coeffs[..., q + n * n :]
        m1 = t1.reshape(t1.shape[:-1] + (n, n))
        out = np.einsum("...ij,...i,...j->...", m1, u1, np.conj(u2))
        for pos, (i, j) in enumerate(_pairs(n)):
            out = out + t0[..., pos] * u1[..., i] * u2[..., j]
            out = out + t2[..., pos] * np.conj(u1[..., i]) * np.conj(u2[..., j])
        return out
    raise BadDegree(f"slot_pair_two does not apply to degree {degree!r}", degree=degree)


# ---------------------------------------------------------------------------
# discrete currents


@dataclass(frozen=True)
class DiscreteCurrent:
    """Finite atomic current: weighted point masses with form coefficients."""

    degree: str
    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        if self.degree not in CURRENT_DEGREES:
            raise BadDegree(f"unsupported current degree {self.degree!r}", degree=self.degree)
        pts = np.atleast_2d(np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "points", pts)
        ncoef = coefficient_count(self.degree, pts.shape[1]) if pts.size else 0
        cf = np.asarray(self.coeffs, dtype=complex)
        if cf.ndim == 1:
            cf = cf.reshape(pts.shape[0], -1)
        object.__setattr__(self, "coeffs", cf)
        if pts.size and cf.shape != (pts.shape[0], ncoef):
            raise BadDegree(
                f"coefficient shape {cf.shape} does not match degree {self.degree} "
                f"in C^{pts.shape[1]} (expected {(pts.shape[0], ncoef)})",
                degree=self.degree,
            )
        if cf.size and not np.all(np.isfinite(cf.view(float))):
            raise ValueError("non-finite coefficients")

    @property
    def dim_n(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return 0 if self.coeffs.size == 0 else self.points.shape[0]

    def atom_masses(self) -> np.ndarray:
        # mass of |T| carried by each atom: sum of coefficient magnitudes
        if self.n_atoms == 0:
            return np.zeros(0)
        return np.sum(np.abs(self.coeffs), axis=1)

    def total_mass(self) -> float:
        return float(np.sum(self.atom_masses()))

    def pair(self, u1: np.ndarray, u2: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-atom alternating evaluation on constant vectors (or per-atom rows)."""
        if self.degree == "0":
            return self.coeffs[:, 0].copy()
        if self.degree in ("1", "(0,1)"):
            return pair_one(self.degree, self.dim_n, self.coeffs, np.asarray(u1))
        if u2 is None:
            raise BadDegree("degree-2 pairing needs two vectors", degree=self.degree)
        return pair_two(self.degree, self.dim_n, self.coeffs, np.asarray(u1), np.asarray(u2))

    def slot_pair(self, u1: np.ndarray, u2: Optional[np.ndarray] = None) -> np.ndarray:
        if self.degree in ("1", "(0,1)"):
            return pair_one(self.degree, self.dim_n, self.coeffs, np.asarray(u1))
        if u2 is None:
            raise BadDegree("degree-2 slot pairing needs two vectors", degree=self.degree)
        return slot_pair_two(self.degree, self.dim_n, self.coeffs, np.asarray(u1), np.asarray(u2))

    def scaled(self, a: complex) -> "DiscreteCurrent":
        return replace(self, coeffs=a * self.coeffs)

    def __add__(self, other: "DiscreteCurrent") -> "DiscreteCurrent":
        if other.degree != self.degree:
            raise BadDegree("cannot add currents of different degree", degree=other.degree)
        if self.n_atoms == 0:
            return other
        if other.n_atoms == 0:
            return self
        return DiscreteCurrent(
            self.degree,
            np.vstack([self.points, other.points]),
            np.vstack([self.coeffs, other.coeffs]),
        )

    def restrict(self, mask: np.ndarray) -> "DiscreteCurrent":
        mask = np.asarray(mask, dtype=bool)
        return DiscreteCurrent(self.degree, self.points[mask], self.coeffs[mask])

    def to_json(self) -> dict:
        atoms = []
        for a in range(self.n_atoms):
            z = self.points[a]
            zflat = []
            for c in z:
                zflat.extend([float(c.real), float(c.imag)])
            atoms.append(
                {
                    "z": zflat,
                    "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs[a]],
                }
            )
        return {"degree": self.degree, "atoms": atoms}

    @staticmethod
    def from_json(data: dict) -> "DiscreteCurrent":
        degree = str(data["degree"])
        atoms = data.get("atoms", [])
        if not atoms:
            return DiscreteCurrent(degree, np.zeros((0, 1), dtype=complex), np.zeros((0, 0)))
        pts = []
        cfs = []
        for atom in atoms:
            zf = np.asarray(atom["z"], dtype=float)
            pts.append(zf[0::2] + 1j * zf[1::2])
            cf = np.asarray(atom["coeffs"], dtype=float)
            cfs.append(cf[:, 0] + 1j * cf[:, 1])
        return DiscreteCurrent(degree, np.asarray(pts), np.asarray(cfs))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, indent=1)

    @staticmethod
    def load(path) -> "DiscreteCurrent":
        with open(path) as fh:
            return DiscreteCurrent.from_json(json.load(fh))


def empty_current(degree: str, n: int) -> DiscreteCurrent:
    return DiscreteCurrent(degree, np.zeros((0, n), dtype=complex), np.zeros((0, coefficient_count(degree, n))))


# ---------------------------------------------------------------------------
# smooth fields


@dataclass(frozen=True)
class SmoothFormField:
    """Pointwise-evaluable form: coeff_fn maps (m, n) points to (m, ncoef)."""

    degree: str
    dim_n: int
    coeff_fn: Callable[[np.ndarray], np.ndarray]
    support: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_d: Optional["SmoothFormField"] = None
    # optional euclidean annulus containing the support, as (center, r_lo, r_hi);
    # consumers use it to skip regions and to bound contraction times
    support_hint: Optional[tuple] = field(default=None, compare=False)
    # optional (family, row) handle letting evaluators batch several related
    # fields through family.coeffs_stack(z) -> (m, k, ncoef) in one pass
    eval_group: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.degree not in FIELD_DEGREES:
            raise BadDegree(f"unsupported field degree {self.degree!r}", degree=self.degree)

    @property
    def n_coeffs(self) -> int:
        return coefficient_count(self.degree, self.dim_n)

    def coeffs_at(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        out = np.asarray(self.coeff_fn(z), dtype=complex)
        out = out.reshape(z.shape[0], self.n_coeffs)
        if self.support is not None:
            inside = np.asarray(self.support(z), dtype=bool)
            out = np.where(inside[:, None], out, 0.0)
        return out

    def pair_at(self, z: np.ndarray, u1: np.ndarray, u2: Optional[np.ndarray] = None) -> np.ndarray:
        c = self.coeffs_at(z)
        if self.degree == "0":
            return c[:, 0]
        if self.degree in ("1", "(0,1)"):
            return pair_one(self.degree, self.dim_n, c, np.asarray(u1))
        if self.degree in ("(1,1)", "2"):
            return pair_two(self.degree, self.dim_n, c, np.asarray(u1), np.asarray(u2))
        raise BadDegree("degree-3 pairing takes pair_three on coefficients", degree=self.degree)

    def slot_pair_at(self, z: np.ndarray, u1: np.ndarray, u2: Optional[np.ndarray] = None) -> np.ndarray:
        c = self.coeffs_at(z)
        if self.degree in ("1", "(0,1)"):
            return pair_one(self.degree, self.dim_n, c, np.asarray(u1))
        return slot_pair_two(self.degree, self.dim_n, c, np.asarray(u1), np.asarray(u2))

    def scaled(self, a: complex) -> "SmoothFormField":
        inner = self

        def fn(z):
            return a * inner.coeffs_at(z)

        return SmoothFormField(
            self.degree,
            self.dim_n,
            fn,
            support=None,  # coeffs_at already applied the support mask
            analytic_d=self.analytic_d.scaled(a) if self.analytic_d is not None else None,
            support_hint=self.support_hint,
        )

    def __add__(self, other: "SmoothFormField") -> "SmoothFormField":
        if other.degree != self.degree or other.dim_n != self.dim_n:
            raise BadDegree("cannot add fields of different degree", degree=other.degree)
        a, b = self, other

        def fn(z):
            return a.coeffs_at(z) + b.coeffs_at(z)

        d = None
        if a.analytic_d is not None and b.analytic_d is not None:
            d = a.analytic_d + b.analytic_d
        return SmoothFormField(self.degree, self.dim_n, fn, analytic_d=d, support_hint=None)


def zero_field(degree: str, n: int) -> SmoothFormField:
    ncoef = coefficient_count(degree, n)

    def fn(z):
        return np.zeros((z.shape[0], ncoef), dtype=complex)

    return SmoothFormField(degree, n, fn)


# ---------------------------------------------------------------------------
# exterior calculus


def wedge_coeffs(deg_a: str, ca: np.ndarray, deg_b: str, cb: np.ndarray, n: int):
    """Pointwise wedge product; returns (degree tag, coefficient array)."""
    pa, pb = form_degree(deg_a), form_degree(deg_b)
    shape = np.broadcast(np.asarray(ca)[..., 0], np.asarray(cb)[..., 0]).shape
    terms: dict[tuple[int, ...], np.ndarray] = {}
    for ga, cola in _expand_generators(deg_a, n, np.asarray(ca)):
        for gb, colb in _expand_generators(deg_b, n, np.asarray(cb)):
            gens, sign = _sort_with_sign(ga + gb)
            if gens is None:
                continue
            contrib = sign * cola * colb
            if gens in terms:
                terms[gens] = terms[gens] + contrib
            else:
                terms[gens] = contrib + np.zeros(shape, dtype=complex)
    return _collapse_generators(terms, pa + pb, n, shape)


def wedge_fields(a: SmoothFormField, b: SmoothFormField) -> SmoothFormField:
    n = a.dim_n
    tag, _ = wedge_coeffs(a.degree, np.zeros((1, a.n_coeffs)), b.degree, np.zeros((1, b.n_coeffs)), n)

    def fn(z):
        return wedge_coeffs(a.degree, a.coeffs_at(z), b.degree, b.coeffs_at(z), n)[1]

    return SmoothFormField(tag, n, fn, support_hint=a.support_hint or b.support_hint)


def _wirtinger_columns(coeff_at: Callable, z: np.ndarray, step: float):
    """d/dz_j and d/dzbar_j of every coefficient by central differences.

    Returns arrays of shape (m, n, ncoef)."""
    z = np.atleast_2d(z)
    m, n = z.shape
    dz = []
    dzbar = []
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = step
        fx = (coeff_at(z + e) - coeff_at(z - e)) / (2.0 * step)
        fy = (coeff_at(z + 1j * e) - coeff_at(z - 1j * e)) / (2.0 * step)
        dz.append(0.5 * (fx - 1j * fy))
        dzbar.append(0.5 * (fx + 1j * fy))
    return np.stack(dz, axis=1), np.stack(dzbar, axis=1)


def derivative_coeffs_from_columns(degree: str, n: int, dz: np.ndarray, dzbar: np.ndarray):
    """Assemble d-coefficients from Wirtinger derivative columns.

    dz/dzbar have shape (m, n, ncoef): derivative of every stored coefficient
    along each complex coordinate.  Returns (degree tag, (m, ncoef') array)."""
    ncoef = coefficient_count(degree, n)
    shape = (dz.shape[0],)
    terms: dict[tuple[int, ...], np.ndarray] = {}

    def add(gens_sorted, sign, col):
        key = gens_sorted
        contrib = sign * col
        if key in terms:
            terms[key] = terms[key] + contrib
        else:
            terms[key] = contrib.astype(complex)

    basis_cols = list(_expand_generators(degree, n, np.zeros((1, ncoef))))
    # positions 0..ncoef-1 are stored columns; degree "1" appends the
    # conjugate half: d/dz conj(w) = conj(d/dzbar w)
    for pos, (gens, _) in enumerate(basis_cols):
        if pos < ncoef:
            cols_z = dz[:, :, pos]
            cols_zbar = dzbar[:, :, pos]
        else:
            src = pos - ncoef
            cols_z = np.conj(dzbar[:, :, src])
            cols_zbar = np.conj(dz[:, :, src])
        for j in range(n):
            for gid, col in ((j, cols_z[:, j]), (n + j, cols_zbar[:, j])):
                merged, sign = _sort_with_sign((gid,) + gens)
                if merged is not None:
                    add(merged, sign, col)
    return _collapse_generators(terms, form_degree(degree) + 1, n, shape)


def exterior_derivative_coeffs(fld: SmoothFormField, z: np.ndarray, step: float = 1e-5):
    """Finite-difference d at points z; returns (degree tag, (m, ncoef') array)."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    dz, dzbar = _wirtinger_columns(fld.coeffs_at, z, step)
    return derivative_coeffs_from_columns(fld.degree, fld.dim_n, dz, dzbar)


def exterior_derivative(fld: SmoothFormField, step: float = 1e-5) -> SmoothFormField:
    """d of a field: the recorded analytic derivative if present, else a
    finite-difference closure."""
    if fld.analytic_d is not None:
        return fld.analytic_d
    tag = _degree_tag_for(form_degree(fld.degree) + 1)

    def fn(z):
        return exterior_derivative_coeffs(fld, z, step)[1]

    return SmoothFormField(tag, fld.dim_n, fn, support_hint=fld.support_hint)


def discrete_exterior_derivative(S: DiscreteCurrent, step: float) -> DiscreteCurrent:
    """d of an atomic current by centered atom translations.

    Each atom splits into 4n shifted copies carrying the central-difference
    weights, wedged into the next degree.  Because translations commute, a
    centered finite-difference d at the same step annihilates the result
    exactly; mollification commutes with the construction.
    """
    if S.n_atoms == 0:
        return empty_current(_degree_tag_for(form_degree(S.degree) + 1), S.dim_n)
    n = S.dim_n
    m = S.n_atoms
    ncoef = S.coeffs.shape[1]
    pts_out = []
    coeffs_out = []
    out_tag = None
    # evaluating the mollified current at z + shift equals placing the atom at
    # z_a - shift, hence the sign flip between sample shift and atom shift
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        for shift, wz, wzb in (
            (step * e, 0.25 / step, 0.25 / step),
            (-step * e, -0.25 / step, -0.25 / step),
            (1j * step * e, -0.25j / step, 0.25j / step),
            (-1j * step * e, 0.25j / step, -0.25j / step),
        ):
            dz = np.zeros((m, n, ncoef), dtype=complex)
            dzbar = np.zeros((m, n, ncoef), dtype=complex)
            dz[:, j, :] = wz * S.coeffs
            dzbar[:, j, :] = wzb * S.coeffs
            out_tag, rows = derivative_coeffs_from_columns(S.degree, n, dz, dzbar)
            pts_out.append(S.points - shift[None, :])
            coeffs_out.append(rows)
    return DiscreteCurrent(out_tag, np.vstack(pts_out), np.vstack(coeffs_out))


# ---------------------------------------------------------------------------
# sampling smooth fields into atoms

_GAUSS_1D = {
    1: (np.array([0.0]), np.array([2.0])),
    2: (np.array([-1.0, 1.0]) / np.sqrt(3.0), np.array([1.0, 1.0])),
    3: (
        np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)]),
        np.array([5.0, 8.0, 5.0]) / 9.0,
    ),
}


def atomize_field(
    fld: SmoothFormField,
    box_lo: np.ndarray,
    box_hi: np.ndarray,
    spacing: float,
    gauss_order: int = 1,
    keep_tol: float = 0.0,
) -> DiscreteCurrent:
    """Quadrature atomization: one atom per grid cell, coefficient = the
    Gauss-cell integral of the field coefficients over the cell.

    The box is in the 2n real coordinates; cells of side `spacing`."""
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    dim = box_lo.size
    n = dim // 2
    counts = np.maximum(1, np.ceil((box_hi - box_lo) / spacing).astype(int))
    axes = [box_lo[d] + spacing * (np.arange(counts[d]) + 0.5) for d in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)

    nodes_1d, w_1d = _GAUSS_1D[gauss_order]
    offs = np.meshgrid(*([nodes_1d * spacing / 2.0] * dim), indexing="ij")
    offsets = np.stack([o.ravel() for o in offs], axis=1)
    wts = np.meshgrid(*([w_1d * spacing / 2.0] * dim), indexing="ij")
    weights = np.prod(np.stack([w.ravel() for w in wts], axis=1), axis=1)

    acc = np.zeros((centers.shape[0], fld.n_coeffs), dtype=complex)
    for off, w in zip(offsets, weights):
        pts_r = centers + off
        pts = pts_r[:, 0::2] + 1j * pts_r[:, 1::2]
        acc += w * fld.coeffs_at(pts)
    z_atoms = centers[:, 0::2] + 1j * centers[:, 1::2]
    mass = np.sum(np.abs(acc), axis=1)
    keep = mass > keep_tol * max(mass.max(initial=0.0), 1e-300)
    if fld.degree == "3":
        raise BadDegree("atomization of degree-3 fields is not supported", degree="3")
    return DiscreteCurrent(fld.degree, z_atoms[keep], acc[keep])
