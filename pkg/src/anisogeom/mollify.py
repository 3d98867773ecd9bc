"""Bump-kernel regularization of atomic currents into smooth form fields.

The kernel is a radial bump supported in {|z| < 1/2}, rescaled to eps and
normalized to unit integral over R^{2n}.  Convolution against an atomic
current is an exact finite sum over atoms; the derivative of the kernel is
analytic, so the regularized field carries an exact exterior derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.spatial import cKDTree
from scipy.special import gamma

from .currents import (
    DiscreteCurrent,
    SmoothFormField,
    derivative_coeffs_from_columns,
    form_degree,
    _degree_tag_for,
)
from .util import real_view


def _default_profile(r: np.ndarray) -> np.ndarray:
    """exp(-1/(1-(2r)^2)) on r < 1/2, zero beyond; peak value e^-1 at 0."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = np.abs(r) < 0.5
    if np.any(inside):
        x = 2.0 * r[inside]
        out[inside] = np.exp(-1.0 / (1.0 - x * x))
    return out


def _default_profile_deriv(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = np.abs(r) < 0.5
    if np.any(inside):
        x = 2.0 * r[inside]
        one = 1.0 - x * x
        out[inside] = np.exp(-1.0 / one) * (-2.0 * x / one**2) * 2.0
    return out


def _sphere_area(d: int) -> float:
    # surface area of the unit sphere in R^d
    return float(2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0))


@dataclass(frozen=True)
class Mollifier:
    """Radial unit-mass kernel on C^n with support {|z| < 1/2} before scaling."""

    eps: float
    dim_n: int
    profile: Callable = _default_profile
    profile_deriv: Optional[Callable] = _default_profile_deriv
    norm_const: float = field(init=False)

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("mollifier scale must be positive")
        d = 2 * self.dim_n
        integral, err = quad(lambda r: self.profile(np.array([r]))[0] * r ** (d - 1), 0.0, 0.5, epsabs=1e-14, epsrel=1e-12)
        total = _sphere_area(d) * integral
        if not np.isfinite(total) or total <= 0.0 or err * _sphere_area(d) > 1e-9:
            raise ValueError("profile normalization failed")
        object.__setattr__(self, "norm_const", 1.0 / total)

    def phi(self, r: np.ndarray) -> np.ndarray:
        """Normalized unit-scale kernel as a function of the radius |z|."""
        return self.norm_const * self.profile(r)

    def phi_eps_radial(self, r: np.ndarray) -> np.ndarray:
        """phi_eps(|z|) = eps^{-2n} phi(|z|/eps)."""
        return self.eps ** (-2 * self.dim_n) * self.phi(np.asarray(r) / self.eps)

    def phi_eps(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        return self.phi_eps_radial(np.linalg.norm(z, axis=-1))

    def radial_ds(self, s: np.ndarray) -> np.ndarray:
        """d/ds of phi_eps written as a function of s = |z|^2.

        Used for Wirtinger derivatives: d phi_eps/dz_i = radial_ds(s) * conj(z_i)."""
        if self.profile_deriv is None:
            raise ValueError("profile derivative not provided")
        s = np.asarray(s, dtype=np.float64)
        r = np.sqrt(np.maximum(s, 0.0))
        out = np.zeros_like(s)
        pos = r > 0.0
        if np.any(pos):
            dp = self.norm_const * self.profile_deriv(r[pos] / self.eps) / self.eps
            out[pos] = self.eps ** (-2 * self.dim_n) * dp / (2.0 * r[pos])
        return out

    def support_radius(self) -> float:
        return 0.5 * self.eps


def mollify_current(
    T: DiscreteCurrent,
    m: Mollifier,
    region: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> SmoothFormField:
    """Convolve an atomic current with the scaled kernel.

    Coefficients are exact atom sums z -> sum_a phi_eps(z_a - z) coeff_a; the
    optional region predicate restricts the support (the shrunken target of
    the regularization propositions).  The returned field carries an analytic
    exterior derivative built from the kernel gradient."""
    if T.dim_n != m.dim_n:
        raise ValueError(f"current in C^{T.dim_n} but mollifier built for C^{m.dim_n}")
    n = T.dim_n
    pts = T.points
    coeffs = T.coeffs
    rad = m.support_radius()
    tree = cKDTree(real_view(pts)) if T.n_atoms else None

    def _neighbor_sums(z2, want_grad):
        mq = z2.shape[0]
        ncoef = coeffs.shape[1]
        vals = np.zeros((mq, ncoef), dtype=complex)
        dz = np.zeros((mq, n, ncoef), dtype=complex) if want_grad else None
        dzbar = np.zeros((mq, n, ncoef), dtype=complex) if want_grad else None
        if tree is None:
            return vals, dz, dzbar
        hits = tree.query_ball_point(real_view(z2), rad * (1.0 + 1e-12))
        for row, idx in enumerate(hits):
            if not idx:
                continue
            w = pts[idx] - z2[row]
            r = np.linalg.norm(w, axis=1)
            if not want_grad:
                vals[row] = m.phi_eps_radial(r) @ coeffs[idx]
                continue
            common = m.radial_ds(r * r)
            # d/dz_i phi_eps(z_a - z) = -radial_ds(s) * conj(w_i), w = z_a - z
            dz[row] = np.einsum("a,ai,ac->ic", common, -np.conj(w), coeffs[idx])
            dzbar[row] = np.einsum("a,ai,ac->ic", common, -w, coeffs[idx])
            vals[row] = m.phi_eps_radial(r) @ coeffs[idx]
        return vals, dz, dzbar

    def coeff_fn(z):
        z2 = np.atleast_2d(np.asarray(z, dtype=complex))
        return _neighbor_sums(z2, want_grad=False)[0]

    hint = None
    if T.n_atoms:
        rmin = pts.view(float).reshape(T.n_atoms, 2 * n).min(axis=0)
        rmax = pts.view(float).reshape(T.n_atoms, 2 * n).max(axis=0)
        mid = 0.5 * (rmin + rmax)
        center = mid[0::2] + 1j * mid[1::2]
        radius = 0.5 * float(np.linalg.norm(rmax - rmin)) + rad
        hint = (center, 0.0, radius)

    analytic_d = None
    if form_degree(T.degree) + 1 <= 3:
        out_tag = _degree_tag_for(form_degree(T.degree) + 1)

        def d_fn(z):
            z2 = np.atleast_2d(np.asarray(z, dtype=complex))
            _, dz, dzbar = _neighbor_sums(z2, want_grad=True)
            return derivative_coeffs_from_columns(T.degree, n, dz, dzbar)[1]

        analytic_d = SmoothFormField(out_tag, n, d_fn, support=region, support_hint=hint)

    return SmoothFormField(
        T.degree, n, coeff_fn, support=region, analytic_d=analytic_d, support_hint=hint
    )


def shrunken_support(domain, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Predicate for the eps-shrunken region {boundary distance > eps}."""
    from .domains import boundary_distance_batch

    def pred(z):
        z2 = np.atleast_2d(np.asarray(z, dtype=complex))
        return boundary_distance_batch(domain, z2) > eps

    return pred
