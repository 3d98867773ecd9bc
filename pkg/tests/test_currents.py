import numpy as np
import pytest

from anisogeom.currents import (
    DiscreteCurrent,
    SmoothFormField,
    atomize_field,
    coefficient_count,
    empty_current,
    exterior_derivative,
    exterior_derivative_coeffs,
    generator_basis,
    pair_one,
    pair_three,
    pair_two,
    slot_pair_two,
    wedge_coeffs,
    wedge_fields,
    zero_field,
)
from anisogeom.errors import BadDegree


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


class TestLayouts:
    @pytest.mark.parametrize(
        "degree,n,count",
        [
            ("0", 2, 1),
            ("1", 2, 2),
            ("(0,1)", 2, 2),
            ("(1,1)", 2, 4),
            ("2", 2, 6),
            ("3", 2, 4),
            ("2", 3, 15),
            ("3", 3, 20),
        ],
    )
    def test_counts(self, degree, n, count):
        assert coefficient_count(degree, n) == count
        assert len(generator_basis(degree, n)) == count

    def test_degree2_block_order(self):
        # (2,0) pairs, then (1,1) row major, then (0,2) pairs
        basis = generator_basis("2", 2)
        assert basis[0] == (0, 1)
        assert basis[1:5] == [(0, 2), (0, 3), (1, 2), (1, 3)]
        assert basis[5] == (2, 3)

    def test_unknown_degree(self):
        with pytest.raises(BadDegree):
            coefficient_count("(2,0)", 2)


class TestPairings:
    def test_degree1_real_valued(self, rng):
        w = crandn(rng, 6, 2)
        u = crandn(rng, 2)
        vals = pair_one("1", 2, w, u)
        assert vals.dtype.kind == "f"
        assert np.allclose(vals, 2 * np.real(w @ u))

    def test_01_pairing(self, rng):
        b = crandn(rng, 3, 2)
        u = crandn(rng, 2)
        assert np.allclose(pair_one("(0,1)", 2, b, u), b @ np.conj(u))

    def test_alternating_swap(self, rng):
        c = crandn(rng, 4, 6)
        u, v = crandn(rng, 2), crandn(rng, 2)
        assert np.allclose(pair_two("2", 2, c, u, v), -pair_two("2", 2, c, v, u))
        assert np.allclose(pair_two("2", 2, c, u, u), 0.0)

    def test_11_slot_vs_alternating(self, rng):
        # alternating value subtracts the swapped slot value
        m = crandn(rng, 1, 4)
        u, v = crandn(rng, 2), crandn(rng, 2)
        alt = pair_two("(1,1)", 2, m, u, v)
        slot_uv = slot_pair_two("(1,1)", 2, m, u, v)
        slot_vu = slot_pair_two("(1,1)", 2, m, v, u)
        assert np.allclose(alt, slot_uv - slot_vu)

    def test_wedge_pair_product_rule(self, rng):
        ca, cb = crandn(rng, 5, 2), crandn(rng, 5, 2)
        u, v = crandn(rng, 2), crandn(rng, 2)
        tag, ab = wedge_coeffs("1", ca, "1", cb, 2)
        assert tag == "2"
        lhs = pair_two("2", 2, ab, u, v)
        rhs = pair_one("1", 2, ca, u) * pair_one("1", 2, cb, v) - pair_one(
            "1", 2, ca, v
        ) * pair_one("1", 2, cb, u)
        assert np.allclose(lhs, rhs)

    def test_triple_wedge_determinant(self, rng):
        ca, cb, cc = (crandn(rng, 3, 2) for _ in range(3))
        _, ab = wedge_coeffs("1", ca, "1", cb, 2)
        tag, abc = wedge_coeffs("2", ab, "1", cc, 2)
        assert tag == "3"
        u1, u2, u3 = (crandn(rng, 2) for _ in range(3))
        rows = [
            [pair_one("1", 2, c, u) for c in (ca, cb, cc)]
            for u in (u1, u2, u3)
        ]
        det = np.zeros(3, dtype=complex)
        import itertools

        for perm in itertools.permutations(range(3)):
            sgn = (-1) ** sum(
                1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j]
            )
            det = det + sgn * rows[0][perm[0]] * rows[1][perm[1]] * rows[2][perm[2]]
        assert np.allclose(pair_three(2, abc, u1, u2, u3), det)


class TestExteriorDerivative:
    def test_gradient_of_gaussian(self, rng):
        a = np.array([0.3, -0.1 + 0.2j])

        def fn(z):
            return np.exp(-np.sum(np.abs(z - a) ** 2, axis=1))[:, None].astype(complex)

        psi = SmoothFormField("0", 2, fn)
        z = crandn(rng, 8, 2) * 0.3
        d = exterior_derivative(psi, step=1e-5)
        assert d.degree == "1"
        exact = -np.conj(z - a) * fn(z)
        assert np.max(np.abs(d.coeffs_at(z) - exact)) < 1e-9

    def test_dd_is_zero(self, rng):
        def fn(z):
            return np.stack(
                [z[:, 0] ** 2 + 2 * np.conj(z[:, 1]), z[:, 0] * z[:, 1]], axis=1
            )

        eta = SmoothFormField("1", 2, fn)
        z = crandn(rng, 6, 2) * 0.4
        d1 = exterior_derivative(eta, step=1e-5)
        tag, dd = exterior_derivative_coeffs(d1, z, step=1e-4)
        assert tag == "3"
        assert np.max(np.abs(dd)) < 1e-6

    def test_analytic_d_preferred(self):
        marker = zero_field("2", 2)
        fld = SmoothFormField("1", 2, lambda z: np.ones((z.shape[0], 2), dtype=complex), analytic_d=marker)
        assert exterior_derivative(fld) is marker

    def test_leibniz_rule(self, rng):
        # d(f eta) = df ^ eta + f d eta for scalar f and 1-form eta
        def f_fn(z):
            return np.real(z[:, 0] * np.conj(z[:, 0]))[:, None].astype(complex)

        def eta_fn(z):
            return np.stack([z[:, 1] ** 2, np.conj(z[:, 0])], axis=1)

        f = SmoothFormField("0", 2, f_fn)
        eta = SmoothFormField("1", 2, eta_fn)

        def feta_fn(z):
            return f_fn(z) * eta_fn(z)

        # f eta is not a real form unless eta is; use real eta coefficients trick:
        # verify on the generator expansion via pairing values instead
        z = crandn(rng, 4, 2) * 0.3
        u, v = crandn(rng, 2), crandn(rng, 2)
        feta = SmoothFormField("1", 2, feta_fn)
        lhs = exterior_derivative_coeffs(feta, z, step=1e-5)[1]
        df = exterior_derivative(f, step=1e-5)
        _, dfeta = wedge_coeffs("1", df.coeffs_at(z), "1", eta.coeffs_at(z), 2)
        deta = exterior_derivative_coeffs(eta, z, step=1e-5)[1]
        rhs = dfeta + f_fn(z) * deta
        assert np.allclose(pair_two("2", 2, lhs, u, v), pair_two("2", 2, rhs, u, v), atol=1e-7)


class TestDiscreteCurrent:
    def test_mass_and_scaling(self, rng):
        pts = crandn(rng, 5, 2) * 0.2
        coeffs = crandn(rng, 5, 6)
        cur = DiscreteCurrent("2", pts, coeffs)
        assert cur.total_mass() == pytest.approx(np.sum(np.abs(coeffs)))
        assert cur.scaled(2.0).total_mass() == pytest.approx(2 * cur.total_mass())

    def test_add_and_restrict(self, rng):
        a = DiscreteCurrent("1", crandn(rng, 3, 2), crandn(rng, 3, 2))
        b = DiscreteCurrent("1", crandn(rng, 2, 2), crandn(rng, 2, 2))
        c = a + b
        assert c.n_atoms == 5
        assert c.restrict(np.array([1, 0, 0, 0, 1], dtype=bool)).n_atoms == 2

    def test_degree_mismatch(self, rng):
        with pytest.raises(BadDegree):
            DiscreteCurrent("(1,1)", crandn(rng, 2, 2), crandn(rng, 2, 6))

    def test_empty(self):
        cur = empty_current("(1,1)", 2)
        assert cur.n_atoms == 0
        assert cur.total_mass() == 0.0

    def test_json_roundtrip(self, rng, tmp_path):
        cur = DiscreteCurrent("(1,1)", crandn(rng, 4, 2), crandn(rng, 4, 4))
        path = tmp_path / "cur.json"
        cur.save(path)
        back = DiscreteCurrent.load(path)
        assert back.degree == cur.degree
        assert np.allclose(back.points, cur.points)
        assert np.allclose(back.coeffs, cur.coeffs)


class TestFieldsAndAtomization:
    def test_support_masking(self):
        fld = SmoothFormField(
            "0",
            2,
            lambda z: np.ones((z.shape[0], 1), dtype=complex),
            support=lambda z: np.abs(z[:, 0]) < 0.5,
        )
        z = np.array([[0.1, 0.0], [0.9, 0.0]], dtype=complex)
        vals = fld.coeffs_at(z)
        assert vals[0, 0] == 1.0 and vals[1, 0] == 0.0

    def test_field_algebra(self, rng):
        f1 = SmoothFormField("1", 2, lambda z: np.stack([z[:, 0], z[:, 1]], axis=1))
        f2 = f1.scaled(2.0)
        z = crandn(rng, 3, 2)
        assert np.allclose((f1 + f2).coeffs_at(z), 3 * f1.coeffs_at(z))

    def test_wedge_fields_degree(self):
        one = SmoothFormField("1", 2, lambda z: np.ones((z.shape[0], 2), dtype=complex))
        two = zero_field("2", 2)
        assert wedge_fields(one, two).degree == "3"

    def test_atomize_bump_mass(self):
        # compactly supported bump: atom mass converges to the true integral
        def fn(z):
            r2 = np.sum(np.abs(z) ** 2, axis=1) / 0.36
            out = np.zeros(z.shape[0], dtype=complex)
            inside = r2 < 1.0
            out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
            return out[:, None]

        fld = SmoothFormField("0", 2, fn)
        masses = []
        for h in (0.15, 0.075):
            cur = atomize_field(fld, [-0.65] * 4, [0.65] * 4, h, gauss_order=2, keep_tol=1e-14)
            masses.append(cur.total_mass())
        assert masses[1] == pytest.approx(masses[0], rel=5e-3)
