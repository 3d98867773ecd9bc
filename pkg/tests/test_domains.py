import json

import numpy as np
import pytest

from anisogeom import (
    approx_boundary_distance,
    boundary_distance,
    boundary_distance_batch,
    builtin_domain,
    complex_normal,
    domain_from_json,
    project_to_boundary,
    shrunken_domain,
)
from anisogeom.errors import (
    DegenerateGradient,
    EpsilonTooLarge,
    PointNotInterior,
    UnknownDomain,
)

from conftest import band_points


class TestBuiltins:
    def test_ball_values(self, ball):
        z = np.array([0.5, 0.5j])
        assert ball.rho(z) == pytest.approx(-0.5)
        assert ball.dim_n == 2 and ball.type_m == 2

    def test_ellipsoid_type(self, ellipsoid):
        assert ellipsoid.type_m == 4
        z = np.array([0.0, 0.5])
        assert ellipsoid.rho(z) == pytest.approx(0.5**4 - 1.0)

    def test_default_constants(self, ball):
        assert (ball.eta0, ball.c0, ball.delta1, ball.eps0) == (0.1, 0.1, 0.05, 0.05)

    def test_unknown_name(self):
        with pytest.raises(UnknownDomain) as e:
            builtin_domain("torus")
        assert e.value.code == "unknown-domain"

    def test_bad_constants_rejected(self):
        with pytest.raises(ValueError):
            builtin_domain("ball", c0=1.5)

    def test_json_round_trip(self, ellipsoid):
        text = ellipsoid.to_json()
        data = json.loads(text)
        assert data["name"] == "ellipsoid" and data["params"] == [1, 2]
        again = domain_from_json(text)
        assert again.type_m == ellipsoid.type_m
        assert again.constants_dict() == ellipsoid.constants_dict()

    @pytest.mark.parametrize("name,params", [("ball", (2,)), ("ellipsoid", (1, 2))])
    def test_gradient_consistency(self, name, params):
        # central finite differences of rho against 2*conj(grad_rho)
        dom = builtin_domain(name, params)
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(20):
            z = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.4
            g = dom.real_gradient(z)
            for j in range(2):
                for delta in (h, 1j * h):
                    e = np.zeros(2, dtype=complex)
                    e[j] = delta
                    fd = (dom.rho(z + e) - dom.rho(z - e)) / (2.0 * h)
                    exact = np.real(g[j] * np.conj(delta / h))
                    assert fd == pytest.approx(exact, abs=1e-6)


class TestDistance:
    def test_ball_closed_form(self, ball):
        rng = np.random.default_rng(3)
        for _ in range(10):
            u = rng.normal(size=2) + 1j * rng.normal(size=2)
            z = u / np.linalg.norm(u) * (0.2 + 0.7 * rng.random())
            d = boundary_distance(ball, z)
            assert d == pytest.approx(1.0 - np.linalg.norm(z), rel=1e-10)

    def test_ellipsoid_axis_point(self, ellipsoid):
        # dense boundary-mesh minimum for (0.9, 0) is exactly 0.1
        assert boundary_distance(ellipsoid, np.array([0.9, 0.0])) == pytest.approx(
            0.1, abs=1e-8
        )

    def test_ellipsoid_mesh_oracle(self, ellipsoid):
        # off-axis point, oracle = min distance over a dense boundary mesh
        z = np.array([0.4 + 0.2j, 0.55 - 0.1j])
        d = boundary_distance(ellipsoid, z)
        s = np.linspace(0.0, 1.0, 1200)
        th = np.linspace(0.0, 2.0 * np.pi, 600, endpoint=False)
        ph = np.linspace(0.0, 2.0 * np.pi, 600, endpoint=False)
        r1 = np.sqrt(np.maximum(1.0 - s**4, 0.0))
        best = np.inf
        for si, r1i in zip(s, r1):
            w1 = r1i * np.exp(1j * th)[:, None]
            w2 = si * np.exp(1j * ph)[None, :]
            d2 = np.abs(w1 - z[0]) ** 2 + np.abs(w2 - z[1]) ** 2
            best = min(best, d2.min())
        assert d == pytest.approx(np.sqrt(best), abs=5e-3)
        assert d <= np.sqrt(best) + 1e-9

    def test_projection_lands_on_boundary(self, ellipsoid):
        z = np.array([0.0, 0.5])
        w = project_to_boundary(ellipsoid, z)
        assert abs(ellipsoid.rho(w)) < 1e-9
        assert np.linalg.norm(w - z) == pytest.approx(
            boundary_distance(ellipsoid, z), rel=1e-9
        )
        # brute-force nearest point for (0, 0.5) is (0, 1)
        assert np.allclose(w, np.array([0.0, 1.0]), atol=1e-6)

    def test_center_of_ball(self, ball):
        # rho has a critical point at the center; the probe fallback handles it
        assert boundary_distance(ball, np.zeros(2, dtype=complex)) == pytest.approx(1.0)

    def test_exterior_rejected(self, ball):
        with pytest.raises(PointNotInterior) as e:
            boundary_distance(ball, np.array([1.2, 0.0]))
        assert e.value.code == "point-not-interior"

    def test_batch_matches_scalar(self, ellipsoid):
        pts = band_points(ellipsoid, 12, seed=11)
        batch = boundary_distance_batch(ellipsoid, pts)
        for z, d in zip(pts, batch):
            assert d == pytest.approx(boundary_distance(ellipsoid, z), rel=1e-9)

    def test_comparability_with_rho(self, ball, ellipsoid):
        # c * delta <= -rho <= C * delta on the band; ball has C/c <= 2.01
        for dom, cap in ((ball, 2.01), (ellipsoid, 8.0)):
            pts = band_points(dom, 40, seed=5, depth_lo=0.002, depth_hi=0.1)
            d = boundary_distance_batch(dom, pts)
            ratio = -dom.rho(pts) / d
            assert ratio.max() / ratio.min() <= cap

    def test_approx_distance_first_order(self, ball):
        pts = band_points(ball, 20, seed=9, depth_lo=0.002, depth_hi=0.05)
        d = boundary_distance_batch(ball, pts)
        a = approx_boundary_distance(ball, pts)
        assert np.max(np.abs(a - d) / d) < 0.06


class TestNormal:
    def test_ball_axis(self, ball):
        v = complex_normal(ball, np.array([0.7, 0.0]))
        assert np.allclose(v, np.array([1.0, 0.0]))

    def test_ellipsoid_axis(self, ellipsoid):
        v = complex_normal(ellipsoid, np.array([0.0, 0.8]))
        assert np.allclose(v, np.array([0.0, 1.0]))

    def test_ball_radial_at_complex_points(self, ball):
        # the complex normal line at z is spanned by z itself
        rng = np.random.default_rng(2)
        for _ in range(8):
            z = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.3
            v = complex_normal(ball, z)
            assert np.allclose(v, z / np.linalg.norm(z), atol=1e-12)

    def test_unit_norm(self, ellipsoid):
        for z in band_points(ellipsoid, 10, seed=4):
            assert np.linalg.norm(complex_normal(ellipsoid, z)) == pytest.approx(1.0)

    def test_degenerate_center(self, ball):
        with pytest.raises(DegenerateGradient) as e:
            complex_normal(ball, np.zeros(2, dtype=complex))
        assert e.value.code == "degenerate-gradient"


class TestShrunkenDomain:
    def test_ball_shrinks_to_smaller_radius(self, ball):
        sh = shrunken_domain(ball, 0.005, 4.0)  # rho + 0.02
        z = np.array([0.5, 0.0])
        assert boundary_distance(sh, z) == pytest.approx(np.sqrt(0.98) - 0.5, rel=1e-8)
        assert sh.name == "ball-shrunk"

    def test_epsilon_too_large(self, ball):
        with pytest.raises(EpsilonTooLarge) as e:
            shrunken_domain(ball, 0.02, 4.0)  # 0.08 >= eta0/2
        assert e.value.code == "epsilon-too-large"
