import numpy as np
import pytest

from anisogeom import builtin_domain


@pytest.fixture(scope="session")
def ball():
    return builtin_domain("ball")


@pytest.fixture(scope="session")
def ball3():
    return builtin_domain("ball", (3,))


@pytest.fixture(scope="session")
def ellipsoid():
    return builtin_domain("ellipsoid", (1, 2))


def band_points(domain, count, seed, depth_lo=0.005, depth_hi=0.04):
    """Deterministic interior band points of a star-shaped model domain."""
    from anisogeom.sampling import sphere_directions

    rng = np.random.default_rng(seed)
    dirs = sphere_directions(count, domain.dim_n, seed, "band")
    depths = depth_lo + (depth_hi - depth_lo) * rng.random(count)
    pts = []
    for u, d in zip(dirs, depths):
        lo, hi = 0.0, 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if domain.rho(mid * u) < 0.0:
                lo = mid
            else:
                hi = mid
        t_bdry = 0.5 * (lo + hi)
        pts.append(u * t_bdry * (1.0 - d))
    return np.asarray(pts)
