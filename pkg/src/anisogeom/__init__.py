"""Anisotropic geometry of finite-type domains.

Directional radii, extremal frames and polydisks, Carleson tent norms,
current mollification, and a homotopy solver for the d-equation with
anisotropic estimates.
"""

from .domains import (
    DomainSpec,
    approx_boundary_distance,
    boundary_distance,
    boundary_distance_batch,
    builtin_domain,
    complex_normal,
    domain_from_json,
    project_to_boundary,
    shrunken_domain,
)
from .errors import AnisoError
from .geometry import (
    BandRegion,
    ExtremalFrame,
    GreedyCovering,
    Polydisk,
    extremal_frame,
    greedy_cover,
    k_weight,
    minimal_covering,
    polydisk,
    pseudo_distance_d,
    pseudo_distance_d1,
    tau,
    tau_batch,
    tent_membership,
)

__version__ = "0.1.0"
