"""Numerical tools for J-sums over l_p and approximability of subspace pairs."""

from .errors import ConsistencyError, PreconditionError, UnconvergedError
from .geometry import (
    ApproximabilityProfile,
    SubspacePair,
    bm_distance_to_l2,
    f_approximability_check,
    inclination,
    min_extension_norm,
    rosenthal_like_subspaces,
    uniform_approximability_report,
)
from .jspace import (
    GlidingHumpFamily,
    JVector,
    canonical_basis_fn,
    canonical_f,
    chain_value,
    enumerate_chains_oracle,
    gliding_hump_family,
    j_norm,
    jvec_lincomb,
    k_norm,
    omega_seminorm,
    truncate,
)
from .lp_space import (
    INF,
    BoundPair,
    Subspace,
    dist_to_subspace,
    dual_exponent,
    lp_direct_sum,
    lp_norm,
    operator_norm_bounds,
)

__version__ = "0.1.0"
