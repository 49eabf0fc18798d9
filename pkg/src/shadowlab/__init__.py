"""shadowlab: iterative random orthogonal shadows of convex bodies.

Simulates chains of random orthogonal projections of a convex body onto
nested subspaces and numerically evaluates how much information the shadows
retain: epsilon-thickened subspace-ambiguity fractions, the conditional
mutual-information upper bound, the Markov/data-processing comparison, and
the symmetry-group stratification of the 2-plane Grassmannian.
"""

from .errors import (
    BadParams,
    ChainIdentityError,
    ConfigError,
    Degenerate,
    DimensionError,
    DomainError,
    ModeUnsupported,
    NonConvergence,
    NotUnit,
    OrbitStabilizerMismatch,
    RankDeficient,
    ShadowError,
    UnknownBody,
    ZeroDirection,
)
from .linalg import (
    Subspace,
    complement,
    log_gamma,
    log_grassmannian_volume,
    log_sphere_area,
    orthonormalize,
    principal_angles,
    projector,
)
from .geometry import (
    Ball,
    EmbeddedBody,
    Polytope,
    SymmetryGroup,
    circumradius,
    congruent,
    extreme_points,
    hausdorff,
    nearest_point,
    project_out,
    project_to_subspace,
    support,
    symmetry_group,
)
from .sampling import (
    DirectionChain,
    RandomSource,
    project_chain,
    sample_chain,
    sample_grassmannian,
    sample_unit_sphere,
)
from .estimators import (
    DIVERGENT,
    BoundReport,
    DPIReport,
    ElogNEstimate,
    MIEstimate,
    NEstimate,
    ShapeDescriptor,
    bound_report,
    default_grid_step,
    estimate_ElogN,
    estimate_N,
    estimate_conditional_mi,
    estimate_elogn_sweep,
    estimate_n_sweep,
    sample_codim2_shadow,
    shape_descriptor,
    theorem1_bound,
    theorem1_first_term,
    validate_dpi,
    wilson_interval,
)
from .strata import (
    ANALYTIC_BALL,
    FINITE_GROUP_DEGENERATE,
    StratReport,
    Stratum,
    analytic_ball_report,
    conjugacy_classify,
    orbit,
    stabilizer,
    stratify,
    theorem2_lower_bound,
)
from .bodies import BUILTIN_BODIES, generate_body, read_polytope, write_polytope

__version__ = "0.1.0"
