"""Relative differential geometry of parametric hypersurfaces, numerically."""

from .catalog import get_surface, list_surfaces
from .chart import (
    EQUIAFFINE,
    EUCLIDEAN,
    GridSpec,
    Jet,
    Normalization,
    SurfaceChart,
    finite_difference_jet,
    immersion_jet,
    load_surface_file,
    parse_normalization,
    parse_surface_definition,
    sample_grid,
    scaled_equiaffine,
    seeded_custom_normalization,
)
from .euclid import EuclideanData, beltrami_first_II, beltrami_second_II, euclidean_data
from .expr import (
    DomainError,
    Expression,
    ParseDiagnostic,
    differentiate,
    evaluate,
    parse_expression,
    to_string,
)
from .identities import (
    IDENTITY_IDS,
    ClassificationVerdict,
    ResidualReport,
    classify_surface,
    evaluate_identity,
    pick_inequality_check,
    proportionality_test,
)
from .quad import (
    OvaloidAtlas,
    area_element_II,
    atlas_by_name,
    euler_characteristic_integral,
    gauss_legendre_rule,
    integrate_scalar,
    mean_curvature_defect_integral,
    sign_change_scan,
)
from .relative import (
    InvariantBundle,
    compute_bundle,
    darboux_tensor,
    pick_invariant,
    relative_frame,
    relative_scalar_curvature,
    relative_shape,
    tchebychev,
)

__version__ = "0.1.0"
