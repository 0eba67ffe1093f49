"""Canceling operators, certificate families and Lorentz-scale Sobolev checks on grids."""

__version__ = "0.1.0"

from .algebra import (
    CancelingCertificate,
    ConstructionError,
    OperatorSymbol,
    PreconditionError,
    construct_certificate,
    gamma_lower_bound,
    is_elliptic,
    is_l_canceling,
    preset,
    vectors_1dir,
    verify_certificate,
)
from .fields import SampledField, field_from_spec, generate
from .geometry import (
    DirectionBasis,
    VoxelSet,
    gagliardo_product_bound,
    gram_jacobian,
    loomis_whitney_check,
    shadow_measure,
)
from .lab import (
    VerificationReport,
    planar_checks,
    verify_alvino,
    verify_certificate_inequality,
    verify_directional_theorem,
    verify_korn_sobolev,
)
from .rearrangement import distribution, lorentz_norm, rearrangement
from .search import extremizer_search
from .subspaces import Subspace, SubspaceArrangement
