"""Formal orthogonal polynomials, Gauss quadrature for linear functionals, and look-ahead Lanczos."""
from .core import (
    DEFAULT_TOLERANCES,
    Functional,
    MomentFunctional,
    MomentSequence,
    Polynomial,
    TolerancePolicy,
    TripletFunctional,
    apply,
    moment,
)
from .exceptions import (
    FopError,
    HorizonExceeded,
    IllConditionedWeights,
    InsufficientPattern,
    NoRealizableDegree,
    NotQuasiDefinite,
    NotRegularDegree,
    SingularAlphaSystem,
    ZeroInitialCoupling,
)
from .fop import (
    BlockTridiagonal,
    FopSequence,
    assemble_block_tridiagonal,
    build_fop_sequence,
    jacobi_matrix,
    verify_orthogonality,
)
from .hankel import (
    DegreeClassification,
    DegreeKind,
    HankelAnalysis,
    analysis_from_pattern,
    classify_degrees,
    determinant_sequence,
    hankel_matrix,
)
from .lanczos import (
    BreakdownKind,
    BreakdownReport,
    LanczosState,
    classify_breakdown,
    lanczos,
    look_ahead_lanczos,
)
from .quadrature import (
    QuadratureRule,
    SmoothFunction,
    apply_quadrature,
    degree_of_exactness,
    gauss_quadrature,
    matching_moment_check,
    matrix_form_evaluate,
)
from .realization import (
    MismatchReport,
    RealizationTriplet,
    markov_parameters,
    minimal_partial_realization,
    mismatch_check,
    trivial_realization,
)

__version__ = "0.1.0"
