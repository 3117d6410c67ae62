"""Exact Stokes data of irregular classes and the Stokes structures they govern."""
from .exact import Angle, GaussianRational, PolarCoeff
from .flagged import (
    Filtration,
    Grading,
    IncompatibleError,
    NoCommonSplitting,
    QuiverOrder,
    Subspace,
    common_splitting,
    median_grading,
    wild_monodromy,
)
from .irregular import (
    CoverPoint,
    ExponentialFactor,
    Fiber,
    IrregularClass,
    fission_tree,
    levels,
    natural_quotient,
    singular_directions,
    stokes_arrows_at,
    stokes_directions,
)
from .structures import (
    BoundaryPresentation,
    InvalidStructure,
    StokesFilteredLS,
    StokesGradedLS,
    StokesLocalSystem,
    associated_graded_ls,
    canonical_splitting,
    grading_to_filtration,
    graded_to_stokes_ls,
    moderate_sections,
    stokes_ls_to_graded,
    validate,
)
from .wild_reps import (
    StokesRepresentation,
    WildSurfaceData,
    build_presentation,
    rep_from_sgls,
    sgls_from_rep,
    transport,
    twisted_conjugate,
    validate_rep,
    wilson_loop,
)

__version__ = "0.1.0"
