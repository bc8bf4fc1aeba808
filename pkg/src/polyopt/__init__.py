"""polyopt: certified global polynomial optimization.

Builds the moment-relaxation hierarchy of a polynomial program, solves each
order with a dense interior-point method, certifies finite convergence via
the flat-truncation rank test, and extracts verified global minimizers from
the flat moment sequence.
"""

__version__ = "0.1.0"

from .driver import HierarchyOptions, HierarchyRun, compare_flavors, run_hierarchy
from .extraction import AtomicMeasure, ExtractionFailed, extract_atoms, verify_atoms
from .moment import (
    FlatnessReport,
    Tms,
    atomic_tms,
    assemble_localizing,
    check_flat_truncation,
    moment_matrix,
    numerical_rank,
    riesz,
    tms_norm,
)
from .polynomial import (
    Monomial,
    MonomialBasis,
    Polynomial,
    basis,
    constraint_half_degree,
    degree_half,
    parse_polynomial,
)
from .relaxation import (
    FLAVORS,
    MomentSdp,
    Problem,
    build_gradient,
    build_jacobian_single,
    build_putinar,
    build_relaxation,
    build_schmudgen,
    build_sos_unconstrained,
    jacobian_equalities,
    minimum_order,
)
from .sdp import (
    SdpBlock,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverOptions,
    certificate_residual,
    export_sdpa,
    extract_dual_certificate,
    solve,
)

__all__ = [
    "__version__",
    "Monomial",
    "MonomialBasis",
    "Polynomial",
    "basis",
    "degree_half",
    "constraint_half_degree",
    "parse_polynomial",
    "Tms",
    "FlatnessReport",
    "riesz",
    "atomic_tms",
    "assemble_localizing",
    "moment_matrix",
    "numerical_rank",
    "check_flat_truncation",
    "tms_norm",
    "Problem",
    "MomentSdp",
    "FLAVORS",
    "build_putinar",
    "build_schmudgen",
    "build_sos_unconstrained",
    "build_gradient",
    "build_jacobian_single",
    "build_relaxation",
    "minimum_order",
    "jacobian_equalities",
    "SdpBlock",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "SolverOptions",
    "solve",
    "extract_dual_certificate",
    "certificate_residual",
    "export_sdpa",
    "AtomicMeasure",
    "ExtractionFailed",
    "extract_atoms",
    "verify_atoms",
    "HierarchyOptions",
    "HierarchyRun",
    "run_hierarchy",
    "compare_flavors",
]
