"""Dense semidefinite programming: LMI problems, an interior-point solver,
dual (sum-of-squares) certificates, and SDPA sparse export."""

from .certificate import certificate_residual, extract_dual_certificate, gram_polynomial
from .problem import (
    InconsistentEqualities,
    SdpBlock,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverOptions,
    reduce_equalities,
)
from .sdpa import export_sdpa, write_sdpa
from .solver import solve

__all__ = [
    "SdpBlock",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "SolverOptions",
    "InconsistentEqualities",
    "reduce_equalities",
    "solve",
    "extract_dual_certificate",
    "certificate_residual",
    "gram_polynomial",
    "export_sdpa",
    "write_sdpa",
]
