"""Dense SDP data in linear-matrix-inequality form.

The problem solved by this package is

    minimize    c' y
    subject to  F_b(y) = C_b + sum_j y_j A_{b,j}  psd   for each block b,
                E y = d,

with symmetric coefficient matrices.  Its Lagrangian dual is

    maximize    d' nu - sum_b <C_b, S_b>
    subject to  sum_b A_b^*(S_b) + E' nu = c,   S_b psd,

where A_b^*(S)_j = <A_{b,j}, S>.  The dual matrices S_b are the Gram
matrices of the sum-of-squares multipliers when the primal is a moment
relaxation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SdpBlock",
    "SdpProblem",
    "SdpStatus",
    "SdpSolution",
    "SolverOptions",
    "reduce_equalities",
    "InconsistentEqualities",
]


class InconsistentEqualities(Exception):
    """The linear system E y = d has no solution (detected at preprocessing)."""


def _symmetrize(a: np.ndarray, what: str, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.T) > tol * scale:
        raise ValueError(f"{what} is not symmetric")
    return (a + a.T) / 2.0


@dataclass
class SdpBlock:
    """One affine matrix pencil C + sum_j y_j A_j."""

    coeffs: np.ndarray  # (nvar, side, side)
    const: np.ndarray | None = None  # (side, side), zero when omitted
    label: str = ""

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
            raise ValueError(f"pencil coefficients must be (nvar, s, s), got {coeffs.shape}")
        for j in range(coeffs.shape[0]):
            coeffs[j] = _symmetrize(coeffs[j], f"pencil matrix {j} of block {self.label!r}")
        self.coeffs = coeffs
        side = coeffs.shape[1]
        if self.const is None:
            self.const = np.zeros((side, side))
        else:
            const = _symmetrize(self.const, f"constant matrix of block {self.label!r}")
            if const.shape != (side, side):
                raise ValueError("constant term shape does not match the pencil")
            self.const = const

    @property
    def side(self) -> int:
        return self.coeffs.shape[1]

    @property
    def nvar(self) -> int:
        return self.coeffs.shape[0]

    def pencil_value(self, y: np.ndarray) -> np.ndarray:
        return self.const + np.tensordot(y, self.coeffs, axes=1)

    def adjoint(self, s: np.ndarray) -> np.ndarray:
        """A^*(S)_j = <A_j, S>."""
        return np.tensordot(self.coeffs, s, axes=([1, 2], [0, 1]))


def reduce_equalities(
    eq: np.ndarray, rhs: np.ndarray, tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Select a maximal independent subset of equality rows.

    Uses a column-pivoted QR of E'; dropped rows must be consistent with the
    kept ones (right-hand-side residual <= tol * scale) or the system is
    inconsistent and InconsistentEqualities is raised.  Returns
    (E_reduced, d_reduced, kept_row_indices).
    """
    import scipy.linalg

    eq = np.asarray(eq, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if eq.ndim != 2 or rhs.shape != (eq.shape[0],):
        raise ValueError("equality system shapes are inconsistent")
    p = eq.shape[0]
    if p == 0:
        return eq, rhs, np.array([], dtype=int)
    scale = max(1.0, float(np.max(np.abs(eq))), float(np.max(np.abs(rhs))))
    _, r, piv = scipy.linalg.qr(eq.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.array([])
    rank = int(np.count_nonzero(diag > tol * max(scale, diag[0] if diag.size else 1.0)))
    kept = np.sort(piv[:rank])
    dropped = np.sort(piv[rank:])
    if dropped.size:
        # Each dropped row is a combination of kept rows; the rhs must agree.
        sol, *_ = np.linalg.lstsq(eq[kept].T, eq[dropped].T, rcond=None)
        rhs_err = np.abs(sol.T @ rhs[kept] - rhs[dropped])
        if np.any(rhs_err > tol * scale * max(1.0, float(np.max(np.abs(sol))) if sol.size else 1.0)):
            raise InconsistentEqualities(
                f"equality rows are contradictory (max rhs residual {float(np.max(rhs_err)):.3e})"
            )
    return eq[kept], rhs[kept], kept


@dataclass
class SdpProblem:
    """minimize c'y  s.t.  per-block pencils psd and E y = d.

    Equality rows are reduced to full row rank at construction; the original
    row indices of the kept rows are recorded so dual multipliers can be
    mapped back.
    """

    c: np.ndarray
    blocks: list[SdpBlock]
    eq: np.ndarray
    eq_rhs: np.ndarray
    kept_rows: np.ndarray = field(default=None)  # type: ignore[assignment]
    original_rows: int = 0

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        nvar = self.c.shape[0]
        if nvar < 1:
            raise ValueError("need at least one variable")
        if not self.blocks:
            raise ValueError("need at least one psd block")
        for blk in self.blocks:
            if blk.nvar != nvar:
                raise ValueError(
                    f"block {blk.label!r} has {blk.nvar} variables, expected {nvar}"
                )
        eq = np.asarray(self.eq, dtype=float).reshape(-1, nvar)
        rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        if eq.shape[0] != rhs.shape[0]:
            raise ValueError("equality matrix and rhs disagree")
        self.original_rows = eq.shape[0]
        if self.kept_rows is None:
            self.eq, self.eq_rhs, self.kept_rows = reduce_equalities(eq, rhs)
        else:
            self.eq, self.eq_rhs = eq, rhs

    @property
    def nvar(self) -> int:
        return self.c.shape[0]

    @property
    def n_eq(self) -> int:
        return self.eq.shape[0]

    def expand_multipliers(self, nu: np.ndarray) -> np.ndarray:
        """Multipliers over the original (pre-reduction) equality rows."""
        full = np.zeros(self.original_rows)
        full[self.kept_rows] = nu
        return full


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE_OR_UNBOUNDED = "dual_infeasible_or_unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverOptions:
    max_iter: int = 100
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    seed: int = 0
    verbose: bool = False


@dataclass
class SdpSolution:
    """Solver outcome: primal vector, dual multipliers, and diagnostics.

    On OPTIMAL the relative duality gap is below gap_tol and all residuals
    (equality, pencil minimum eigenvalue, dual feasibility) are below
    feas_tol at their natural scales.  dual_matrices holds one psd
    multiplier per block of the problem as posed; eq_multipliers aligns
    with the rows of eq_rows.
    """

    status: SdpStatus
    y: np.ndarray | None
    primal_value: float | None
    dual_value: float | None
    dual_matrices: list[np.ndarray] | None
    eq_multipliers: np.ndarray | None
    gap: float | None
    residuals: dict[str, float]
    iterations: int
    message: str = ""
    # Equality rows the multipliers refer to.  Normally the problem's own
    # rows; facial reduction inside solve() may append derived rows.
    eq_rows: np.ndarray | None = None
    eq_rows_rhs: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL
