"""Sum-of-squares certificates recovered from the dual SDP solution.

At an optimal solve of a moment relaxation the dual matrices are Gram
matrices: with gamma the dual value, sigma_b(x) = [x]' S_b [x] for the
block with generator g_b, and q_rho the multipliers of the linear equality
rows, the dual constraint is exactly the coefficient identity

    f  =  sum_b g_b sigma_b  +  sum_rho nu_rho e_rho(x),

where e_rho is the polynomial whose coefficients form equality row rho (the
normalization row contributes gamma itself).  For inequality-only problems
this is the familiar  f - gamma = sigma_0 + g_1 sigma_1 + ... decomposition
with every sigma a sum of squares.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..polynomial import Monomial, Polynomial
from .problem import SdpSolution

if TYPE_CHECKING:  # pragma: no cover
    from ..relaxation import MomentSdp

__all__ = [
    "extract_dual_certificate",
    "gram_polynomial",
    "certificate_residual",
]


def gram_polynomial(gram: np.ndarray, rows_basis) -> Polynomial:
    """[x]' G [x] as a polynomial over the given monomial basis."""
    side = len(rows_basis)
    if gram.shape != (side, side):
        raise ValueError(f"Gram matrix shape {gram.shape} does not match basis size {side}")
    terms: dict[Monomial, float] = {}
    exps = rows_basis.exponents
    for i in range(side):
        for j in range(side):
            mono = Monomial(tuple(a + b for a, b in zip(exps[i], exps[j])))
            terms[mono] = terms.get(mono, 0.0) + float(gram[i, j])
    return Polynomial(rows_basis.nvars, terms)


def extract_dual_certificate(
    solution: SdpSolution, sdp: "MomentSdp"
) -> list[tuple[str, np.ndarray]]:
    """Per-block (generator label, psd Gram matrix) pairs.

    Only defined for an optimal solve; the Gram matrices witness
    f - dual_value lying in the truncated cone of the relaxation.  Grams of
    facially reduced blocks are lifted back to the monomial row basis.
    """
    if not solution.optimal:
        raise ValueError(f"no certificate for status {solution.status.value}")
    assert solution.dual_matrices is not None
    return [
        (block.label, block.lift_gram(gram))
        for block, gram in zip(sdp.psd_blocks, solution.dual_matrices)
    ]


def certificate_residual(solution: SdpSolution, sdp: "MomentSdp") -> Polynomial:
    """f minus the full reconstructed decomposition; near zero when exact."""
    if not solution.optimal:
        raise ValueError(f"no certificate for status {solution.status.value}")
    assert solution.dual_matrices is not None and solution.eq_multipliers is not None
    residual = sdp.objective
    for block, gram in zip(sdp.psd_blocks, solution.dual_matrices):
        residual = residual - block.generator * gram_polynomial(
            block.lift_gram(gram), block.rows_basis
        )
    bas = sdp.basis
    nu = solution.eq_multipliers
    rows = solution.eq_rows if solution.eq_rows is not None else sdp.eq_matrix
    row_terms: dict[Monomial, float] = {}
    for rho in range(rows.shape[0]):
        coeff_nu = float(nu[rho])
        if coeff_nu == 0.0:
            continue
        row = rows[rho]
        for pos in np.nonzero(row)[0]:
            mono = Monomial(bas.exponents[pos])
            row_terms[mono] = row_terms.get(mono, 0.0) + coeff_nu * float(row[pos])
    return residual - Polynomial(sdp.nvars, row_terms)
