"""Export to the SDPA sparse interchange format (.dat-s).

The target form is  min c'x  s.t.  X = sum_j x_j F_j - F_0,  X psd, with
block-diagonal symmetric matrices given as upper-triangle triplets.  Our
pencils map directly (F_j = A_{b,j}, F_0 = -C_b); each equality row e'y = d
becomes a pair of 1x1 diagonal entries  (e'y - d, d - e'y)  inside one
diagonal block, the standard encoding for solvers without native equality
support.
"""

from __future__ import annotations

from typing import IO

import numpy as np

from .problem import SdpProblem

__all__ = ["export_sdpa", "write_sdpa"]

_ENTRY_TOL = 0.0  # write exact nonzeros only


def write_sdpa(problem: SdpProblem, stream: IO[str], comment: str = "") -> None:
    nvar = problem.nvar
    n_eq = problem.n_eq
    block_sizes: list[int] = [blk.side for blk in problem.blocks]
    if n_eq:
        block_sizes.append(-2 * n_eq)

    if comment:
        stream.write(f'"{comment}"\n')
    stream.write(f"{nvar}\n")
    stream.write(f"{len(block_sizes)}\n")
    stream.write(" ".join(str(s) for s in block_sizes) + "\n")
    stream.write(" ".join(f"{v:.17g}" for v in problem.c) + "\n")

    def emit(mat_no: int, blk_no: int, i: int, j: int, value: float) -> None:
        if value != _ENTRY_TOL:
            stream.write(f"{mat_no} {blk_no} {i} {j} {value:.17g}\n")

    # F_0 first (constants enter with opposite sign), then F_1..F_m.
    for b, blk in enumerate(problem.blocks, start=1):
        const = np.asarray(blk.const)
        for i in range(blk.side):
            for j in range(i, blk.side):
                emit(0, b, i + 1, j + 1, -float(const[i, j]))
    if n_eq:
        diag_block = len(problem.blocks) + 1
        for rho in range(n_eq):
            d = float(problem.eq_rhs[rho])
            emit(0, diag_block, 2 * rho + 1, 2 * rho + 1, d)
            emit(0, diag_block, 2 * rho + 2, 2 * rho + 2, -d)
    for j_var in range(nvar):
        for b, blk in enumerate(problem.blocks, start=1):
            coeff = blk.coeffs[j_var]
            for i in range(blk.side):
                for j in range(i, blk.side):
                    emit(j_var + 1, b, i + 1, j + 1, float(coeff[i, j]))
        if n_eq:
            diag_block = len(problem.blocks) + 1
            for rho in range(n_eq):
                e = float(problem.eq[rho, j_var])
                emit(j_var + 1, diag_block, 2 * rho + 1, 2 * rho + 1, e)
                emit(j_var + 1, diag_block, 2 * rho + 2, 2 * rho + 2, -e)


def export_sdpa(problem: SdpProblem, path: str, comment: str = "") -> None:
    with open(path, "w", encoding="ascii") as handle:
        write_sdpa(problem, handle, comment=comment)
