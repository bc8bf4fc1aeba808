"""Recover the atomic measure behind a flat truncated moment sequence.

Given a flat tms z of degree 2t whose moment matrix has numerical rank r,
the representing measure  z = sum_j lambda_j [u_j]_{2t}  is computed by the
classical factorization procedure:

  1. factor M_t(z) ~ V V' from its top-r eigenpairs;
  2. scan the rows of V in graded-lex order (degree <= t-1 only) and keep
     the r that are linearly independent: the pivot monomials b_1..b_r,
     a numerical stand-in for a quotient-ring basis;
  3. express every row in pivot coordinates (W = V B^{-1}); the rows at
     x_i * b_j assemble the multiplication operator N_i of each variable;
  4. take a random convex combination N = sum_i c_i N_i and its real Schur
     form N = Q T Q'; the Schur basis simultaneously triangularizes the
     commuting family, so u_j(i) = q_j' N_i q_j reads off atom coordinates;
  5. fit the weights by least squares against the moment vector, clip
     negligible negatives, renormalize, and report the residual.

Every failure mode (pivot deficiency, complex Schur blocks, merged atoms,
a poor weight fit) raises ExtractionFailed; callers treat this as a signal
to retry at a larger flat order or a higher relaxation order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .moment import Tms, moment_matrix
from .polynomial import Polynomial, basis
from .relaxation import Problem

__all__ = [
    "AtomicMeasure",
    "ExtractionFailed",
    "VerificationReport",
    "extract_atoms",
    "verify_atoms",
]

_NONREAL_TOL = 1e-6
_WEIGHT_CLIP_TOL = 1e-6
_ATOM_SEPARATION = 1e-8
_MAX_COMBINATION_RETRIES = 3


class ExtractionFailed(Exception):
    """Atom recovery failed; recoverable by retrying at another order."""

    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported probability measure sum_j lambda_j delta_{u_j}."""

    atoms: np.ndarray  # (r, n)
    weights: np.ndarray  # (r,), positive, summing to one
    residual: float  # inf-norm moment reconstruction error

    def __post_init__(self) -> None:
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("one weight per atom required")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        if abs(float(np.sum(weights)) - 1.0) > 1e-8:
            raise ValueError("weights must sum to one")
        scale = max(1.0, float(np.max(np.abs(atoms))))
        for i in range(len(atoms)):
            for j in range(i + 1, len(atoms)):
                if np.max(np.abs(atoms[i] - atoms[j])) <= _ATOM_SEPARATION * scale:
                    raise ValueError(f"atoms {i} and {j} coincide")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.atoms.shape[0]

    @property
    def nvars(self) -> int:
        return self.atoms.shape[1]

    def sorted(self) -> "AtomicMeasure":
        order = np.lexsort(self.atoms.T[::-1])
        return AtomicMeasure(self.atoms[order], self.weights[order], self.residual)


def _moment_vector(atoms: np.ndarray, weights: np.ndarray, nvars: int, degree: int) -> np.ndarray:
    bas = basis(nvars, degree)
    exps = np.array(bas.exponents)
    powers = np.ones((atoms.shape[0], len(bas)))
    for coord in range(nvars):
        powers *= atoms[:, coord][:, None] ** exps[:, coord][None, :]
    return weights @ powers


def extract_atoms(
    z: Tms,
    r: int,
    eps: float = 1e-6,
    seed: int = 0,
    residual_tol: float = 1e-6,
) -> AtomicMeasure:
    """Atoms and weights of a flat tms with rank-r moment matrix.

    eps is the pivot threshold of the echelon step (matched to the rank
    tolerance used to certify flatness).  The random combination in the
    Schur step is drawn from seed and redrawn up to three times when its
    eigenvalues cluster or fail to be real.
    """
    if r < 1:
        raise ValueError("rank must be at least one")
    t = z.half_degree
    n = z.nvars
    m_t = moment_matrix(z, t).entries
    eigvals, eigvecs = np.linalg.eigh(m_t)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    if eigvals[r - 1] <= 0.0:
        raise ExtractionFailed(
            "rank deficiency", f"eigenvalue {r} of the moment matrix is {eigvals[r - 1]:.3e}"
        )
    factor = eigvecs[:, :r] * np.sqrt(eigvals[:r])[None, :]

    # Pivot scan: lowest graded-lex monomials first, degree <= t-1 so every
    # x_i * pivot stays inside the row basis.
    row_basis = basis(n, t)
    low_rows = len(basis(n, t - 1)) if t >= 1 else 0
    threshold = np.sqrt(eps * max(eigvals[0], 1e-300))
    pivots: list[int] = []
    ortho: list[np.ndarray] = []
    for row in range(low_rows):
        v = factor[row].copy()
        for q in ortho:
            v -= (q @ v) * q
        norm = float(np.linalg.norm(v))
        if norm > threshold:
            pivots.append(row)
            ortho.append(v / norm)
            if len(pivots) == r:
                break
    if len(pivots) < r:
        raise ExtractionFailed(
            "pivot deficiency",
            f"found {len(pivots)} independent rows of degree < {t}, need {r}",
        )

    # W[row] = coordinates of the row in the pivot-row basis.
    b = factor[pivots]
    w = np.linalg.solve(b.T, factor.T).T

    mult = []
    for i in range(n):
        rows = []
        for p in pivots:
            shifted = list(row_basis.exponents[p])
            shifted[i] += 1
            rows.append(w[row_basis.index_of_exponents(tuple(shifted))])
        mult.append(np.array(rows))

    rng = np.random.default_rng(seed)
    last_error = ""
    for _ in range(1 + _MAX_COMBINATION_RETRIES):
        coeffs = rng.uniform(0.2, 1.0, size=n)
        coeffs /= coeffs.sum()
        combined = sum(c * m for c, m in zip(coeffs, mult))
        t_mat, q_mat = scipy.linalg.schur(combined, output="real")
        scale_n = max(1.0, float(np.max(np.abs(np.diag(t_mat)))))
        sub = np.abs(np.diag(t_mat, -1)) if r > 1 else np.zeros(0)
        if sub.size and float(np.max(sub)) > _NONREAL_TOL * scale_n:
            last_error = f"complex Schur block of size {float(np.max(sub)):.3e}"
            continue
        diag = np.sort(np.diag(t_mat))
        if r > 1 and float(np.min(np.diff(diag))) < 1e-10 * scale_n:
            last_error = "clustered eigenvalues in the random combination"
            continue
        atoms = np.empty((r, n))
        for j in range(r):
            qj = q_mat[:, j]
            for i in range(n):
                atoms[j, i] = float(qj @ mult[i] @ qj)
        atom_scale = max(1.0, float(np.max(np.abs(atoms))))
        merged = any(
            np.max(np.abs(atoms[a] - atoms[b2])) <= _ATOM_SEPARATION * atom_scale
            for a in range(r)
            for b2 in range(a + 1, r)
        )
        if merged:
            last_error = "extracted atoms coincide"
            continue
        return _fit_weights(z, atoms, residual_tol)
    raise ExtractionFailed("degenerate random combination", last_error)


def _fit_weights(z: Tms, atoms: np.ndarray, residual_tol: float) -> AtomicMeasure:
    n = z.nvars
    t = z.half_degree
    bas = basis(n, 2 * t)
    exps = np.array(bas.exponents)
    vander = np.ones((len(bas), atoms.shape[0]))
    for coord in range(n):
        vander *= atoms[:, coord][None, :] ** exps[:, coord][:, None]
    weights, *_ = np.linalg.lstsq(vander, z.values, rcond=None)
    if float(np.min(weights)) < -_WEIGHT_CLIP_TOL:
        raise ExtractionFailed(
            "negative weight", f"least-squares weight {float(np.min(weights)):.3e}"
        )
    weights = np.clip(weights, 0.0, None)
    total = float(np.sum(weights))
    if total <= 0.0:
        raise ExtractionFailed("negative weight", "all weights clipped to zero")
    weights = weights / total
    reconstructed = _moment_vector(atoms, weights, n, 2 * t)
    residual = float(np.max(np.abs(reconstructed - z.values)))
    if residual > residual_tol * max(1.0, float(np.max(np.abs(z.values)))):
        raise ExtractionFailed(
            "moment mismatch", f"reconstruction residual {residual:.3e}"
        )
    try:
        measure = AtomicMeasure(atoms, weights, residual)
    except ValueError as exc:
        raise ExtractionFailed("invalid measure", str(exc)) from exc
    return measure.sorted()


@dataclass(frozen=True)
class VerificationReport:
    """Feasibility and optimality checks of extracted atoms.

    Atoms must satisfy every inequality to -tol, every equality to tol, and
    match the candidate optimal value to tol * max(1, |f*|); the moment
    reconstruction residual is compared against tol at the scale of z.
    """

    objective_values: tuple[float, ...]
    objective_errors: tuple[float, ...]
    inequality_values: dict[str, tuple[float, ...]]
    equality_values: dict[str, tuple[float, ...]]
    reconstruction_residual: float
    tolerance: float
    passed: bool


def verify_atoms(
    measure: AtomicMeasure,
    problem: Problem,
    z: Tms,
    f_star: float,
    tol: float = 1e-6,
) -> VerificationReport:
    """Check that every atom is a feasible point achieving f_star."""
    f = problem.objective
    obj_values = tuple(f.evaluate(u) for u in measure.atoms)
    obj_scale = tol * max(1.0, abs(f_star))
    obj_errors = tuple(abs(v - f_star) for v in obj_values)
    ineq = {
        f"g{i}": tuple(g.evaluate(u) for u in measure.atoms)
        for i, g in enumerate(problem.inequalities, start=1)
    }
    eqs = {
        f"h{j}": tuple(h.evaluate(u) for u in measure.atoms)
        for j, h in enumerate(problem.equalities, start=1)
    }
    recon = _moment_vector(
        measure.atoms, measure.weights, z.nvars, 2 * z.half_degree
    )
    recon_residual = float(np.max(np.abs(recon - z.values)))
    ok = all(e <= obj_scale for e in obj_errors)
    ok = ok and all(v >= -tol for vals in ineq.values() for v in vals)
    ok = ok and all(abs(v) <= tol for vals in eqs.values() for v in vals)
    ok = ok and recon_residual <= tol * max(1.0, float(np.max(np.abs(z.values))))
    return VerificationReport(
        objective_values=obj_values,
        objective_errors=obj_errors,
        inequality_values=ineq,
        equality_values=eqs,
        reconstruction_residual=recon_residual,
        tolerance=tol,
        passed=ok,
    )


def match_atoms(found: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Permutation of `found` minimizing total distance to `expected`.

    Brute force over permutations; intended for small atom counts in tests
    and diagnostics.
    """
    found = np.atleast_2d(found)
    expected = np.atleast_2d(expected)
    if found.shape != expected.shape:
        raise ValueError("atom arrays must have identical shapes")
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(found.shape[0])):
        cost = float(np.sum(np.abs(found[list(perm)] - expected)))
        if cost < best_cost:
            best, best_cost = perm, cost
    return np.array(best)
