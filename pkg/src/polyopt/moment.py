"""Truncated moment sequences and the matrices built from them.

A truncated moment sequence (tms) of degree 2k is a vector y indexed by all
monomials x^a with |a| <= 2k, in graded-lex order.  It induces the Riesz
functional  L_y(sum_a p_a x^a) = sum_a p_a y_a.

The localizing matrix of a generator h at order k is the symmetric matrix
L_h(y) indexed by monomials of degree <= k - ceil(deg(h)/2) with

    L_h(y)[a, b] = sum_c h_c y_{a+b+c},

the unique matrix satisfying p^T L_h(y) p = L_y(h p^2) on the row basis.
With h = 1 it is the moment matrix M_k(y).

A tms of degree 2t is *flat* (relative to half-degree d_g of a constraint
set) when rank M_{t-d_g}(y) = rank M_t(y); a tms of degree 2k has a flat
truncation when some t in [max(d_f, d_g), k] is flat.  Flatness certifies
that the truncation is the moment vector of a rank-many-atom measure, which
is what makes minimizer extraction possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .polynomial import MonomialBasis, Polynomial, basis, degree_half

__all__ = [
    "Tms",
    "LocalizingMatrix",
    "FlatnessReport",
    "riesz",
    "atomic_tms",
    "assemble_localizing",
    "moment_matrix",
    "numerical_rank",
    "check_flat_truncation",
    "tms_norm",
]

RANK_EPS_FLOOR = 1e-12


@dataclass(frozen=True)
class Tms:
    """Truncated moment sequence of degree 2*half_degree, dense graded-lex."""

    nvars: int
    half_degree: int
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        expected = len(self.basis)
        if vals.shape != (expected,):
            raise ValueError(
                f"tms for n={self.nvars}, 2k={2 * self.half_degree} needs "
                f"{expected} entries, got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def basis(self) -> MonomialBasis:
        return basis(self.nvars, 2 * self.half_degree)

    @property
    def y0(self) -> float:
        return float(self.values[0])

    @property
    def is_unit(self) -> bool:
        """Whether <1, y> = 1, the normalization of a probability measure."""
        return abs(self.y0 - 1.0) <= 1e-12

    def truncate(self, half_degree: int) -> "Tms":
        """Restriction y|_{2t}.  Graded-lex order makes this a prefix."""
        if half_degree > self.half_degree:
            raise ValueError(
                f"cannot truncate degree-{2 * self.half_degree} tms to degree "
                f"{2 * half_degree}"
            )
        n = len(basis(self.nvars, 2 * half_degree))
        return Tms(self.nvars, half_degree, self.values[:n].copy())

    def serialize(self) -> list[tuple[list[int], float]]:
        """(exponent vector, value) pairs in graded-lex order."""
        return [
            (list(exps), float(v))
            for exps, v in zip(self.basis.exponents, self.values)
        ]


def riesz(y: Tms, p: Polynomial) -> float:
    """<p, y> = sum_a p_a y_a.  Requires deg(p) <= 2*half_degree."""
    if p.nvars != y.nvars:
        raise ValueError(f"variable count mismatch: {p.nvars} vs {y.nvars}")
    if p.is_zero:
        return 0.0
    if p.degree > 2 * y.half_degree:
        raise ValueError(
            f"polynomial degree {p.degree} exceeds tms degree {2 * y.half_degree}"
        )
    bas = y.basis
    import math

    return math.fsum(c * y.values[bas.index(m)] for m, c in p.sorted_terms())


def atomic_tms(
    atoms: Sequence[tuple[float, Sequence[float]]],
    half_degree: int,
    nvars: int | None = None,
) -> Tms:
    """Moments of the atomic measure sum_j lambda_j delta_{u_j}.

    `atoms` is a sequence of (weight, point) pairs with positive weights and
    pairwise-distinct points.  When the weights sum to 1 the result is a
    unit tms.
    """
    if not atoms:
        raise ValueError("need at least one atom")
    weights = np.array([float(w) for w, _ in atoms])
    points = np.array([[float(x) for x in u] for _, u in atoms], dtype=float)
    if np.any(weights <= 0.0):
        raise ValueError("atom weights must be positive")
    n = points.shape[1]
    if nvars is not None and nvars != n:
        raise ValueError(f"points have dimension {n}, expected {nvars}")
    if np.any([len(u) != n for _, u in atoms]):
        raise ValueError("atoms have inconsistent dimensions")
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if np.max(np.abs(points[i] - points[j])) <= 1e-10:
                raise ValueError(f"duplicate atoms at positions {i} and {j}")
    bas = basis(n, 2 * half_degree)
    exps = np.array(bas.exponents)  # (N, n)
    # powers[j, a] = u_j^a, computed per coordinate then multiplied.
    powers = np.ones((len(points), len(bas)))
    for coord in range(n):
        powers *= points[:, coord][:, None] ** exps[:, coord][None, :]
    values = weights @ powers
    return Tms(n, half_degree, values)


@lru_cache(maxsize=512)
def _pair_shift_indices(
    nvars: int, order: int, d_h: int, shifts: tuple[tuple[int, ...], ...]
) -> np.ndarray:
    """idx[i, j, s] = graded-lex index of a_i + a_j + shift_s.

    Rows run over the basis of degree order - d_h; targets live in the
    degree-2*order basis.  Cached because the same map is reused across
    solver iterations and hierarchy orders.
    """
    rows = basis(nvars, order - d_h)
    target = basis(nvars, 2 * order)
    nrows = len(rows)
    idx = np.empty((nrows, nrows, len(shifts)), dtype=np.int64)
    exps = rows.exponents
    for i in range(nrows):
        for j in range(i, nrows):
            pair = tuple(a + b for a, b in zip(exps[i], exps[j]))
            for s, shift in enumerate(shifts):
                total = tuple(a + b for a, b in zip(pair, shift))
                pos = target.index_of_exponents(total)
                idx[i, j, s] = pos
                idx[j, i, s] = pos
    idx.setflags(write=False)
    return idx


def _generator_arrays(h: Polynomial) -> tuple[tuple[tuple[int, ...], ...], np.ndarray]:
    items = h.sorted_terms()
    shifts = tuple(m.exponents for m, _ in items)
    coeffs = np.array([c for _, c in items])
    return shifts, coeffs


@dataclass(frozen=True)
class LocalizingMatrix:
    """L_h(y) at a given order, with its generator and row basis."""

    generator: Polynomial
    order: int
    rows_basis: MonomialBasis
    entries: np.ndarray

    @property
    def side(self) -> int:
        return len(self.rows_basis)


def assemble_localizing(y: Tms, h: Polynomial, k: int) -> LocalizingMatrix:
    """Assemble L_h(y) at order k.

    Requires k <= half_degree(y) (entries reach degree 2k) and k >= d_h
    (otherwise the row basis is empty).  Entries are filled once per
    unordered index pair, so the matrix is symmetric exactly.
    """
    if h.nvars != y.nvars:
        raise ValueError(f"variable count mismatch: {h.nvars} vs {y.nvars}")
    if h.is_zero:
        raise ValueError("localizing matrix of the zero generator is undefined")
    d_h = degree_half(h)
    if k < d_h:
        raise ValueError(
            f"order {k} below generator half-degree {d_h}: empty row basis"
        )
    if k > y.half_degree:
        raise ValueError(
            f"order {k} needs moments of degree {2 * k}, tms has degree "
            f"{2 * y.half_degree}"
        )
    shifts, coeffs = _generator_arrays(h)
    idx = _pair_shift_indices(y.nvars, k, d_h, shifts)
    entries = np.tensordot(y.values[idx], coeffs, axes=([2], [0]))
    return LocalizingMatrix(h, k, basis(y.nvars, k - d_h), entries)


def moment_matrix(y: Tms, k: int) -> LocalizingMatrix:
    """M_k(y) = L_1(y) at order k."""
    return assemble_localizing(y, Polynomial.one(y.nvars), k)


def numerical_rank(matrix: np.ndarray, eps: float) -> int:
    """Eigenvalue count above the relative threshold eps * max(lmax, floor).

    Eigenvalues are clipped at zero from below before testing; the absolute
    floor guards the zero matrix.  Input must be symmetric to 1e-10 of its
    norm.
    """
    if eps <= 0.0:
        raise ValueError("rank tolerance must be positive")
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.T) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    eigs = np.linalg.eigvalsh((a + a.T) / 2.0)
    eigs = np.clip(eigs, 0.0, None)
    lam_max = float(eigs[-1]) if eigs.size else 0.0
    threshold = eps * max(lam_max, RANK_EPS_FLOOR)
    return int(np.count_nonzero(eigs >= threshold))


@dataclass(frozen=True)
class FlatnessReport:
    """Rank diagnostics of the flat-truncation test over one tms.

    tested_orders lists (t, rank M_{t-d_g}, rank M_t) for every t in the
    window [max(d_f, d_g), k]; flat_order is the smallest passing t, or None
    when no order passes.  rank_profile holds rank M_t for t = 0..k.
    """

    order_k: int
    d_f: int
    d_g: int
    tested_orders: tuple[tuple[int, int, int], ...]
    flat_order: int | None
    rank_tolerance: float
    rank_profile: tuple[int, ...]

    @property
    def is_flat(self) -> bool:
        return self.flat_order is not None

    def passing_orders(self) -> list[int]:
        """All flat orders, smallest first (drivers retry larger ones)."""
        return [t for t, lo, hi in self.tested_orders if lo == hi]

    def rank_at(self, t: int) -> int:
        return self.rank_profile[t]


def check_flat_truncation(
    y: Tms, d_f: int, d_g: int, eps: float = 1e-6
) -> FlatnessReport:
    """Test every t in [max(d_f, d_g), k] for rank M_{t-d_g} = rank M_t.

    Produces a report even when no order passes; the caller decides how to
    proceed.  Requires half_degree(y) >= max(d_f, d_g).
    """
    if d_f < 0 or d_g < 1:
        raise ValueError("need d_f >= 0 and d_g >= 1")
    k = y.half_degree
    t_min = max(d_f, d_g)
    if k < t_min:
        raise ValueError(
            f"tms half-degree {k} below the flat-truncation window start {t_min}"
        )
    profile = tuple(
        numerical_rank(moment_matrix(y, t).entries, eps) for t in range(k + 1)
    )
    tested = tuple(
        (t, profile[t - d_g], profile[t]) for t in range(t_min, k + 1)
    )
    flat_order = next((t for t, lo, hi in tested if lo == hi), None)
    return FlatnessReport(
        order_k=k,
        d_f=d_f,
        d_g=d_g,
        tested_orders=tested,
        flat_order=flat_order,
        rank_tolerance=eps,
        rank_profile=profile,
    )


def tms_norm(y: Tms, up_to_degree: int) -> float:
    """Euclidean norm of the truncation y|_{up_to_degree}.

    For a unit atomic tms supported in the ball ||x||^2 <= R this satisfies
    tms_norm(y, 2t) <= 1 + R + ... + R^t: the truncated vector is dominated
    entrywise by the Frobenius norm of M_t(y), which for a positive
    semidefinite matrix is at most its trace, and the trace is bounded by
    the geometric sum.
    """
    if up_to_degree < 0 or up_to_degree > 2 * y.half_degree:
        raise ValueError(
            f"truncation degree {up_to_degree} outside [0, {2 * y.half_degree}]"
        )
    n = len(basis(y.nvars, up_to_degree))
    return float(np.linalg.norm(y.values[:n]))
