"""Moment-relaxation builders for each hierarchy flavor.

Given  min f(x)  s.t.  g_i(x) >= 0, h_j(x) = 0,  the order-k moment
relaxation minimizes <f, y> over truncated moment sequences y subject to
<1, y> = 1 and a flavor-dependent family of psd localizing blocks:

  putinar           M_k(y) and L_{g_i}(y) psd, one block per constraint;
  schmudgen         one block per product g_nu = g_1^nu_1 ... g_m^nu_m over
                    nu in {0,1}^m (products refine the quadratic module to
                    the preordering, so bounds dominate putinar's);
  sos_unconstrained M_k(y) alone, the dual of "f - gamma is a sum of
                    squares" for even-degree f;
  gradient          M_k(y) psd plus L_{df/dx_j}(y) = 0, confining the
                    measure to the critical set of f;
  jacobian_single   for a single inequality g: blocks over {1, g} plus
                    equalities  g * df/dx_i = 0  and the aggregated 2x2
                    Jacobian minors, which force finite convergence.

Equality generators are encoded as linear rows (every entry of the
localizing matrix vanishes) rather than as opposite inequality pairs; this
halves the block count and keeps the gradient/Jacobian forms literal.

Each builder records the (d_f, d_g) pair the flat-truncation test should
use.  d_g is taken over the *inequality* generators only (max(1, ...)); the
extraction step verifies equality feasibility of the atoms directly, which
is sharper in practice than widening the rank window.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .moment import _generator_arrays, _pair_shift_indices
from .polynomial import (
    MonomialBasis,
    Polynomial,
    basis,
    constraint_half_degree,
    degree_half,
)
from .sdp import SdpBlock, SdpProblem

__all__ = [
    "Problem",
    "PsdBlockSpec",
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
]

FLAVORS = ("putinar", "schmudgen", "sos_unconstrained", "gradient", "jacobian_single")

SCHMUDGEN_MAX_CONSTRAINTS = 12


@dataclass(frozen=True)
class Problem:
    """min f(x) s.t. g_i(x) >= 0 (inequalities) and h_j(x) = 0 (equalities)."""

    objective: Polynomial
    inequalities: tuple[Polynomial, ...] = ()
    equalities: tuple[Polynomial, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        n = self.objective.nvars
        for p in (*self.inequalities, *self.equalities):
            if p.nvars != n:
                raise ValueError("all problem polynomials must share the variable count")
            if p.is_zero:
                raise ValueError("constraint polynomials must be nonzero")

    @property
    def nvars(self) -> int:
        return self.objective.nvars

    @property
    def n_inequalities(self) -> int:
        return len(self.inequalities)

    @property
    def d_f(self) -> int:
        if self.objective.is_zero:
            raise ValueError("objective is the zero polynomial")
        return degree_half(self.objective)

    @property
    def d_g(self) -> int:
        return constraint_half_degree(self.inequalities)

    def with_ball(self, radius_squared: float) -> "Problem":
        """Append the constraint radius_squared - ||x||^2 >= 0.

        Adding a ball of known radius makes the constraint set archimedean;
        the radius is never inferred, the caller must supply it.
        """
        if radius_squared <= 0:
            raise ValueError("ball radius must be positive")
        n = self.nvars
        ball = Polynomial.constant(n, radius_squared)
        for i in range(n):
            ball = ball - Polynomial.variable(n, i) ** 2
        return Problem(self.objective, self.inequalities + (ball,), self.equalities)


@dataclass
class PsdBlockSpec:
    """One localizing block: its generator, row basis, and linear pencil.

    When facial reduction shrank the block, `reduction` holds the
    orthonormal map U from the reduced coordinates back to the monomial row
    basis (pencil = U' L_generator U); it is None for full-size blocks.
    """

    label: str
    generator: Polynomial
    rows_basis: MonomialBasis
    pencil: np.ndarray  # (nvar, side, side)
    reduction: np.ndarray | None = None

    @property
    def side(self) -> int:
        return self.pencil.shape[1]

    def lift_gram(self, gram: np.ndarray) -> np.ndarray:
        """Gram matrix over the monomial row basis."""
        if self.reduction is None:
            return gram
        return self.reduction @ gram @ self.reduction.T


@dataclass
class MomentSdp:
    """Order-k moment SDP: objective vector, psd pencils, equality rows."""

    flavor: str
    order: int
    nvars: int
    objective: Polynomial
    objective_coeffs: np.ndarray
    psd_blocks: list[PsdBlockSpec]
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    equality_generators: tuple[Polynomial, ...]
    d_f: int
    d_g_flat: int
    omitted_blocks: tuple[str, ...] = ()
    vacuous_blocks: tuple[str, ...] = ()
    _sdp: SdpProblem | None = field(default=None, repr=False)

    @property
    def basis(self) -> MonomialBasis:
        return basis(self.nvars, 2 * self.order)

    @property
    def n_moments(self) -> int:
        return len(self.basis)

    def block_sides(self) -> list[int]:
        return [b.side for b in self.psd_blocks]

    def to_sdp_problem(self) -> SdpProblem:
        """Numerical LMI form; cached, equality rows reduced inside."""
        if self._sdp is None:
            self._sdp = SdpProblem(
                c=self.objective_coeffs.copy(),
                blocks=[
                    SdpBlock(coeffs=b.pencil, const=None, label=b.label)
                    for b in self.psd_blocks
                ],
                eq=self.eq_matrix,
                eq_rhs=self.eq_rhs,
            )
        return self._sdp


def _pencil_for(nvars: int, k: int, h: Polynomial, label: str) -> PsdBlockSpec:
    """Pencil A with sum_a y_a A_a = L_h(y) at order k."""
    d_h = degree_half(h)
    if k < d_h:
        raise ValueError(f"order {k} below half-degree {d_h} of generator {label!r}")
    rows = basis(nvars, k - d_h)
    shifts, coeffs = _generator_arrays(h)
    idx = _pair_shift_indices(nvars, k, d_h, shifts)
    nmom = len(basis(nvars, 2 * k))
    side = len(rows)
    pencil = np.zeros((nmom, side, side))
    for i in range(side):
        for j in range(i, side):
            for pos, c in zip(idx[i, j], coeffs):
                pencil[pos, i, j] += c
                if i != j:
                    pencil[pos, j, i] += c
    return PsdBlockSpec(label, h, rows, pencil)


def _equality_rows(nvars: int, k: int, phi: Polynomial) -> np.ndarray:
    """Rows enforcing every entry of L_phi(y) = 0 (upper triangle only)."""
    d_phi = degree_half(phi)
    if k < d_phi:
        raise ValueError(
            f"order {k} below half-degree {d_phi} of equality generator"
        )
    rows_basis = basis(nvars, k - d_phi)
    shifts, coeffs = _generator_arrays(phi)
    idx = _pair_shift_indices(nvars, k, d_phi, shifts)
    nmom = len(basis(nvars, 2 * k))
    side = len(rows_basis)
    rows = np.zeros((side * (side + 1) // 2, nmom))
    r = 0
    for i in range(side):
        for j in range(i, side):
            for pos, c in zip(idx[i, j], coeffs):
                rows[r, pos] += c
            r += 1
    return rows


def _normalization_row(nvars: int, k: int) -> tuple[np.ndarray, float]:
    row = np.zeros(len(basis(nvars, 2 * k)))
    row[0] = 1.0
    return row, 1.0


def _facially_reduce(
    blocks: list[PsdBlockSpec],
    equality_generators: tuple[Polynomial, ...],
    eq_matrix: np.ndarray,
    eq_rhs: np.ndarray,
    nvars: int,
    k: int,
) -> tuple[list[PsdBlockSpec], np.ndarray, np.ndarray, tuple[str, ...]]:
    """One round of equality-driven facial reduction of the psd blocks.

    An equality generator phi confines the representing measure to its zero
    set, so polynomials p = phi * x^delta are null directions of every
    feasible localizing matrix whenever the linear functional
    y -> L_y(h p q) lies in the span of the equality rows (then p' L_h(y) p
    and its cross terms vanish on the whole feasible subspace, and
    L_h(y) psd forces L_h(y) p = 0).  Keeping such a block at full size
    leaves the problem without a strictly feasible point and the dual side
    of the interior-point iteration never settles; instead the block is
    restricted to the orthogonal complement of the forced kernel and the
    linear conditions L_h(y) p = 0 are appended as equality rows.  Blocks
    whose kernel is everything read 0 psd = 0: they are dropped and
    recorded.
    """
    if eq_matrix.shape[0] == 0:
        return blocks, eq_matrix, eq_rhs, ()
    tol = 1e-9
    et = eq_matrix.T
    target = basis(nvars, 2 * k)
    e_scale = max(1.0, float(np.max(np.abs(eq_matrix))))

    def forced_zero(poly: Polynomial) -> bool:
        vec = np.array(poly.coefficient_vector(target))
        scale = max(e_scale, float(np.max(np.abs(vec))) if vec.size else 1.0)
        w, *_ = np.linalg.lstsq(et, vec, rcond=None)
        if float(np.max(np.abs(et @ w - vec))) > tol * scale:
            return False
        return abs(float(w @ eq_rhs)) <= tol * scale

    new_blocks: list[PsdBlockSpec] = []
    extra_rows: list[np.ndarray] = []
    dropped: list[str] = []
    for blk in blocks:
        h = blk.generator
        cap = k - degree_half(h)
        # Null-direction candidates: the truncated ideal slice phi * x^delta,
        # plus plain monomials (a generator phi proportional to h zeroes the
        # whole block, which products alone cannot express).
        raw: list[Polynomial] = []
        for phi in equality_generators:
            if phi.degree <= cap:
                for delta in basis(nvars, cap - phi.degree).exponents:
                    raw.append(phi * Polynomial(nvars, {delta: 1.0}))
        for delta in basis(nvars, cap).exponents:
            raw.append(Polynomial(nvars, {delta: 1.0}))
        candidates: list[Polynomial] = []
        for p in raw:
            if p.is_zero:
                continue
            if forced_zero(h * p * p) and all(
                forced_zero(h * p * q) for q in candidates
            ):
                candidates.append(p)
        if not candidates:
            new_blocks.append(blk)
            continue
        side = blk.side
        span = np.array(
            [p.coefficient_vector(blk.rows_basis) for p in candidates]
        ).T  # (side, m)
        u_all, sing, _ = np.linalg.svd(span, full_matrices=True)
        rank = int(np.count_nonzero(sing > 1e-10 * max(1.0, sing[0])))
        kernel = u_all[:, :rank]
        # L_h(y) q = 0 rows, one per kernel direction and matrix row.
        for col in range(rank):
            q = kernel[:, col]
            rows = np.tensordot(blk.pencil, q, axes=([2], [0]))  # (nmom, side)
            extra_rows.append(rows.T)
        if rank == side:
            dropped.append(blk.label)
            continue
        complement = u_all[:, rank:]
        reduced = np.einsum("mij,ia,jb->mab", blk.pencil, complement, complement)
        new_blocks.append(
            PsdBlockSpec(blk.label, h, blk.rows_basis, reduced, reduction=complement)
        )
    if extra_rows:
        eq_matrix = np.vstack([eq_matrix] + extra_rows)
        eq_rhs = np.concatenate([eq_rhs, np.zeros(eq_matrix.shape[0] - eq_rhs.shape[0])])
    if not new_blocks:  # keep at least the moment block for well-posedness
        return blocks, eq_matrix, eq_rhs, ()
    return new_blocks, eq_matrix, eq_rhs, tuple(dropped)


def _assemble(
    flavor: str,
    order: int,
    objective: Polynomial,
    blocks: list[PsdBlockSpec],
    equality_generators: tuple[Polynomial, ...],
    d_f: int,
    d_g_flat: int,
    omitted: tuple[str, ...] = (),
) -> MomentSdp:
    nvars = objective.nvars
    bas = basis(nvars, 2 * order)
    c = np.array(objective.coefficient_vector(bas))
    norm_row, norm_rhs = _normalization_row(nvars, order)
    eq_rows = [norm_row[None, :]]
    for phi in equality_generators:
        eq_rows.append(_equality_rows(nvars, order, phi))
    eq_matrix = np.vstack(eq_rows)
    eq_rhs = np.zeros(eq_matrix.shape[0])
    eq_rhs[0] = norm_rhs
    if equality_generators:
        blocks, eq_matrix, eq_rhs, vacuous = _facially_reduce(
            blocks, equality_generators, eq_matrix, eq_rhs, nvars, order
        )
    else:
        vacuous = ()
    return MomentSdp(
        flavor=flavor,
        order=order,
        nvars=nvars,
        objective=objective,
        objective_coeffs=c,
        psd_blocks=blocks,
        eq_matrix=eq_matrix,
        eq_rhs=eq_rhs,
        equality_generators=equality_generators,
        d_f=d_f,
        d_g_flat=d_g_flat,
        omitted_blocks=omitted,
        vacuous_blocks=vacuous,
    )


def minimum_order(problem: Problem, flavor: str) -> int:
    """Smallest k at which every block and equality row is representable."""
    d_f = problem.d_f
    if flavor == "putinar" or flavor == "schmudgen":
        degrees = [d_f, problem.d_g]
        degrees += [degree_half(h) for h in problem.equalities]
        return max(1, *degrees)
    if flavor == "sos_unconstrained":
        _require_unconstrained(problem, flavor)
        if problem.objective.degree % 2 != 0:
            raise ValueError("sum-of-squares relaxation needs an even-degree objective")
        return max(1, d_f)
    if flavor == "gradient":
        _require_unconstrained(problem, flavor)
        degrees = [d_f] + [
            degree_half(p) for p in problem.objective.gradient() if not p.is_zero
        ]
        return max(1, *degrees)
    if flavor == "jacobian_single":
        if len(problem.inequalities) != 1 or problem.equalities:
            raise ValueError(
                "the Jacobian flavor handles exactly one inequality and no equalities"
            )
        g = problem.inequalities[0]
        phis = [p for p in jacobian_equalities(problem.objective, g) if not p.is_zero]
        degrees = [d_f, degree_half(g)] + [degree_half(p) for p in phis]
        return max(1, *degrees)
    raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")


def _require_unconstrained(problem: Problem, flavor: str) -> None:
    if problem.inequalities or problem.equalities:
        raise ValueError(f"the {flavor} flavor applies to unconstrained problems only")


def build_putinar(problem: Problem, k: int) -> MomentSdp:
    """Blocks M_k(y) and L_{g_i}(y); equalities h_j folded in as rows."""
    k_min = minimum_order(problem, "putinar")
    if k < k_min:
        raise ValueError(f"order {k} below minimum order {k_min}")
    n = problem.nvars
    blocks = [_pencil_for(n, k, Polynomial.one(n), "1")]
    for i, g in enumerate(problem.inequalities, start=1):
        blocks.append(_pencil_for(n, k, g, f"g{i}"))
    return _assemble(
        "putinar", k, problem.objective, blocks, problem.equalities,
        d_f=problem.d_f, d_g_flat=problem.d_g,
    )


def build_schmudgen(problem: Problem, k: int) -> MomentSdp:
    """One block per product g_nu, nu in {0,1}^m; oversize blocks omitted.

    Blocks whose generator g_nu has half-degree above k would have an empty
    row basis; they are dropped and recorded.  The singleton products are
    always representable at the minimum order, so the relaxation is never
    weaker than putinar's at the same k.
    """
    m = len(problem.inequalities)
    if m > SCHMUDGEN_MAX_CONSTRAINTS:
        raise ValueError(
            f"{m} inequalities would generate 2^{m} = {2**m} blocks; "
            f"the preordering flavor is limited to {SCHMUDGEN_MAX_CONSTRAINTS}"
        )
    k_min = minimum_order(problem, "schmudgen")
    if k < k_min:
        raise ValueError(f"order {k} below minimum order {k_min}")
    n = problem.nvars
    blocks: list[PsdBlockSpec] = []
    omitted: list[str] = []
    for nu in itertools.product((0, 1), repeat=m):
        gen = Polynomial.one(n)
        names = []
        for flag, (i, g) in zip(nu, enumerate(problem.inequalities, start=1)):
            if flag:
                gen = gen * g
                names.append(f"g{i}")
        label = "*".join(names) if names else "1"
        if degree_half(gen) > k:
            omitted.append(label)
            continue
        blocks.append(_pencil_for(n, k, gen, label))
    return _assemble(
        "schmudgen", k, problem.objective, blocks, problem.equalities,
        d_f=problem.d_f, d_g_flat=problem.d_g, omitted=tuple(omitted),
    )


def build_sos_unconstrained(objective: Polynomial, k: int) -> MomentSdp:
    """Single block M_k(y): the dual of requiring f - gamma to be SOS."""
    problem = Problem(objective)
    k_min = minimum_order(problem, "sos_unconstrained")
    if k < k_min:
        raise ValueError(f"order {k} below minimum order {k_min}")
    n = objective.nvars
    blocks = [_pencil_for(n, k, Polynomial.one(n), "1")]
    return _assemble(
        "sos_unconstrained", k, objective, blocks, (),
        d_f=problem.d_f, d_g_flat=1,
    )


def build_gradient(objective: Polynomial, k: int) -> MomentSdp:
    """M_k(y) psd plus one equality block per nonzero partial derivative."""
    problem = Problem(objective)
    k_min = minimum_order(problem, "gradient")
    if k < k_min:
        raise ValueError(f"order {k} below minimum order {k_min}")
    n = objective.nvars
    blocks = [_pencil_for(n, k, Polynomial.one(n), "1")]
    partials = tuple(p for p in objective.gradient() if not p.is_zero)
    return _assemble(
        "gradient", k, objective, blocks, partials,
        d_f=problem.d_f, d_g_flat=1,
    )


def jacobian_equalities(f: Polynomial, g: Polynomial) -> list[Polynomial]:
    """The redundant equalities for a single inequality constraint g >= 0.

    n polynomials g * df/dx_i plus, for n >= 2, the aggregated minors

        sum_{i<j, i+j=l} (df/dx_i dg/dx_j - df/dx_j dg/dx_i),  l = 3..2n-1

    (indices 1-based), which vanish at every KKT point of the problem.
    """
    if f.nvars != g.nvars:
        raise ValueError("objective and constraint must share the variable count")
    n = f.nvars
    f_grad = f.gradient()
    g_grad = g.gradient()
    phis = [g * f_grad[i] for i in range(n)]
    for ell in range(3, 2 * n):
        agg = Polynomial.zero(n)
        for i in range(n):
            for j in range(i + 1, n):
                if (i + 1) + (j + 1) == ell:
                    agg = agg + f_grad[i] * g_grad[j] - f_grad[j] * g_grad[i]
        phis.append(agg)
    return phis


def build_jacobian_single(f: Polynomial, g: Polynomial, k: int) -> MomentSdp:
    """Preordering blocks over {1, g} plus the Jacobian equality rows."""
    problem = Problem(f, (g,))
    k_min = minimum_order(problem, "jacobian_single")
    if k < k_min:
        raise ValueError(f"order {k} below minimum order {k_min}")
    n = f.nvars
    blocks = [
        _pencil_for(n, k, Polynomial.one(n), "1"),
        _pencil_for(n, k, g, "g1"),
    ]
    phis = tuple(p for p in jacobian_equalities(f, g) if not p.is_zero)
    return _assemble(
        "jacobian_single", k, f, blocks, phis,
        d_f=problem.d_f, d_g_flat=degree_half(g),
    )


def build_relaxation(problem: Problem, flavor: str, k: int) -> MomentSdp:
    """Dispatch on flavor, validating applicability."""
    if flavor == "putinar":
        return build_putinar(problem, k)
    if flavor == "schmudgen":
        return build_schmudgen(problem, k)
    if flavor == "sos_unconstrained":
        _require_unconstrained(problem, flavor)
        return build_sos_unconstrained(problem.objective, k)
    if flavor == "gradient":
        _require_unconstrained(problem, flavor)
        return build_gradient(problem.objective, k)
    if flavor == "jacobian_single":
        if len(problem.inequalities) != 1 or problem.equalities:
            raise ValueError(
                "the Jacobian flavor handles exactly one inequality and no equalities"
            )
        return build_jacobian_single(problem.objective, problem.inequalities[0], k)
    raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
