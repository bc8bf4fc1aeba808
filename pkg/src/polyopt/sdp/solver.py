"""Dense primal-dual interior-point solver for block LMI problems.

Path-following on the perturbed optimality system

    E y = d,
    sum_b A_b^*(S_b) + E' nu = c,
    X_b = C_b + A_b(y),          X_b S_b = mu I,

with an infeasible start: X_b is carried as an independent positive definite
iterate and the pencil residual  R_b = C_b + A_b(y) - X_b  is driven to zero
together with the equality and dual residuals.  The search direction is the
Mehrotra predictor-corrector with the X^{-1}-scaled (HKM) symmetrization,
which reduces each step to one dense Schur complement system

    [ H  -E' ] [dy ]   [ r1 ]              H_jl = sum_b tr(A_j X^{-1} A_l S).
    [ E   0  ] [dnu] = [ rp ],

Central-path convergence returns the analytic-center optimizer of the
optimal face, so the moment matrix of the returned solution typically has
maximum rank over the optimal set; nothing enforces this, it is a property
of the path.

The solver is deterministic: the seed only perturbs the initial point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .problem import (
    InconsistentEqualities,
    SdpBlock,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverOptions,
)

__all__ = ["solve"]

_STEP_FRACTION = 0.98
_STEP_FRACTION_ENDGAME = 0.999
_DIVERGENCE_TRIP = 3e2   # objective travel (times scale) before ray tests run
_DIVERGENCE_HARD = 1e9   # travel at which divergence is declared outright
_STALL_WINDOW = 20


def _chol(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, with escalating diagonal jitter on failure."""
    side = matrix.shape[0]
    jitter = 0.0
    base = max(float(np.trace(matrix)) / side, 1e-300)
    for _ in range(8):
        try:
            return np.linalg.cholesky(matrix + jitter * np.eye(side))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * base)
    raise np.linalg.LinAlgError("matrix not positive definite even after jitter")


def _max_step(chol_lower: np.ndarray, direction: np.ndarray) -> float:
    """Largest alpha with  M + alpha D  psd,  given M = L L'."""
    w = scipy.linalg.solve_triangular(chol_lower, direction, lower=True)
    w = scipy.linalg.solve_triangular(chol_lower, w.T, lower=True)
    w = (w + w.T) / 2.0
    lam_min = float(np.linalg.eigvalsh(w)[0])
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


@dataclass
class _BlockState:
    data: SdpBlock
    flat: np.ndarray  # (nvar, side*side) view of the pencil coefficients
    x: np.ndarray
    s: np.ndarray

    @property
    def side(self) -> int:
        return self.data.side


class _Iterate:
    def __init__(self, problem: SdpProblem, options: SolverOptions) -> None:
        self.problem = problem
        self.options = options
        nvar = problem.nvar
        rng = np.random.default_rng(options.seed)
        if problem.n_eq:
            y0, *_ = np.linalg.lstsq(problem.eq, problem.eq_rhs, rcond=None)
        else:
            y0 = np.zeros(nvar)
        self.y = y0
        self.nu = np.zeros(problem.n_eq)
        self.blocks: list[_BlockState] = []
        c_scale = max(10.0, float(np.max(np.abs(problem.c))))
        for blk in problem.blocks:
            side = blk.side
            pencil_at_y0 = blk.pencil_value(y0)
            xi = max(10.0, math.sqrt(side), 2.0 * float(np.linalg.norm(pencil_at_y0, 2)))
            eta = max(c_scale, math.sqrt(side))
            # The seed only perturbs the initial point; keep it tiny so
            # symmetric problems stay numerically symmetric.
            perturb = 1e-8 * rng.uniform(0.0, 1.0, size=side)
            x = xi * np.eye(side) * (1.0 + 0.0) + np.diag(xi * perturb)
            s = eta * np.eye(side) + np.diag(eta * 1e-8 * rng.uniform(0.0, 1.0, size=side))
            self.blocks.append(
                _BlockState(blk, blk.coeffs.reshape(blk.nvar, side * side), x, s)
            )
        self.total_dim = sum(b.side for b in self.blocks)
        # Min-norm right inverse of the adjoint map (S_1, ..., S_B) ->
        # sum_b A_b^*(S_b), used to repair the dual Newton equation after
        # the cancellation-prone X^{-1} products of the HKM step.
        adjoint = np.hstack([b.flat for b in self.blocks])
        self.adjoint_pinv = np.linalg.pinv(adjoint, rcond=1e-12)
        self.split_points = np.cumsum([b.side * b.side for b in self.blocks])[:-1]

    def repair_dual_direction(
        self, ds: list[np.ndarray], dnu: np.ndarray, rd: np.ndarray
    ) -> list[np.ndarray]:
        """Shift ds by the min-norm correction restoring the adjoint identity
        sum_b A_b^*(dS_b) + E' dnu = rd to working precision."""
        achieved = np.zeros(self.problem.nvar)
        for b, dsb in zip(self.blocks, ds):
            achieved += b.flat @ dsb.ravel()
        if self.problem.n_eq:
            achieved += self.problem.eq.T @ dnu
        defect = rd - achieved
        correction = self.adjoint_pinv @ defect
        out = []
        for b, dsb, piece in zip(self.blocks, ds, np.split(correction, self.split_points)):
            delta = piece.reshape(b.side, b.side)
            out.append(dsb + (delta + delta.T) / 2.0)
        return out

    # ---- residuals and objectives --------------------------------------

    def pencil_residuals(self) -> list[np.ndarray]:
        return [b.data.pencil_value(self.y) - b.x for b in self.blocks]

    def eq_residual(self) -> np.ndarray:
        if self.problem.n_eq == 0:
            return np.zeros(0)
        return self.problem.eq_rhs - self.problem.eq @ self.y

    def dual_residual(self) -> np.ndarray:
        r = self.problem.c.copy()
        for b in self.blocks:
            r -= b.flat @ b.s.ravel()
        if self.problem.n_eq:
            r -= self.problem.eq.T @ self.nu
        return r

    def mu(self) -> float:
        return sum(float(np.sum(b.x * b.s)) for b in self.blocks) / self.total_dim

    def primal_value(self) -> float:
        return float(self.problem.c @ self.y)

    def dual_value(self) -> float:
        val = float(self.problem.eq_rhs @ self.nu) if self.problem.n_eq else 0.0
        for b in self.blocks:
            val -= float(np.sum(b.data.const * b.s))
        return val


class _KktFactorization:
    """LU of the saddle system [H -E'; E 0], reused across both direction
    solves of one iteration, with one step of iterative refinement.

    The full system is factored rather than the Schur complement of H:
    facial reduction can make the pencil map non-injective (H singular on
    part of null(E)) while the saddle matrix stays nonsingular.
    """

    def __init__(self, h: np.ndarray, eq: np.ndarray) -> None:
        nvar = h.shape[0]
        p = eq.shape[0]
        kkt = np.zeros((nvar + p, nvar + p))
        kkt[:nvar, :nvar] = h
        if p:
            kkt[:nvar, nvar:] = -eq.T
            kkt[nvar:, :nvar] = eq
        self.kkt = kkt
        self.nvar = nvar
        self.lu = scipy.linalg.lu_factor(kkt, check_finite=False)

    def solve(self, r1: np.ndarray, rp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.concatenate([r1, rp])
        sol = scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)
        # Iterative refinement: the saddle matrix turns ill-conditioned as
        # the barrier parameter collapses, and the dual residual floor is
        # set by the accuracy achieved here.
        norm_rhs = float(np.max(np.abs(rhs))) or 1.0
        best_err = np.inf
        for _ in range(3):
            residual = rhs - self.kkt @ sol
            err = float(np.max(np.abs(residual))) / norm_rhs
            if err < 1e-15 or err >= best_err:
                break
            best_err = err
            sol = sol + scipy.linalg.lu_solve(self.lu, residual, check_finite=False)
        return sol[: self.nvar], sol[self.nvar :]


def _primal_reference_ray(
    it: "_Iterate", y_ref: np.ndarray, ref_pencil_norms: list[float]
) -> bool:
    """Test y - y_ref as an improving feasible ray.

    Both points satisfy E y = d exactly, so the difference is in null(E);
    both pencils are psd up to the pencil residual, so the direction's
    cone violation is provably at most (||ref pencil|| + residuals) over
    the drift length.  When the measured violation sits inside that bound
    (plus slack) and the objective strictly decreases along the direction,
    the drift is a certified ray up to the vanishing remnant of the base
    point.
    """
    problem = it.problem
    d = it.y - y_ref
    norm = float(np.linalg.norm(d))
    if norm < 1.0:
        return False
    dhat = d / norm
    # The caller only asks once the objective has travelled a long way, so
    # strict decrease along the drift is all that is required here.
    if float(problem.c @ dhat) >= 0.0:
        return False
    if problem.n_eq and float(np.max(np.abs(problem.eq @ dhat))) > 1e-7:
        return False
    for blk, ref_norm in zip(problem.blocks, ref_pencil_norms):
        pencil = np.tensordot(dhat, blk.coeffs, axes=1)
        pencil = (pencil + pencil.T) / 2.0
        lam_min = float(np.linalg.eigvalsh(pencil)[0])
        remnant = (ref_norm + 1.0) / norm
        if lam_min < -(3.0 * remnant + 1e-6):
            return False
    return True


def _dual_reference_ray(
    it: "_Iterate", nu_ref: np.ndarray, s_ref: list[np.ndarray]
) -> bool:
    """Test the dual drift from a small reference as an improving dual ray."""
    problem = it.problem
    d_nu = it.nu - nu_ref
    d_s = [b.s - sp for b, sp in zip(it.blocks, s_ref)]
    omega = max([1e-300] + [float(np.linalg.norm(m)) for m in d_s] + (
        [float(np.max(np.abs(d_nu)))] if d_nu.size else []
    ))
    if omega < 10.0 * max(1.0, max(float(np.linalg.norm(m)) for m in s_ref)):
        return False
    adj = np.zeros(problem.nvar)
    gain = 0.0
    for b, ds, sp in zip(it.blocks, d_s, s_ref):
        s_hat = ds / omega
        remnant = (float(np.linalg.norm(sp, 2)) + 1.0) / omega
        eigs = np.linalg.eigvalsh((s_hat + s_hat.T) / 2.0)
        if float(eigs[0]) < -(3.0 * remnant + 1e-6):
            return False
        adj += b.flat @ s_hat.ravel()
        gain -= float(np.sum(b.data.const * s_hat))
    if problem.n_eq:
        nu_hat = d_nu / omega
        adj += problem.eq.T @ nu_hat
        gain += float(problem.eq_rhs @ nu_hat)
    dual_res_scale = 1e-6 * (1.0 + float(np.max(np.abs(problem.c))))
    return float(np.max(np.abs(adj))) <= max(1e-6, dual_res_scale) and gain > 0.0


def _solve_ipm(problem: SdpProblem, options: SolverOptions) -> SdpSolution:
    """One run of the predictor-corrector iteration (no presolve)."""
    try:
        it = _Iterate(problem, options)
    except InconsistentEqualities as exc:
        return SdpSolution(
            status=SdpStatus.PRIMAL_INFEASIBLE,
            y=None,
            primal_value=None,
            dual_value=None,
            dual_matrices=None,
            eq_multipliers=None,
            gap=None,
            residuals={},
            iterations=0,
            message=str(exc),
        )

    prob = problem
    norm_c = 1.0 + float(np.max(np.abs(prob.c)))
    norm_d = 1.0 + (float(np.max(np.abs(prob.eq_rhs))) if prob.n_eq else 0.0)
    norm_const = 1.0 + max(
        [0.0] + [float(np.max(np.abs(b.const))) for b in prob.blocks]
    )
    scale0 = 1.0 + abs(it.primal_value())
    merit_history: list[float] = []
    best_merit = np.inf

    def metrics() -> tuple[float, float, float, float, float, float]:
        pobj = it.primal_value()
        dobj = it.dual_value()
        rp = it.eq_residual()
        rps = it.pencil_residuals()
        rd = it.dual_residual()
        pinf_num = max(
            [float(np.max(np.abs(rp))) if rp.size else 0.0]
            + [float(np.max(np.abs(r))) for r in rps]
        )
        pinf = pinf_num / max(norm_d, norm_const)
        dinf = float(np.max(np.abs(rd))) / norm_c
        denom = 1.0 + abs(pobj) + abs(dobj)
        # Complementarity and objective gap usually agree; they separate
        # when the optimal face is unbounded and <X, S> cannot be driven
        # down, in which case |pobj - dobj| with tiny residuals is the
        # meaningful optimality measure (weak duality brackets the optimum).
        relgap = min(it.mu() * it.total_dim / denom, abs(pobj - dobj) / denom)
        return pobj, dobj, pinf, dinf, relgap, it.mu()

    best_snapshot: dict | None = None

    def snapshot() -> dict:
        return {
            "y": it.y.copy(),
            "nu": it.nu.copy(),
            "x": [b.x.copy() for b in it.blocks],
            "s": [b.s.copy() for b in it.blocks],
        }

    def restore(state: dict) -> None:
        it.y = state["y"]
        it.nu = state["nu"]
        for b, x, s in zip(it.blocks, state["x"], state["s"]):
            b.x = x
            b.s = s

    def finish_failure(status: SdpStatus, message: str, iters: int) -> SdpSolution:
        """Report from the best iterate seen; upgrade if it meets tolerances."""
        if best_snapshot is not None:
            restore(best_snapshot)
            _, _, pinf, dinf, relgap, _ = metrics()
            if (
                relgap <= options.gap_tol
                and pinf <= options.feas_tol
                and dinf <= options.feas_tol
            ):
                return build_solution(SdpStatus.OPTIMAL, "converged (best iterate)", iters)
        return build_solution(status, message, iters)

    def build_solution(status: SdpStatus, message: str, iters: int) -> SdpSolution:
        pobj, dobj, pinf, dinf, relgap, _ = metrics()
        rp = it.eq_residual()
        min_eig = min(
            float(np.linalg.eigvalsh(b.data.pencil_value(it.y))[0]) for b in it.blocks
        )
        return SdpSolution(
            status=status,
            y=it.y.copy(),
            primal_value=pobj,
            dual_value=dobj,
            dual_matrices=[b.s.copy() for b in it.blocks],
            eq_multipliers=it.nu.copy(),
            gap=pobj - dobj,
            residuals={
                "primal_eq": float(np.max(np.abs(rp))) if rp.size else 0.0,
                "block_min_eigenvalue": min_eig,
                "dual_feasibility": float(np.max(np.abs(it.dual_residual()))),
                "relative_gap": relgap,
            },
            iterations=iters,
            message=message,
            eq_rows=prob.eq,
            eq_rows_rhs=prob.eq_rhs,
        )

    # Smallest-norm iterates serve as drift references for ray detection.
    y_ref = it.y.copy()
    y_ref_norm = float(np.linalg.norm(y_ref))
    ref_pencil_norms = [
        float(np.linalg.norm(b.data.pencil_value(y_ref), 2)) for b in it.blocks
    ]
    pobj_ref = it.primal_value()
    nu_ref = it.nu.copy()
    s_ref = [b.s.copy() for b in it.blocks]
    dual_ref_norm = max([1.0] + [float(np.linalg.norm(s)) for s in s_ref])
    dobj_ref = it.dual_value()

    for iteration in range(options.max_iter):
        pobj, dobj, pinf, dinf, relgap, mu = metrics()
        merit = max(relgap, pinf, dinf)
        merit_history.append(merit)
        if merit < best_merit:
            best_merit = merit
            best_snapshot = snapshot()
        if options.verbose:
            print(
                f"  it {iteration:3d}  pobj {pobj:+.9e}  dobj {dobj:+.9e}  "
                f"gap {relgap:.2e}  pinf {pinf:.2e}  dinf {dinf:.2e}"
            )

        if relgap <= options.gap_tol and pinf <= options.feas_tol and dinf <= options.feas_tol:
            return build_solution(SdpStatus.OPTIMAL, "converged", iteration)

        y_norm = float(np.linalg.norm(it.y))
        if y_norm < y_ref_norm and pinf <= 100.0 * options.feas_tol:
            y_ref = it.y.copy()
            y_ref_norm = y_norm
            ref_pencil_norms = [
                float(np.linalg.norm(b.data.pencil_value(y_ref), 2)) for b in it.blocks
            ]
            pobj_ref = pobj
        dual_norm = max([1.0] + [float(np.linalg.norm(b.s)) for b in it.blocks])
        if dual_norm < dual_ref_norm and dinf <= 100.0 * options.feas_tol:
            nu_ref = it.nu.copy()
            s_ref = [b.s.copy() for b in it.blocks]
            dual_ref_norm = dual_norm
            dobj_ref = dobj

        # Divergence: an unbounded problem slides the objective down a
        # feasible ray forever, an infeasible one blows the multipliers up
        # an improving dual ray; neither can close the gap.  The drift from
        # the small reference iterate is the candidate ray, testable with
        # provable remnant bounds once the trajectory has travelled far
        # enough.
        stuck = (
            len(merit_history) > _STALL_WINDOW
            and merit_history[-1] > 0.9 * merit_history[-1 - _STALL_WINDOW]
            and merit > 100.0 * options.gap_tol
        )
        if pobj < pobj_ref - _DIVERGENCE_TRIP * scale0 and pinf <= 100.0 * options.feas_tol:
            if (stuck and _primal_reference_ray(it, y_ref, ref_pencil_norms)) or (
                pobj < pobj_ref - _DIVERGENCE_HARD * scale0
            ):
                return build_solution(
                    SdpStatus.DUAL_INFEASIBLE_OR_UNBOUNDED,
                    "objective decreases along a feasible ray",
                    iteration,
                )
        if dobj > dobj_ref + _DIVERGENCE_TRIP * scale0 and dinf <= 100.0 * options.feas_tol:
            if (stuck and _dual_reference_ray(it, nu_ref, s_ref)) or (
                dobj > dobj_ref + _DIVERGENCE_HARD * scale0
            ):
                return build_solution(
                    SdpStatus.PRIMAL_INFEASIBLE,
                    "dual objective increases along an improving ray",
                    iteration,
                )

        # Catastrophic deterioration (the no-interior signature: the dual
        # residual explodes once the barrier parameter collapses) is not
        # worth grinding on; hand off to facial reduction right away.
        if iteration > 5 and merit > 1e4 * max(best_merit, options.gap_tol):
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE,
                f"iterates deteriorated (merit {merit:.2e}, best {best_merit:.2e})",
                iteration,
            )

        # Factorizations and the Schur complement.
        try:
            chol_x = [_chol(b.x) for b in it.blocks]
            chol_s = [_chol(b.s) for b in it.blocks]
            x_inv = []
            for b, lx in zip(it.blocks, chol_x):
                inv = scipy.linalg.cho_solve((lx, True), np.eye(b.side), check_finite=False)
                x_inv.append((inv + inv.T) / 2.0)
            h = np.zeros((prob.nvar, prob.nvar))
            t_flat = []
            for b, xi in zip(it.blocks, x_inv):
                t = np.matmul(xi, np.matmul(b.data.coeffs, b.s))  # (N, s, s)
                tf = t.transpose(0, 2, 1).reshape(prob.nvar, -1)
                t_flat.append(tf)
                h += b.flat @ tf.T
            h = (h + h.T) / 2.0
        except np.linalg.LinAlgError as exc:
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE, f"factorization failed: {exc}", iteration
            )

        rp = it.eq_residual()
        rd = it.dual_residual()
        pencil_res = it.pencil_residuals()
        try:
            kkt = _KktFactorization(h, prob.eq)
        except (np.linalg.LinAlgError, ValueError) as exc:
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE, f"KKT factorization failed: {exc}", iteration
            )

        def direction(k_blocks: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, list[np.ndarray], list[np.ndarray]]:
            r1 = -rd.copy()
            for b, kb in zip(it.blocks, k_blocks):
                r1 += b.flat @ kb.ravel()
            dy, dnu = kkt.solve(r1, rp)
            dx, ds = [], []
            for b, xi, kb, res in zip(it.blocks, x_inv, k_blocks, pencil_res):
                dxb = np.tensordot(dy, b.data.coeffs, axes=1) + res
                dxb = (dxb + dxb.T) / 2.0
                dsb = kb - xi @ dxb @ b.s
                dsb = (dsb + dsb.T) / 2.0
                dx.append(dxb)
                ds.append(dsb)
            ds = it.repair_dual_direction(ds, dnu, rd)
            return dy, dnu, dx, ds

        # Predictor (affine scaling).
        k_aff = [
            -b.s - xi @ res @ b.s
            for b, xi, res in zip(it.blocks, x_inv, pencil_res)
        ]
        try:
            dy_a, dnu_a, dx_a, ds_a = direction(k_aff)
        except np.linalg.LinAlgError as exc:
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE, f"KKT solve failed: {exc}", iteration
            )
        alpha_pa = min(1.0, min(_max_step(lx, dxb) for lx, dxb in zip(chol_x, dx_a)))
        alpha_da = min(1.0, min(_max_step(ls, dsb) for ls, dsb in zip(chol_s, ds_a)))
        mu_aff = (
            sum(
                float(np.sum((b.x + alpha_pa * dxb) * (b.s + alpha_da * dsb)))
                for b, dxb, dsb in zip(it.blocks, dx_a, ds_a)
            )
            / it.total_dim
        )
        sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-10))

        # Corrector with the second-order term.
        k_cor = []
        for b, xi, res, dxb, dsb in zip(it.blocks, x_inv, pencil_res, dx_a, ds_a):
            target = sigma * mu * np.eye(b.side) - dxb @ dsb
            k_cor.append(xi @ target - b.s - xi @ res @ b.s)
        try:
            dy, dnu, dx, ds = direction(k_cor)
        except np.linalg.LinAlgError as exc:
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE, f"KKT solve failed: {exc}", iteration
            )

        tau = _STEP_FRACTION_ENDGAME if merit < 1e-5 else _STEP_FRACTION
        alpha_p = min(1.0, tau * min(_max_step(lx, dxb) for lx, dxb in zip(chol_x, dx)))
        alpha_d = min(1.0, tau * min(_max_step(ls, dsb) for ls, dsb in zip(chol_s, ds)))
        if alpha_p <= 1e-10 and alpha_d <= 1e-10:
            return finish_failure(
                SdpStatus.NUMERICAL_FAILURE,
                f"step length collapsed at iteration {iteration}",
                iteration,
            )

        it.y = it.y + alpha_p * dy
        if prob.n_eq:
            it.nu = it.nu + alpha_d * dnu
        for b, dxb, dsb in zip(it.blocks, dx, ds):
            b.x = b.x + alpha_p * dxb
            b.x = (b.x + b.x.T) / 2.0
            b.s = b.s + alpha_d * dsb
            b.s = (b.s + b.s.T) / 2.0

    return finish_failure(
        SdpStatus.MAX_ITERATIONS,
        f"iteration limit {options.max_iter} reached",
        options.max_iter,
    )


# ---------------------------------------------------------------------------
# Facial reduction.  Relaxations with equality rows can confine the feasible
# set to a proper face of the psd cone; without a strictly feasible point
# the dual is not attained and the iteration above stalls.  The recovery:
# probe for the largest uniform eigenvalue bound on the feasible set,
#
#     max t   s.t.   C_b + A_b(y) psd-dominates t I,   E y = d,   t <= 1,
#
# which always has interior points (take t very negative).  When t* is
# zero, the blocks at the probe's max-rank solution expose the forced
# kernel; restrict each block to the complement, append the linear rows
# "block times kernel vector = 0", and re-solve.  The reduction preserves
# the feasible set and value exactly, and dual matrices lift back.
# ---------------------------------------------------------------------------

_MAX_REDUCTION_ROUNDS = 3


@dataclass
class _BlockLift:
    """Cumulative orthonormal map from reduced block coordinates back to the
    original ones; None means the block was dropped entirely."""

    map: np.ndarray | None


def _slater_probe(problem: SdpProblem, options: SolverOptions) -> tuple[float, np.ndarray] | None:
    nvar = problem.nvar
    aux_blocks = []
    for blk in problem.blocks:
        side = blk.side
        coeffs = np.concatenate([blk.coeffs, -np.eye(side)[None, :, :]], axis=0)
        aux_blocks.append(SdpBlock(coeffs=coeffs, const=blk.const, label=blk.label))
    cap = np.zeros((nvar + 1, 1, 1))
    cap[nvar, 0, 0] = -1.0
    aux_blocks.append(SdpBlock(coeffs=cap, const=np.array([[1.0]]), label="slater-cap"))
    c_aux = np.zeros(nvar + 1)
    c_aux[nvar] = -1.0
    eq_aux = (
        np.hstack([problem.eq, np.zeros((problem.n_eq, 1))])
        if problem.n_eq
        else np.zeros((0, nvar + 1))
    )
    aux = SdpProblem(c=c_aux, blocks=aux_blocks, eq=eq_aux, eq_rhs=problem.eq_rhs.copy())
    aux_opts = SolverOptions(
        max_iter=options.max_iter,
        gap_tol=max(options.gap_tol, 1e-9),
        feas_tol=max(options.feas_tol, 1e-9),
        seed=options.seed,
        verbose=False,
    )
    sol = _solve_ipm(aux, aux_opts)
    if sol.y is None:
        return None
    usable = sol.status is SdpStatus.OPTIMAL or (
        sol.status is SdpStatus.MAX_ITERATIONS
        and sol.residuals.get("primal_eq", np.inf) < 1e-6
    )
    if not usable:
        return None
    return -float(sol.primal_value), sol.y[:nvar]


def _reduce_problem(
    problem: SdpProblem, y_probe: np.ndarray, t_star: float, lifts: list[_BlockLift]
) -> SdpProblem | None:
    """Shrink blocks to the complement of their kernel at the probe point."""
    new_blocks: list[SdpBlock] = []
    extra_rows: list[np.ndarray] = []
    extra_rhs: list[float] = []
    changed = False
    for blk, lift in zip(problem.blocks, lifts):
        value = blk.pencil_value(y_probe)
        eigvals, eigvecs = np.linalg.eigh(value)
        lam_max = max(float(eigvals[-1]), 1.0)
        threshold = max(1e-7 * lam_max, 10.0 * abs(t_star))
        kernel = eigvecs[:, eigvals < threshold]
        if kernel.shape[1] == 0:
            new_blocks.append(blk)
            continue
        changed = True
        for col in range(kernel.shape[1]):
            q = kernel[:, col]
            rows = np.tensordot(blk.coeffs, q, axes=([2], [0]))  # (nvar, side)
            extra_rows.append(rows.T)
            extra_rhs.extend((-blk.const @ q).tolist())
        complement = eigvecs[:, eigvals >= threshold]
        if complement.shape[1] == 0:
            lift.map = None
            continue
        reduced_coeffs = np.einsum("mij,ia,jb->mab", blk.coeffs, complement, complement)
        reduced_const = complement.T @ blk.const @ complement
        new_blocks.append(SdpBlock(reduced_coeffs, reduced_const, blk.label))
        lift.map = lift.map @ complement if lift.map is not None else complement
    if not changed or not new_blocks:
        return None
    raw_eq = np.vstack([problem.eq] + extra_rows) if extra_rows else problem.eq
    raw_rhs = np.concatenate([problem.eq_rhs, np.array(extra_rhs)])
    try:
        return SdpProblem(c=problem.c.copy(), blocks=new_blocks, eq=raw_eq, eq_rhs=raw_rhs)
    except InconsistentEqualities:
        return None


def solve(problem: SdpProblem, options: SolverOptions | None = None, **kwargs) -> SdpSolution:
    """Solve an SdpProblem, with facial-reduction recovery on stalls.

    Keyword arguments override fields of SolverOptions (max_iter, gap_tol,
    feas_tol, seed, verbose).  Statuses other than OPTIMAL leave the last
    iterate in the solution for inspection.  eq_rows/eq_rows_rhs of the
    result hold the equality system the multipliers refer to, which gains
    derived rows when facial reduction was needed.
    """
    if options is None:
        options = SolverOptions()
    if kwargs:
        options = SolverOptions(**{**options.__dict__, **kwargs})
    solution = _solve_ipm(problem, options)
    if solution.status not in (SdpStatus.NUMERICAL_FAILURE, SdpStatus.MAX_ITERATIONS):
        return solution

    # Identity lifts; entries shrink (or become None) as blocks reduce.
    current = problem
    lifts = [
        _BlockLift(np.eye(blk.side)) for blk in problem.blocks
    ]
    best = solution
    for _ in range(_MAX_REDUCTION_ROUNDS):
        probe = _slater_probe(current, options)
        if probe is None:
            break
        t_star, y_probe = probe
        block_scale = max(
            [1.0] + [float(np.linalg.norm(b.pencil_value(y_probe), 2)) for b in current.blocks]
        )
        if t_star > 1e-6 * block_scale:
            break  # strictly feasible; the stall was not a Slater failure
        reduced = _reduce_problem(current, y_probe, t_star, lifts)
        if reduced is None:
            break
        current = reduced
        attempt = _solve_ipm(current, options)
        if attempt.status in (
            SdpStatus.OPTIMAL,
            SdpStatus.PRIMAL_INFEASIBLE,
            SdpStatus.DUAL_INFEASIBLE_OR_UNBOUNDED,
        ):
            return _lift_solution(attempt, problem, current, lifts)
        best = _lift_solution(attempt, problem, current, lifts)
    return best


def _lift_solution(
    solution: SdpSolution,
    original: SdpProblem,
    reduced: SdpProblem,
    lifts: list[_BlockLift],
) -> SdpSolution:
    """Map dual matrices of the reduced problem back to the original blocks."""
    if solution.dual_matrices is not None:
        lifted = []
        position = 0
        for blk, lift in zip(original.blocks, lifts):
            if lift.map is None:
                lifted.append(np.zeros((blk.side, blk.side)))
            else:
                gram = solution.dual_matrices[position]
                lifted.append(lift.map @ gram @ lift.map.T)
                position += 1
        solution.dual_matrices = lifted
    if solution.y is not None:
        min_eig = min(
            float(np.linalg.eigvalsh(blk.pencil_value(solution.y))[0])
            for blk in original.blocks
        )
        solution.residuals["block_min_eigenvalue"] = min_eig
    return solution
