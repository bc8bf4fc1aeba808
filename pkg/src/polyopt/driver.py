"""The certification loop over relaxation orders.

For k = k_min..k_max: build the flavor's moment SDP, solve it, test the
optimizer for a flat truncation, and on success extract atoms and verify
them against the problem (feasibility plus objective match).  A verified
extraction certifies finite convergence: the relaxation value equals the
global minimum and the atoms are global minimizers.  When extraction at the
smallest flat order fails, every larger flat order in the report is tried
before moving to the next k; the top truncation y|_{2k-2} is the one the
theory expects to become flat eventually, so large flat orders are worth
retrying.

When no order certifies, the run reports bounds plus rank profiles (a
persistently climbing rank profile is the signature of an infinite
minimizer set, which can never pass the rank test) and a truncation trace
||y_k|_{2t0} - y_{k-1}|_{2t0}||_2 that should decay when the hierarchy is
converging to the moments of a measure on the minimizer set.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .extraction import AtomicMeasure, ExtractionFailed, VerificationReport, extract_atoms, verify_atoms
from .moment import FlatnessReport, Tms, check_flat_truncation
from .polynomial import Polynomial
from .relaxation import FLAVORS, MomentSdp, Problem, build_relaxation, minimum_order
from .sdp import SdpSolution, SdpStatus, SolverOptions, solve

__all__ = [
    "HierarchyOptions",
    "OrderRecord",
    "HierarchyRun",
    "run_hierarchy",
    "compare_flavors",
    "FlavorComparison",
]

DEFAULT_EXTRA_ORDERS = 4


@dataclass
class HierarchyOptions:
    k_min: int | None = None  # None: the flavor's minimum order
    k_max: int | None = None  # None: k_min + DEFAULT_EXTRA_ORDERS
    rank_tol: float = 1e-6
    solver_tol: float = 1e-8
    verify_tol: float = 1e-6
    seed: int = 0
    monitor_degree: int | None = None
    max_iter: int = 100
    verbose: bool = False


@dataclass
class OrderRecord:
    """Everything observed at one relaxation order."""

    order: int
    status: SdpStatus
    primal_value: float | None
    dual_value: float | None
    gap: float | None
    solution: SdpSolution
    moments: Tms | None
    flatness: FlatnessReport | None
    extraction_note: str
    measure: AtomicMeasure | None
    verification: VerificationReport | None
    seconds: float


@dataclass
class HierarchyRun:
    """Outcome of a hierarchy sweep: per-order records plus the verdict."""

    flavor: str
    problem: Problem
    records: list[OrderRecord] = field(default_factory=list)
    outcome: str = "exhausted"  # certified | exhausted | solver_failed
    certificate: AtomicMeasure | None = None
    f_min_estimate: float | None = None
    certified_order: int | None = None
    flat_order: int | None = None
    failed_order: int | None = None
    failed_status: SdpStatus | None = None
    monitor_degree: int | None = None
    trace: list[float] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.outcome == "certified"

    def bounds(self) -> tuple[float | None, float | None]:
        """Last available (primal, dual) relaxation values."""
        for record in reversed(self.records):
            if record.primal_value is not None:
                return record.primal_value, record.dual_value
        return None, None


def _usable_for_extraction(solution: SdpSolution, opts: HierarchyOptions) -> bool:
    """Whether the moment vector supports a sound certification attempt.

    Extraction does not need the solver's optimality bit: it needs a
    feasible moment vector (the flat-truncation theorem applies to it), a
    near-feasible dual (so the dual value is a valid lower bound), and an
    objective sandwich |primal - dual| no wider than the verification
    tolerance.  An interior-point run that ran out of iterations a factor
    beyond its gap target still satisfies all three; verify_atoms has the
    final word either way.
    """
    if solution.status is SdpStatus.OPTIMAL:
        return True
    if solution.y is None or solution.status in (
        SdpStatus.PRIMAL_INFEASIBLE,
        SdpStatus.DUAL_INFEASIBLE_OR_UNBOUNDED,
    ):
        return False
    res = solution.residuals
    slack = opts.verify_tol
    return (
        res.get("primal_eq", np.inf) <= slack
        and res.get("block_min_eigenvalue", -np.inf) >= -slack
        and res.get("dual_feasibility", np.inf) <= slack
        and solution.gap is not None
        and abs(solution.gap) <= slack * (1.0 + abs(solution.primal_value))
    )


def _verification_problem(problem: Problem, msdp: MomentSdp) -> Problem:
    """The constraint set extracted atoms must satisfy for this flavor."""
    if msdp.flavor == "putinar" or msdp.flavor == "schmudgen":
        return problem
    if msdp.flavor == "sos_unconstrained":
        return Problem(problem.objective)
    # gradient / jacobian_single: the builder's equality generators are the
    # conditions that carve out the critical set.
    return Problem(
        problem.objective,
        problem.inequalities,
        msdp.equality_generators,
    )


def run_hierarchy(
    problem: Problem,
    flavor: str = "putinar",
    options: HierarchyOptions | None = None,
) -> HierarchyRun:
    """Solve orders k_min..k_max until a verified flat truncation appears.

    Exhausting the order range is a normal outcome (bounds are still
    reported); a non-optimal solver status ends the run as solver_failed.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    opts = options or HierarchyOptions()
    k_floor = minimum_order(problem, flavor)
    k_min = opts.k_min if opts.k_min is not None else k_floor
    if k_min < k_floor:
        raise ValueError(f"k_min={k_min} below the flavor minimum order {k_floor}")
    k_max = opts.k_max if opts.k_max is not None else k_min + DEFAULT_EXTRA_ORDERS
    if k_max < k_min:
        raise ValueError("k_max must be at least k_min")

    run = HierarchyRun(flavor=flavor, problem=problem)
    monitor_t = opts.monitor_degree
    if monitor_t is not None:
        monitor_t = min(monitor_t, k_min)
        run.monitor_degree = monitor_t
    previous_moments: Tms | None = None

    for k in range(k_min, k_max + 1):
        start = time.monotonic()
        msdp = build_relaxation(problem, flavor, k)
        solver_opts = SolverOptions(
            max_iter=opts.max_iter,
            gap_tol=opts.solver_tol,
            feas_tol=opts.solver_tol,
            seed=opts.seed,
            verbose=opts.verbose,
        )
        solution = solve(msdp.to_sdp_problem(), solver_opts)
        record = OrderRecord(
            order=k,
            status=solution.status,
            primal_value=solution.primal_value,
            dual_value=solution.dual_value,
            gap=solution.gap,
            solution=solution,
            moments=None,
            flatness=None,
            extraction_note="",
            measure=None,
            verification=None,
            seconds=0.0,
        )
        if not _usable_for_extraction(solution, opts):
            record.seconds = time.monotonic() - start
            run.records.append(record)
            run.failed_order = k
            run.failed_status = solution.status
            # An infeasible moment problem stays infeasible at higher
            # orders (truncation of a feasible sequence is feasible), and
            # the SOS bound of an even-degree objective does not improve
            # with the order, so an unbounded flavor stays unbounded.
            # Gradient and Jacobian relaxations, by contrast, gain equality
            # entries with k and are routinely unbounded below their
            # useful order; keep climbing.
            final = solution.status is SdpStatus.PRIMAL_INFEASIBLE or (
                flavor == "sos_unconstrained"
                and solution.status is SdpStatus.DUAL_INFEASIBLE_OR_UNBOUNDED
            )
            if final:
                run.outcome = "solver_failed"
                return run
            continue

        y = Tms(msdp.nvars, k, solution.y)
        record.moments = y
        report = check_flat_truncation(y, msdp.d_f, msdp.d_g_flat, opts.rank_tol)
        record.flatness = report

        # Monitor trace at a fixed truncation degree.  The default follows
        # the flatness window heuristic max(d_f, d_g + r - 1) using the rank
        # seen at the top tested order of the first solve, clipped so every
        # order can be truncated to it.
        if monitor_t is None:
            r_guess = report.rank_profile[-1]
            monitor_t = min(k_min, max(msdp.d_f, msdp.d_g_flat + r_guess - 1))
            run.monitor_degree = monitor_t
        if previous_moments is not None:
            delta = (
                y.truncate(monitor_t).values - previous_moments.truncate(monitor_t).values
            )
            run.trace.append(float(np.linalg.norm(delta)))
        previous_moments = y

        verification_problem = _verification_problem(problem, msdp)
        notes = []
        for t in report.passing_orders():
            r = report.rank_at(t)
            z = y.truncate(t)
            try:
                measure = extract_atoms(z, r, eps=opts.rank_tol, seed=opts.seed)
            except ExtractionFailed as exc:
                notes.append(f"t={t}: {exc.reason}")
                continue
            verification = verify_atoms(
                measure, verification_problem, z, solution.primal_value, opts.verify_tol
            )
            if verification.passed:
                record.measure = measure
                record.verification = verification
                record.extraction_note = f"certified at t={t} with {measure.count} atoms"
                record.seconds = time.monotonic() - start
                run.records.append(record)
                run.outcome = "certified"
                run.certificate = measure
                run.f_min_estimate = solution.primal_value
                run.certified_order = k
                run.flat_order = t
                return run
            notes.append(f"t={t}: atoms failed verification")
        record.extraction_note = (
            "; ".join(notes) if notes else "no flat truncation"
        )
        record.seconds = time.monotonic() - start
        run.records.append(record)

    if run.records and run.records[-1].status is not SdpStatus.OPTIMAL:
        run.outcome = "solver_failed"
    else:
        run.outcome = "exhausted"
        run.failed_order = None
        run.failed_status = None
    return run


@dataclass
class FlavorComparison:
    """Per (flavor, order) relaxation values with dominance checks."""

    rows: list[dict]
    dominance_violations: list[str]

    def value(self, flavor: str, order: int) -> float | None:
        for row in self.rows:
            if row["flavor"] == flavor and row["order"] == order:
                return row["value"]
        return None


def compare_flavors(
    problem: Problem,
    flavors: tuple[str, ...],
    orders: tuple[int, ...],
    options: HierarchyOptions | None = None,
) -> FlavorComparison:
    """Tabulate relaxation bounds across flavors at common orders.

    Records wall time and flatness per cell and flags violations of the
    expected orderings: preordering bounds dominate quadratic-module bounds
    at every common order, and both are monotone in the order.
    """
    opts = options or HierarchyOptions()
    rows: list[dict] = []
    for flavor in flavors:
        if flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {flavor!r}")
        k_floor = minimum_order(problem, flavor)
        for k in orders:
            if k < k_floor:
                continue
            start = time.monotonic()
            msdp = build_relaxation(problem, flavor, k)
            solution = solve(
                msdp.to_sdp_problem(),
                SolverOptions(
                    max_iter=opts.max_iter,
                    gap_tol=opts.solver_tol,
                    feas_tol=opts.solver_tol,
                    seed=opts.seed,
                ),
            )
            flat = None
            if solution.status is SdpStatus.OPTIMAL:
                y = Tms(msdp.nvars, k, solution.y)
                flat = check_flat_truncation(
                    y, msdp.d_f, msdp.d_g_flat, opts.rank_tol
                ).flat_order
            rows.append(
                {
                    "flavor": flavor,
                    "order": k,
                    "status": solution.status.value,
                    "value": solution.primal_value
                    if solution.status is SdpStatus.OPTIMAL
                    else None,
                    "flat_order": flat,
                    "seconds": time.monotonic() - start,
                }
            )
    comparison = FlavorComparison(rows=rows, dominance_violations=[])
    tol = 1e-7
    for k in orders:
        put = comparison.value("putinar", k)
        sch = comparison.value("schmudgen", k)
        if put is not None and sch is not None and put > sch + tol:
            comparison.dominance_violations.append(
                f"order {k}: putinar bound {put:.9g} exceeds schmudgen bound {sch:.9g}"
            )
    for flavor in flavors:
        values = [
            (row["order"], row["value"])
            for row in rows
            if row["flavor"] == flavor and row["value"] is not None
        ]
        for (k1, v1), (k2, v2) in zip(values, values[1:]):
            if k2 > k1 and v2 < v1 - tol:
                comparison.dominance_violations.append(
                    f"{flavor}: bound decreases from order {k1} ({v1:.9g}) "
                    f"to order {k2} ({v2:.9g})"
                )
    return comparison
