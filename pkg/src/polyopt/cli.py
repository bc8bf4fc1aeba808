"""Command-line entry point: parse a problem file, run the hierarchy, emit
a JSON result document.

Problem file format (whitespace-insensitive polynomials, one directive per
line, '#' starts a comment):

    vars: x1 x2
    minimize: -x1 - x2
    subject_to:
      1 - x1^2 - x2^2 >= 0
    ball_radius: 2

`vars:` may be omitted (variables are then inferred from the largest index
used); `subject_to:` and `ball_radius:` are optional.  A ball_radius R adds
the constraint R - ||x||^2 >= 0.

Exit codes: 0 certified, 1 usage or parse error, 2 order range exhausted
without a certificate (bounds still reported), 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

from . import __version__
from .driver import HierarchyOptions, HierarchyRun, compare_flavors, run_hierarchy
from .polynomial import Polynomial, PolynomialParseError, format_polynomial, parse_polynomial
from .relaxation import Problem, build_relaxation, minimum_order
from .sdp import export_sdpa

__all__ = ["ProblemFile", "ProblemSyntaxError", "parse_problem", "parse_problem_file", "main"]

EXIT_CERTIFIED = 0
EXIT_USAGE = 1
EXIT_EXHAUSTED = 2
EXIT_SOLVER_FAILED = 3

_FLAVOR_BY_FLAG = {
    "putinar": "putinar",
    "schmudgen": "schmudgen",
    "sos": "sos_unconstrained",
    "gradient": "gradient",
    "jacobian": "jacobian_single",
}


class ProblemSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ProblemFile:
    """Parsed problem file: the optimization data plus presentation info."""

    problem: Problem  # ball constraint already appended when present
    declared_vars: tuple[str, ...]
    objective_text: str
    constraint_texts: tuple[str, ...]
    ball_radius: float | None
    source: str


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_problem_file(text: str) -> ProblemFile:
    lines = text.splitlines()
    declared: list[str] | None = None
    objective: Polynomial | None = None
    objective_text = ""
    constraints: list[tuple[str, str, int, int]] = []  # (poly text, op, line, col)
    ball_radius: float | None = None
    in_subject_to = False
    nvars: int | None = None

    def declared_count() -> int | None:
        return nvars

    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        indent = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("vars:"):
            in_subject_to = False
            body = stripped[len("vars:"):].strip()
            names = body.split()
            if not names:
                raise ProblemSyntaxError("vars: needs at least one variable", lineno)
            for pos, name in enumerate(names, start=1):
                if not (name.startswith("x") and name[1:].isdigit()):
                    raise ProblemSyntaxError(
                        f"variable names look like x1, x2, ...; got {name!r}", lineno
                    )
            expected = [f"x{i}" for i in range(1, len(names) + 1)]
            if names != expected:
                raise ProblemSyntaxError(
                    f"variables must be declared in order {' '.join(expected)}", lineno
                )
            declared = names
            nvars = len(names)
        elif stripped.startswith("minimize:"):
            in_subject_to = False
            if objective is not None:
                raise ProblemSyntaxError("duplicate minimize: line", lineno)
            body = stripped[len("minimize:"):]
            col = line.index("minimize:") + len("minimize:") + 1
            try:
                objective = parse_polynomial(body, nvars, lineno, col - 1)
            except PolynomialParseError as exc:
                raise ProblemSyntaxError(exc.message, exc.line, exc.column) from exc
            objective_text = body.strip()
        elif stripped.startswith("subject_to:"):
            if stripped != "subject_to:":
                raise ProblemSyntaxError("subject_to: takes no inline text", lineno)
            in_subject_to = True
        elif stripped.startswith("ball_radius:"):
            in_subject_to = False
            body = stripped[len("ball_radius:"):].strip()
            try:
                ball_radius = float(body)
            except ValueError:
                raise ProblemSyntaxError(
                    f"ball_radius: needs a number, got {body!r}", lineno
                ) from None
            if ball_radius <= 0:
                raise ProblemSyntaxError("ball_radius must be positive", lineno)
        elif in_subject_to:
            for op in (">=", "=="):
                pos = stripped.find(op)
                if pos >= 0:
                    lhs = line[: line.index(op)]
                    rhs = stripped[pos + 2 :].strip()
                    if rhs != "0":
                        raise ProblemSyntaxError(
                            f"constraints end in '{op} 0', got {rhs!r}",
                            lineno,
                            line.index(op) + 3,
                        )
                    constraints.append((lhs, op, lineno, indent))
                    break
            else:
                raise ProblemSyntaxError(
                    "constraint lines look like '<poly> >= 0' or '<poly> == 0'", lineno
                )
        else:
            raise ProblemSyntaxError(
                f"unrecognized directive {stripped.split(':')[0] + ':' if ':' in stripped else stripped!r}",
                lineno,
            )

    if objective is None:
        raise ProblemSyntaxError("missing minimize: line", max(1, len(lines)))

    # With no vars: line, infer the count from every polynomial in the file.
    if nvars is None:
        seen = objective.nvars
        parsed_constraints: list[tuple[Polynomial, str]] = []
        for text_piece, op, lineno, col in constraints:
            p = parse_polynomial(text_piece, None, lineno, 0)
            seen = max(seen, p.nvars)
            parsed_constraints.append((p, op))
        nvars = seen
        objective = _widen(objective, nvars)
        parsed = [(_widen(p, nvars), op) for p, op in parsed_constraints]
    else:
        parsed = []
        for text_piece, op, lineno, col in constraints:
            try:
                parsed.append((parse_polynomial(text_piece, nvars, lineno, 0), op))
            except PolynomialParseError as exc:
                raise ProblemSyntaxError(exc.message, exc.line, exc.column) from exc

    inequalities = tuple(p for p, op in parsed if op == ">=")
    equalities = tuple(p for p, op in parsed if op == "==")
    problem = Problem(objective, inequalities, equalities)
    if ball_radius is not None:
        problem = problem.with_ball(ball_radius)
    return ProblemFile(
        problem=problem,
        declared_vars=tuple(declared) if declared else tuple(f"x{i}" for i in range(1, nvars + 1)),
        objective_text=objective_text,
        constraint_texts=tuple(f"{t.strip()} {op} 0" for t, op, _, _ in constraints),
        ball_radius=ball_radius,
        source=text,
    )


def _widen(p: Polynomial, nvars: int) -> Polynomial:
    if p.nvars == nvars:
        return p
    return Polynomial(
        nvars,
        {m.exponents + (0,) * (nvars - p.nvars): c for m, c in p.terms.items()},
    )


def parse_problem(text: str) -> Problem:
    """Problem-file text to a Problem (ball constraint included)."""
    return parse_problem_file(text).problem


# ---------------------------------------------------------------------------
# Result document
# ---------------------------------------------------------------------------


def _finite_or_none(value) -> float | None:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def result_document(
    parsed: ProblemFile,
    flavor: str,
    run: HierarchyRun,
    options: HierarchyOptions,
    total_seconds: float,
    comparison=None,
) -> dict:
    problem = parsed.problem
    orders = []
    for record in run.records:
        orders.append(
            {
                "k": record.order,
                "status": record.status.value,
                "primal_value": _finite_or_none(record.primal_value),
                "dual_value": _finite_or_none(record.dual_value),
                "gap": _finite_or_none(record.gap),
                "rank_profile": list(record.flatness.rank_profile)
                if record.flatness
                else None,
                "flat_order": record.flatness.flat_order if record.flatness else None,
                "extraction": record.extraction_note,
                "seconds": record.seconds,
            }
        )
    certificate = None
    moments = None
    if run.certificate is not None:
        measure = run.certificate
        final_record = run.records[-1]
        verification = final_record.verification
        certificate = {
            "atoms": [[float(x) for x in atom] for atom in measure.atoms],
            "weights": [float(w) for w in measure.weights],
            "moment_residual": _finite_or_none(measure.residual),
            "objective_values": [
                _finite_or_none(v) for v in verification.objective_values
            ],
            "inequality_values": {
                name: [_finite_or_none(v) for v in vals]
                for name, vals in verification.inequality_values.items()
            },
            "equality_values": {
                name: [_finite_or_none(v) for v in vals]
                for name, vals in verification.equality_values.items()
            },
        }
        moments = [
            [list(exps), _finite_or_none(value)]
            for exps, value in final_record.moments.serialize()
        ]
    last_primal, last_dual = run.bounds()
    document = {
        "tool": {"name": "polyopt", "version": __version__},
        "problem": {
            "vars": list(parsed.declared_vars),
            "minimize": format_polynomial(problem.objective),
            "inequalities": [format_polynomial(g) for g in problem.inequalities],
            "equalities": [format_polynomial(h) for h in problem.equalities],
            "ball_radius": parsed.ball_radius,
        },
        "flavor": flavor,
        "options": {
            "order_min": options.k_min,
            "order_max": options.k_max,
            "rank_tol": options.rank_tol,
            "solver_tol": options.solver_tol,
            "seed": options.seed,
            "monitor_degree": run.monitor_degree,
        },
        "orders": orders,
        "final": {
            "status": run.outcome,
            "order": run.certified_order if run.certified else run.failed_order,
            "flat_order": run.flat_order,
            "f_min_estimate": _finite_or_none(run.f_min_estimate),
            "last_primal_bound": _finite_or_none(last_primal),
            "last_dual_bound": _finite_or_none(last_dual),
            "solver_status": run.failed_status.value if run.failed_status else None,
        },
        "certificate": certificate,
        "moments": moments,
        "trace": {
            "monitor_degree": run.monitor_degree,
            "values": [_finite_or_none(v) for v in run.trace],
        },
        "timings": {"total_seconds": total_seconds},
    }
    if comparison is not None:
        document["comparison"] = {
            "rows": [
                {**row, "value": _finite_or_none(row["value"])}
                for row in comparison.rows
            ],
            "dominance_violations": comparison.dominance_violations,
        }
    return document


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with code 2
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="polyopt",
        description="Certified global polynomial optimization via moment relaxations.",
    )
    parser.add_argument("problem", help="problem file path, or '-' for stdin")
    parser.add_argument(
        "--flavor",
        choices=sorted(_FLAVOR_BY_FLAG),
        default="putinar",
        help="relaxation family (default: putinar)",
    )
    parser.add_argument("--order-min", type=int, default=None)
    parser.add_argument("--order-max", type=int, default=None)
    parser.add_argument("--rank-tol", type=float, default=1e-6)
    parser.add_argument("--solver-tol", type=float, default=1e-8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--monitor-degree", type=int, default=None)
    parser.add_argument(
        "--compare",
        action="store_true",
        help="also tabulate every applicable flavor over the order range",
    )
    parser.add_argument("--export-sdp", metavar="PATH", default=None)
    parser.add_argument("--out", metavar="PATH", default=None, help="result document path (default stdout)")
    parser.add_argument("--verbose", action="store_true")
    return parser


def _applicable_flavors(problem: Problem) -> tuple[str, ...]:
    flavors = ["putinar", "schmudgen"]
    if not problem.inequalities and not problem.equalities:
        flavors = ["putinar", "schmudgen", "gradient"]
        try:
            if problem.objective.degree % 2 == 0:
                flavors.append("sos_unconstrained")
        except ValueError:
            pass
    elif len(problem.inequalities) == 1 and not problem.equalities:
        flavors.append("jacobian_single")
    return tuple(flavors)


def _limit_threads() -> None:
    """Best-effort cap on linear-algebra threads via POLYOPT_NUM_THREADS."""
    value = os.environ.get("POLYOPT_NUM_THREADS")
    if not value:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(int(value))
    except Exception:
        pass  # numpy builds without a controllable pool just run as-is


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _limit_threads()

    try:
        if args.problem == "-":
            text = sys.stdin.read()
        else:
            with open(args.problem, "r", encoding="utf-8") as handle:
                text = handle.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        parsed = parse_problem_file(text)
    except (ProblemSyntaxError, PolynomialParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    flavor = _FLAVOR_BY_FLAG[args.flavor]
    options = HierarchyOptions(
        k_min=args.order_min,
        k_max=args.order_max,
        rank_tol=args.rank_tol,
        solver_tol=args.solver_tol,
        seed=args.seed,
        monitor_degree=args.monitor_degree,
        verbose=args.verbose,
    )

    start = time.monotonic()
    try:
        if args.export_sdp:
            k_export = (
                options.k_min
                if options.k_min is not None
                else minimum_order(parsed.problem, flavor)
            )
            msdp = build_relaxation(parsed.problem, flavor, k_export)
            export_sdpa(
                msdp.to_sdp_problem(),
                args.export_sdp,
                comment=f"polyopt {__version__} order {k_export} {flavor}",
            )
        run = run_hierarchy(parsed.problem, flavor, options)
        comparison = None
        if args.compare:
            k_floor = minimum_order(parsed.problem, flavor)
            k_min = options.k_min if options.k_min is not None else k_floor
            k_max = options.k_max if options.k_max is not None else k_min + 2
            comparison = compare_flavors(
                parsed.problem,
                _applicable_flavors(parsed.problem),
                tuple(range(k_min, k_max + 1)),
                options,
            )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    document = result_document(
        parsed, flavor, run, options, time.monotonic() - start, comparison
    )
    payload = json.dumps(document, indent=2, allow_nan=False)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(payload + "\n")
    else:
        print(payload)

    if run.certified:
        return EXIT_CERTIFIED
    if run.outcome == "solver_failed":
        print(
            f"solver failed at order {run.failed_order}: {run.failed_status.value}",
            file=sys.stderr,
        )
        return EXIT_SOLVER_FAILED
    lo, hi = run.bounds()
    print(
        "no certificate in the order range; best bound "
        f"{lo if lo is not None else 'n/a'}",
        file=sys.stderr,
    )
    return EXIT_EXHAUSTED


if __name__ == "__main__":
    sys.exit(main())
