"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse error, 2 infeasible input,
3 solver did not converge, 4 verification failed.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .allocore import Allocation, Kind, LowerProblem, UpperProblem, objective, partition_from_values
from .bench import BENCH_ALGORITHMS, DEFAULT_FRACTIONS, run_bench
from .documents import (
    FormatError,
    dump_document,
    partition_from_roles,
    read_allocation,
    read_problem_csv,
    solve_document,
    strata_csv,
)
from .errors import InfeasibleProblem, MalformedAllocation, SumMismatch
from .fpia import FpiaStatus, bisection_solve, fpia_solve
from .popgen import StrataPopulation, build_population
from .recursive import LrnaResult, RnaResult, lrna, naive_rna_box, rna, rnabox, rnabox_twin
from .roundalloc import bound_warnings, round_preserve_sum, rounding_penalty
from .verify import check_box_optimality, check_lower_optimality, check_upper_optimality

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4
ALGORITHMS = ("rnabox", "rnabox-twin", "rna", "lrna", "naive", "fpia", "bisection")
FORMAT_ENV = "STRATALLOC_FORMAT"


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w") as fh:
            fh.write(text)


def _err(msg):
    print(f"stratalloc: {msg}", file=sys.stderr)


def _roles_from_values(p, x):
    part = partition_from_values(p, x)
    return [("min" if h in part.L else "max" if h in part.U else "neyman") for h in p.labels]


def _solve(data, n, args):
    """Returns (document, exit code)."""
    algo = args.algorithm
    labels = list(data.labels)
    extra, trace = {}, None
    t0 = time.perf_counter()
    status, code = "ok", EXIT_OK
    if algo in ("rnabox", "rnabox-twin"):
        p = data.problem(n)
        if algo == "rnabox":
            alloc, trace = rnabox(p, want_trace=args.trace, use_prior_domain=args.prior_domain)
        else:
            alloc = rnabox_twin(p)
        x, roles, kind, f = alloc.x, list(alloc.roles), alloc.kind.value, alloc.objective
    elif algo == "rna":
        up = UpperProblem(data.labels, data.A, data.M, n)
        res = rna(up)
        x = res.x
        roles = ["max" if h in res.U else "neyman" for h in labels]
        kind = Kind.VERTEX.value if len(res.U) == len(labels) else Kind.REGULAR.value
        f = objective(up, x)
        extra = {"inner_iterations": res.inner_iterations}
    elif algo == "lrna":
        lp = LowerProblem(data.labels, data.A, data.m, n)
        res = lrna(lp)
        x = res.x
        roles = ["min" if h in res.L else "neyman" for h in labels]
        kind = Kind.VERTEX.value if len(res.L) == len(labels) else Kind.REGULAR.value
        f = objective(lp, x)
        extra = {"inner_iterations": res.inner_iterations}
    elif algo == "naive":
        p = data.problem(n)
        res = naive_rna_box(p)
        x = res.x
        roles = ["min" if h in res.partition.L else "max" if h in res.partition.U else "neyman" for h in labels]
        kind = Kind.VERTEX.value if res.partition.covers(p) else Kind.REGULAR.value
        f = objective(p, x) if all(v > 0 for v in x) else None
        extra = {"feasible": res.converged_feasible, "iterations": res.iterations}
    elif algo == "fpia":
        p = data.problem(n)
        out = fpia_solve(p, args.lambda0, max_iter=args.max_iter)
        extra = {"lambda_history": list(out.lambda_history), "iterations": out.iterations}
        if out.status is FpiaStatus.CONVERGED:
            x = out.allocation
            roles = _roles_from_values(p, x)
            kind = Kind.REGULAR.value
            f = objective(p, x)
        else:
            status, code = out.status.value, EXIT_NONCONVERGED
            x, roles, kind, f = None, [None] * len(labels), None, None
    elif algo == "bisection":
        p = data.problem(n)
        x = bisection_solve(p)
        roles = _roles_from_values(p, x)
        kind = Kind.VERTEX.value if "neyman" not in roles else Kind.REGULAR.value
        f = objective(p, x)
    else:  # argparse restricts choices
        raise AssertionError(algo)
    elapsed = time.perf_counter() - t0
    if data.B is not None and f is not None:
        extra["variance"] = f - data.B
    doc = solve_document(algo, n, status, labels, x, roles, f, kind, trace=trace, extra=extra,
                         timings={"solve_seconds": elapsed})
    return doc, code


def cmd_solve(args) -> int:
    try:
        data = read_problem_csv(args.input, stsi=args.stsi)
        n = data.resolve_n(args.n, args.fraction)
    except FormatError as exc:
        _err(str(exc))
        return EXIT_IO
    if args.trace and args.algorithm != "rnabox":
        _err("--trace is only recorded for --algorithm rnabox")
    try:
        doc, code = _solve(data, n, args)
    except InfeasibleProblem as exc:
        _err(f"infeasible problem: {exc}")
        return EXIT_INFEASIBLE
    if code == EXIT_NONCONVERGED:
        _err(f"{args.algorithm} did not converge: {doc['status']}")
    text = strata_csv(doc) if args.format == "csv" else dump_document(doc)
    try:
        _emit(text, args.output)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return code


def _report_document(report):
    doc = {
        "is_optimal": report.is_optimal,
        "case": report.case.value,
        "violations": [
            {"label": v.label, "condition": v.condition, "lhs": v.lhs, "rhs": v.rhs}
            for v in report.violations
        ],
        "multipliers": None,
    }
    mult = report.multipliers
    if mult is not None:
        doc["multipliers"] = {
            "lambda": mult.lam,
            "mu_m": mult.mu_m,
            "mu_M": mult.mu_M,
            "max_stationarity_residual": mult.max_abs_stationarity(),
        }
    return doc


def cmd_verify(args) -> int:
    try:
        data = read_problem_csv(args.input, stsi=args.stsi)
        alloc = read_allocation(args.allocation)
        if sorted(alloc["labels"]) != sorted(data.labels) or len(alloc["labels"]) != len(data.labels):
            raise FormatError(
                f"allocation has {len(alloc['labels'])} strata that do not match the "
                f"{len(data.labels)} strata of the problem"
            )
        order = {h: i for i, h in enumerate(alloc["labels"])}
        x = [alloc["x"][order[h]] for h in data.labels]
        roles = None if alloc["roles"] is None else [alloc["roles"][order[h]] for h in data.labels]
        n = args.n if args.n is not None else alloc["n"]
        if n is None:
            n = sum(x)
    except FormatError as exc:
        _err(str(exc))
        return EXIT_IO
    labels = tuple(data.labels)
    algorithm = alloc["algorithm"]
    try:
        if algorithm == "rna":
            up = UpperProblem(labels, data.A, data.M, n)
            U = ({h for h, r in zip(labels, roles) if r == "max"} if roles
                 else {h for h, v, hi in zip(labels, x, data.M) if v == hi})
            report = check_upper_optimality(up, RnaResult(labels, tuple(x), frozenset(U), 0), args.tol)
        elif algorithm == "lrna":
            lp = LowerProblem(labels, data.A, data.m, n)
            L = ({h for h, r in zip(labels, roles) if r == "min"} if roles
                 else {h for h, v, lo in zip(labels, x, data.m) if v == lo})
            report = check_lower_optimality(lp, LrnaResult(labels, tuple(x), frozenset(L), 0), args.tol)
        else:
            p = data.problem(n)
            part = partition_from_roles(labels, roles) if roles else partition_from_values(p, x)
            kind = Kind.VERTEX if part.covers(p) else Kind.REGULAR
            f = objective(p, x) if all(v > 0 for v in x) else float("nan")
            report = check_box_optimality(p, Allocation(labels, tuple(x), part, kind, f), args.tol)
    except InfeasibleProblem as exc:
        _err(f"infeasible problem: {exc}")
        return EXIT_INFEASIBLE
    except (FormatError, MalformedAllocation) as exc:
        _err(f"malformed allocation: {exc}")
        _emit(dump_document({"is_optimal": False, "case": None,
                             "violations": [{"label": None, "condition": "malformed", "lhs": None,
                                             "rhs": None}],
                             "multipliers": None}), args.output)
        return EXIT_VERIFY
    _emit(dump_document(_report_document(report)), args.output)
    return EXIT_OK if report.is_optimal else EXIT_VERIFY


def cmd_generate(args) -> int:
    pop = build_population(args.K, args.set_size, args.strata, args.seed)
    try:
        if args.output in (None, "-"):
            sys.stdout.write("label,N,S\n")
            for st in pop.strata:
                sys.stdout.write(f"{st.label},{st.N},{float(st.S)!r}\n")
        else:
            pop.to_csv(args.output)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def cmd_round(args) -> int:
    try:
        alloc = read_allocation(args.allocation)
        data = read_problem_csv(args.input) if args.input else None
    except FormatError as exc:
        _err(str(exc))
        return EXIT_IO
    x = alloc["x"]
    n = args.n
    if n is None:
        n = alloc["n"] if alloc["n"] is not None else sum(x)
        n = int(round(n))
    try:
        xi = round_preserve_sum(x, n)
    except SumMismatch as exc:
        _err(str(exc))
        return EXIT_INFEASIBLE
    except ValueError as exc:
        _err(str(exc))
        return EXIT_IO
    doc = {
        "n": n,
        "strata": [{"label": h, "x": v, "x_int": k} for h, v, k in zip(alloc["labels"], x, xi)],
        "warnings": [],
        "penalty": None,
    }
    if data is not None:
        order = {h: i for i, h in enumerate(data.labels)}
        if set(order) != set(alloc["labels"]):
            _err("allocation and problem strata differ")
            return EXIT_IO
        idx = [order[h] for h in alloc["labels"]]
        A = [data.A[i] for i in idx]
        doc["penalty"] = rounding_penalty(A, x, xi)

        class _Bounds:
            labels = alloc["labels"]
            m = [data.m[i] for i in idx]
            M = [data.M[i] for i in idx]

        doc["warnings"] = bound_warnings(_Bounds, xi)
    _emit(dump_document(doc), args.output)
    return EXIT_OK


def _floats_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def cmd_bench(args) -> int:
    try:
        if args.population:
            pop = StrataPopulation.from_csv(args.population)
        else:
            pop = build_population(args.K, args.set_size, args.strata, args.seed)
        algorithms = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
        report = run_bench(pop, args.fractions, algorithms, args.repeats, args.parallel)
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, InfeasibleProblem):
            _err(f"infeasible problem: {exc}")
            return EXIT_INFEASIBLE
        _err(str(exc))
        return EXIT_IO
    _emit(dump_document(report), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratalloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute an allocation")
    s.add_argument("input", help="strata CSV")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--n", type=float, help="total sample size")
    g.add_argument("--fraction", type=float, help="total sample size as a fraction of N")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="rnabox")
    s.add_argument("--trace", action="store_true", help="include the RNABOX iteration trace")
    s.add_argument("--prior-domain", action="store_true",
                   help="restrict each inner RNA take-max search to the previous take-max set")
    s.add_argument("--lambda0", type=float, default=None, help="FPIA starting value")
    s.add_argument("--max-iter", type=int, default=200, help="FPIA iteration cap")
    s.add_argument("--stsi", action="store_true", help="input has N,S columns (auto-detected anyway)")
    s.add_argument("--format", choices=("json", "csv"), default=os.environ.get(FORMAT_ENV, "json"))
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check an allocation against the optimality conditions")
    v.add_argument("input", help="strata CSV")
    v.add_argument("allocation", help="solve document (JSON) or label,x[,role] CSV")
    v.add_argument("--n", type=float, default=None)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--stsi", action="store_true")
    v.add_argument("-o", "--output", default=None)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time solvers over a generated population")
    b.add_argument("--population", default=None, help="population CSV (label,N,S); otherwise generated")
    b.add_argument("--K", type=int, default=10)
    b.add_argument("--set-size", type=int, default=10_000)
    b.add_argument("--strata", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--fractions", type=_floats_list, default=DEFAULT_FRACTIONS)
    b.add_argument("--algorithms", default="rnabox,fpia", help=f"comma list from {','.join(BENCH_ALGORITHMS)}")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--parallel", action="store_true", help="run (algorithm, fraction) cells in parallel")
    b.add_argument("-o", "--output", default=None)
    b.set_defaults(func=cmd_bench)

    gen = sub.add_parser("generate", help="write a synthetic population CSV")
    gen.add_argument("--K", type=int, default=10)
    gen.add_argument("--set-size", type=int, default=10_000)
    gen.add_argument("--strata", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", default=None)
    gen.set_defaults(func=cmd_generate)

    r = sub.add_parser("round", help="round an allocation to integers preserving the total")
    r.add_argument("allocation")
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--input", default=None, help="strata CSV, for bound warnings and the variance penalty")
    r.add_argument("-o", "--output", default=None)
    r.set_defaults(func=cmd_round)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
