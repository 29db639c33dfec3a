"""Command-line front end.

Exit codes: 0 all checks pass, 1 some check failed, 2 input or schema error,
3 precondition error (structure not almost-S, all alpha zero, ...).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

from . import catalog, hamjac, sympl
from .document import dumps, emit_document, read_data, structure_from_data, tolerances
from .errors import (
    AlphaFitIllPosed,
    AllAlphaZero,
    DegreeOverflow,
    DimensionMismatch,
    DivisionNearZero,
    EmptyPositiveCone,
    ExprSyntaxError,
    PreconditionNotAlmostS,
    PreconditionViolated,
    SamplingExhausted,
    SchemaError,
    SingularRestriction,
    UnknownCoordinate,
)
from .fstruct import classify, fundamental_form_checks, structure_propositions, validate_fpk
from .report import CheckReport, all_passed
from .symexpr import parse_expr, to_string

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3

INPUT_ERRORS = (SchemaError, ExprSyntaxError, UnknownCoordinate, DimensionMismatch, DegreeOverflow)
PRECONDITION_ERRORS = (
    PreconditionNotAlmostS, AllAlphaZero, EmptyPositiveCone, SingularRestriction,
    AlphaFitIllPosed, PreconditionViolated, SamplingExhausted, DivisionNearZero,
)


def _split(text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if not all(parts):
        raise SchemaError("--fns", "empty entry in comma-separated list")
    return parts


def _eta_choice(args, s):
    if args.eta is None:
        return None
    try:
        c = tuple(float(v) for v in _split(args.eta))
    except ValueError:
        raise SchemaError("--eta", "expected comma-separated numbers") from None
    choice = hamjac.EtaChoice(c)
    try:
        choice.check(s.alpha)
    except ValueError as exc:
        raise SchemaError("--eta", str(exc)) from None
    return choice


def _expr(flag: str, text: str, s):
    try:
        return parse_expr(text, s.chart)
    except (ExprSyntaxError, UnknownCoordinate) as exc:
        exc.args = (f"{flag}: {exc}",)
        raise


def cmd_validate(args, s, tols) -> tuple[list[CheckReport], dict]:
    tol = args.tol or tols["default"]
    return validate_fpk(s, args.samples, tol) + fundamental_form_checks(s, args.samples, tol), {}


def cmd_classify(args, s, tols):
    tol = args.tol or tols["default"]
    c = classify(s, args.samples, tol)
    flags = {k: v for k, v in c.to_dict().items() if k != "reports"}
    reports = list(c.reports)
    if c.almost_S:
        reports += structure_propositions(s, args.samples, tol, classification=c)
    return reports, flags


def cmd_hamiltonian(args, s, tols):
    tol = args.tol or tols["hamiltonian"]
    system = hamjac.HamiltonianSystem(s, _eta_choice(args, s))
    f = _expr("--f", args.f, s)
    X = system.field(f)
    comps = {name: to_string(e) for name, e in zip(s.chart.coordinates, X.components)}
    return system.residual_reports(f, args.samples, tol), {"f": to_string(f), "X_f": comps}


def cmd_bracket(args, s, tols):
    tol = args.tol or tols["hamiltonian"]
    system = hamjac.HamiltonianSystem(s, _eta_choice(args, s))
    f, g = _expr("--f", args.f, s), _expr("--g", args.g, s)
    br = system.bracket(f, g)
    reports = hamjac.bracket_consistency(system, [(f, g)], args.samples, tol)
    return reports, {"f": to_string(f), "g": to_string(g), "bracket": to_string(br)}


def cmd_jacobi_suite(args, s, tols):
    tol = args.tol or tols["hamiltonian"]
    fs = [_expr("--fns", t, s) for t in _split(args.fns)]
    reports = hamjac.verify_jacobi_suite(s, _eta_choice(args, s), fs, args.samples, tol)
    return reports, {"fns": [to_string(f) for f in fs]}


def cmd_symplectize(args, s, tols):
    sp = sympl.build_symplectization(s)
    exp_tol = args.tol or sympl.EXPANSION_TOL
    top_tol = args.tol or sympl.TOP_POWER_TOL
    reports = [sympl.verify_expansion(sp, s, args.samples, exp_tol)]
    reports += sympl.verify_top_power(sp, s, args.samples, top_tol)
    reports += sympl.verify_determinant(sp, args.samples)
    reports.append(sympl.phi_power_vanishing(s, args.samples))
    info = {
        "tau": to_string(sp.tau),
        "t_box": [list(b) for b in sp.chart.box[s.dim:]],
        "factor": sympl.top_power_factor(s.n, s.k),
    }
    return reports, info


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "hamiltonian": cmd_hamiltonian,
    "bracket": cmd_bracket,
    "jacobi-suite": cmd_jacobi_suite,
    "symplectize": cmd_symplectize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpkgeom", description="Check f.pk-structure identities on a manifold document.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("document", help="manifold document (JSON)")
    common.add_argument("--samples", type=int, default=100, help="sample points per identity (default 100)")
    common.add_argument("--tol", type=float, default=None, help="override the suite tolerance")
    common.add_argument("--seed", type=int, default=None, help="override the document seed")
    common.add_argument("--json", metavar="PATH", default=None, help="write a machine-readable report")

    sub.add_parser("validate", parents=[common], help="axiom suite for the f.pk data")
    sub.add_parser("classify", parents=[common], help="almost-K / almost-S / normality flags")
    for name, extra in (("hamiltonian", ["--f"]), ("bracket", ["--f", "--g"]), ("jacobi-suite", ["--fns"])):
        p = sub.add_parser(name, parents=[common])
        for flag in extra:
            p.add_argument(flag, required=True, help="expression" if flag != "--fns" else "comma-separated expressions")
        p.add_argument("--eta", default=None, help="comma-separated constants c_j of eta = sum c_j eta^j")
    sub.add_parser("symplectize", parents=[common], help="symplectization identities on tau > 0")

    cat = sub.add_parser("catalog", help="list catalog entries or emit a template document")
    group = cat.add_mutually_exclusive_group(required=True)
    group.add_argument("--list", action="store_true")
    group.add_argument("--emit", metavar="NAME")
    cat.add_argument("--out", metavar="PATH", default=None)
    return parser


def _catalog(args) -> int:
    if args.list:
        for name in catalog.CATALOG:
            print(name)
        return EXIT_PASS
    try:
        s = catalog.get(args.emit)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = emit_document(s, args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {args.out}")
    return EXIT_PASS


def _report_document(command: str, s, args, reports: list[CheckReport], info: dict) -> dict[str, Any]:
    return {
        "command": command,
        "structure": s.name,
        "seed": s.chart.seed,
        "samples": args.samples,
        "pass": all_passed(reports),
        "result": info,
        "reports": [r.to_dict() for r in reports],
    }


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        return _catalog(args)
    if args.samples < 1:
        print("error: --samples must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        data = read_data(args.document)
        s = structure_from_data(data)
        if args.seed is not None:
            s = s.rechart(s.chart.with_seed(args.seed))
        reports, info = COMMANDS[args.command](args, s, tolerances(data))
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PRECONDITION_ERRORS as exc:
        print(f"precondition error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION

    print(f"{args.command}: {s.name or Path(args.document).name} (n={s.n}, k={s.k}, seed={s.chart.seed})")
    for key, val in info.items():
        if isinstance(val, dict):
            print(f"  {key}:")
            for k2, v2 in val.items():
                print(f"    {k2} = {v2}")
        else:
            print(f"  {key} = {val}")
    for r in reports:
        print(r.line())
    ok = all_passed(reports)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    if args.json:
        Path(args.json).write_text(dumps(_report_document(args.command, s, args, reports, info)))
    return EXIT_PASS if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
