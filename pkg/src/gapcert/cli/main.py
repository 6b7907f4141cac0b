"""``gapcert`` command line.

Exit codes: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ..errors import GapCertError, SpecSyntaxError, SpecValidationError
from .commands import (
    SWEEP_COLUMNS,
    AnalyzeOptions,
    cmd_analyze,
    cmd_subsets,
    cmd_sweep,
    cmd_verify,
    problem_from_fixture,
    problem_from_spec,
    random_problems,
)
from .report import to_csv, to_json
from .specfile import parse_chain_spec

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> tuple:
    """``"1.2:3.0:0.2"`` (inclusive range) or a comma list; empty gives no points."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        try:
            lo, hi, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError("range needs step > 0 and hi >= lo")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + k * step, 12) for k in range(count))
    return _floats(text)


def _assignment(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key} must be a number") from None
    return key.strip(), int(number) if number.is_integer() and "." not in value and "e" not in value.lower() else number


def _add_source(p):
    p.add_argument("spec", nargs="?", help="chain-spec file")
    p.add_argument("--fixture", help="built-in chain instead of a spec file")
    p.add_argument("--set", dest="params", action="append", type=_assignment, default=[], metavar="KEY=VALUE",
                   help="fixture parameter (repeatable)")


def _add_options(p):
    p.add_argument("--alpha", type=_floats, help="modification exponents, e.g. 0,0.5,1")
    p.add_argument("--levels", type=_ints, help="truncation levels, e.g. 200,2000")
    p.add_argument("--kappa", type=float, default=1.0, help="constant in the k^2/8M term")
    p.add_argument("--eps", type=_floats, help="integrability probe exponents")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gapcert", description="Cheeger constants and spectral-gap certificates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="exact values, Cheeger constants and every applicable bound")
    _add_source(p)
    _add_options(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("verify", help="check certificates against exact eigenvalues")
    _add_source(p)
    _add_options(p)
    p.add_argument("--random", type=int, metavar="COUNT", help="verify COUNT seeded random chains")
    p.add_argument("--seed", type=int, default=0, help="seed for --random")

    p = sub.add_parser("sweep", help="CSV of exact values and bounds over a parameter grid")
    _add_source(p)
    _add_options(p)
    p.add_argument("--param", required=True, help="parameter name ($name in the rate expressions)")
    p.add_argument("--grid", type=_grid, required=True, help="lo:hi:step or a comma list")
    p.add_argument("--eps-star", type=float, help="known integrability threshold for the moment bound")
    p.add_argument("--csv", help="write the CSV here instead of stdout")

    p = sub.add_parser("subsets", help="h, k, k' and their witnessing subsets (n <= 24)")
    _add_source(p)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    return parser


def _problem(args):
    if args.fixture:
        if args.spec:
            raise SpecValidationError("give either a spec file or --fixture, not both")
        return problem_from_fixture(args.fixture, **dict(args.params))
    if not args.spec:
        raise SpecValidationError("a spec file or --fixture is required")
    with open(args.spec, encoding="utf-8") as fh:
        text = fh.read()
    return problem_from_spec(parse_chain_spec(text), label=args.spec)


def _options(args) -> AnalyzeOptions:
    return AnalyzeOptions(alpha=args.alpha, levels=args.levels, kappa=args.kappa, eps=args.eps)


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    if args.command == "verify" and args.random is not None:
        problems = random_problems(args.random, args.seed)
    else:
        problems = [_problem(args)]
    if args.command == "analyze":
        _emit(to_json(cmd_analyze(problems[0], _options(args))), args.out)
        return EXIT_OK
    if args.command == "verify":
        status = EXIT_OK
        for problem in problems:
            code, lines = cmd_verify(problem, _options(args))
            failures = [line for line in lines if line.startswith("FAIL")]
            if code:
                status = EXIT_VERIFY
                print("\n".join([lines[0], *failures]))
            else:
                print(f"{lines[0]}: pass ({sum(1 for x in lines if x.startswith('ok'))} checks)")
        return status
    if args.command == "sweep":
        rows = cmd_sweep(problems[0], args.param, args.grid, _options(args), eps_star=args.eps_star)
        _emit(to_csv(SWEEP_COLUMNS, rows), args.csv)
        return EXIT_OK
    _emit(to_json(cmd_subsets(problems[0], args.alpha)), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (SpecSyntaxError, SpecValidationError) as exc:
        print(f"gapcert: input error: {exc}", file=sys.stderr)
    except GapCertError as exc:
        print(f"gapcert: {type(exc).__name__}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"gapcert: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
