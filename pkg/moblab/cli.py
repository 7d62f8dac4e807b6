"""
Command-line entry point: `moblab <subcommand> [flags]`.

Results go to standard output as JSON (or CSV / a table where a
subcommand offers one); logs go to standard error and, with --log,
to a rotating file.
"""

import argparse
import json
import sys
from typing import List, Optional

from loguru import logger
from tabulate import tabulate

from moblab import arcs, characters, expsum, file_io, sieve, utils, vaughan
from moblab.config import GlobalConfig
from moblab.exceptions import ArgumentError, MoblabError, ResourceError
from moblab.phase import parse_phase
from moblab.sweep import SweepSpec, run_sweep

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_RESOURCE = 3


def configure_logging(verbosity: int = 0, log_path: Optional[str] = None):
    level = {0: "WARNING", 1: "INFO"}.get(verbosity, "DEBUG")
    logger.remove()
    logger.add(sys.stderr, level=level)
    if log_path:
        logger.add(log_path, rotation="1 days", level="DEBUG")


def _write(payload, fmt: str = "json"):
    if fmt == "table":
        rows = payload if isinstance(payload, list) else [payload]
        flat = [{key: value for key, value in row.items() if not isinstance(value, (dict, list))} for row in rows]
        sys.stdout.write(tabulate(flat, headers="keys", floatfmt=".17g") + "\n")
    else:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _phase(args, config: GlobalConfig, text: str, x, y, k: int):
    return parse_phase(text, config.prec_bits_for(x, y, k))


def cmd_sieve(args, config: GlobalConfig):
    segment = sieve.sieve_segment(
        utils.floor(utils.to_mpq(args.x)),
        utils.floor(utils.to_mpq(args.y)),
        (args.emit,),
        config.segment_size,
        config.max_segment_entries,
        config.threads,
    )
    values = segment.get(args.emit)
    pairs = zip(segment.n.tolist(), values.tolist())
    if args.format == "csv":
        sys.stdout.write("n,value\n")
        for n, value in pairs:
            sys.stdout.write(f"{n},{value!r}\n" if isinstance(value, float) else f"{n},{value}\n")
        return None
    return [{"n": n, "value": value} for n, value in pairs]


def cmd_classify(args, config: GlobalConfig):
    params = arcs.arc_params(args.x, args.y, args.k, args.c1 if args.c1 is not None else config.c1_for(args.k))
    alpha = _phase(args, config, args.alpha, args.x, args.y, args.k)
    arc = arcs.classify(alpha, params)
    return {**arc.to_dict(), "P": float(params.P), "Q": float(params.Q), "R": float(params.R)}


def cmd_weyl(args, config: GlobalConfig):
    alpha = _phase(args, config, args.alpha, args.x, args.y, args.k)
    return expsum.weyl_sum(args.x, args.y, args.k, alpha, config.budget_terms).to_dict()


def cmd_mobius_sum(args, config: GlobalConfig):
    alpha = _phase(args, config, args.alpha, args.x, args.y, args.k)
    lo, hi = utils.interval_bounds(args.x, args.y)
    if hi - lo > config.budget_terms:
        raise ResourceError(f"{hi - lo} terms exceed the budget of {config.budget_terms}.")
    wanted = ("lambda",) if args.weights == "lambda" else ("mu",)
    segment = sieve.sieve_segment(lo, hi - lo, wanted, config.segment_size, config.max_segment_entries,
                                  config.threads)
    total = expsum.mangoldt_expsum if args.weights == "lambda" else expsum.mobius_expsum
    return total(args.x, args.y, args.k, alpha, segment, config.budget_terms).to_dict()


def cmd_gauss(args, config: GlobalConfig):
    value = expsum.gauss_sum(args.q, args.a, args.k, args.method)
    return {**expsum.ExpSumResult(value, args.q, 2.0**-53).to_dict(), "q": args.q, "a": args.a, "k": args.k}


def cmd_wk(args, config: GlobalConfig):
    payload = {"q": args.q, "k": args.k, "w_k": float(expsum.w_k(args.q, args.k))}
    if args.N is not None:
        payload["lhs"] = expsum.wk_sum_lemma37(args.N, args.q, args.j, args.k, args.c)
        payload["N"] = args.N
    return payload


def cmd_characters(args, config: GlobalConfig):
    table = characters.characters_mod(args.q)
    indices = table.primitive_indices() if args.list_primitive else range(len(table))
    return [
        {
            "index": chi.index,
            "conductor": chi.conductor,
            "primitive": chi.primitive,
            "order": chi.order,
            "parity": chi.parity,
            "exponents": table.exponents[chi.index].tolist(),
        }
        for chi in (table.character(i) for i in indices)
    ]


def cmd_lemma31(args, config: GlobalConfig):
    lam = _phase(args, config, args.lam, args.x, args.y, args.k)
    eps = args.eps if args.eps is not None else config.eps
    terms = characters.lemma31_terms(args.x, args.y, args.k, args.q, lam, config.threads)
    value = characters.lemma31_rhs(args.x, args.y, args.k, args.q, args.a, lam, eps, terms=terms)
    return {
        "rhs": value,
        "terms": [{"d": d, "character": index, "max_abs": size} for d, index, size in terms],
    }


def cmd_plan(args, config: GlobalConfig):
    plan = vaughan.make_plan(args.x, args.y, args.k, args.y_theta, args.c1)
    return plan.to_dict()


def cmd_reconstruct(args, config: GlobalConfig):
    if (args.U is None) != (args.V is None):
        raise ArgumentError("Give both --U and --V or neither.")
    if args.U is not None:
        plan = vaughan.VaughanPlan.manual_plan(args.x, args.y, args.k, args.U, args.V)
    else:
        plan = vaughan.make_plan(args.x, args.y, args.k)
    alpha = _phase(args, config, args.alpha, args.x, args.y, args.k)
    result = vaughan.reconstruct(args.x, args.y, args.k, alpha, plan, args.split, config.budget_terms)
    return result.to_dict()


def cmd_sweep(args, config: GlobalConfig):
    data = utils.load_mapping(args.spec)
    data.setdefault("budget_terms", config.budget_terms)
    data.setdefault("workers", config.threads)
    spec = SweepSpec.from_dict(data)
    report = run_sweep(spec)
    fmt = file_io.format_from_path(args.out) if args.out else args.format
    text = report.emit(fmt if fmt in ("csv", "json") else "json", args.out)
    if not args.out:
        sys.stdout.write(text)
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moblab", description="Mobius exponential sums in short intervals"
    )
    parser.add_argument("--config", help="GlobalConfig file (.json, .yml)")
    parser.add_argument("--threads", type=int, help="Worker processes")
    parser.add_argument("--prec-bits", type=int, help="Fractional bits for irrational phases")
    parser.add_argument("--budget-terms", type=int, help="Largest number of terms per sum")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--log", help="Also log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def interval(sub):
        sub.add_argument("--x", required=True, help="Left endpoint (exclusive)")
        sub.add_argument("--y", required=True, help="Interval length")
        sub.add_argument("--k", type=int, default=3)
        sub.add_argument("--format", choices=("json", "table"), default="json")

    sub = subparsers.add_parser("sieve", help="mu, Lambda or tau on (x, x + y]")
    sub.add_argument("--x", required=True)
    sub.add_argument("--y", required=True)
    sub.add_argument("--emit", choices=sieve.ARITH_FUNCTIONS, default="mu")
    sub.add_argument("--format", choices=("csv", "json", "table"), default="csv")
    sub.set_defaults(func=cmd_sieve)

    sub = subparsers.add_parser("classify", help="Arc label of alpha")
    interval(sub)
    sub.add_argument("--c1", type=float)
    sub.add_argument("--alpha", required=True, help="a/q, a decimal, or golden/sqrt2/e/pi")
    sub.set_defaults(func=cmd_classify)

    for name, func, help_text in (
        ("weyl", cmd_weyl, "Sum of e(n^k alpha)"),
        ("mobius-sum", cmd_mobius_sum, "Sum of mu(n) e(n^k alpha)"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        interval(sub)
        sub.add_argument("--alpha", required=True)
        if name == "mobius-sum":
            sub.add_argument("--weights", choices=("mu", "lambda"), default="mu")
        sub.set_defaults(func=func)

    sub = subparsers.add_parser("gauss", help="Complete sum S(q, a)")
    sub.add_argument("--q", type=int, required=True)
    sub.add_argument("--a", type=int, required=True)
    sub.add_argument("--k", type=int, default=3)
    sub.add_argument("--method", choices=("auto", "direct", "crt"), default="auto")
    sub.add_argument("--format", choices=("json", "table"), default="json")
    sub.set_defaults(func=cmd_gauss)

    sub = subparsers.add_parser("wk", help="The weight w_k(q)")
    sub.add_argument("--q", type=int, required=True)
    sub.add_argument("--k", type=int, default=3)
    sub.add_argument("--N", type=int, help="Also sum tau^c(n) w_k(q/(q, n^j)) over N < n <= 2N")
    sub.add_argument("--j", type=int, default=1)
    sub.add_argument("--c", type=int, default=1)
    sub.add_argument("--format", choices=("json", "table"), default="json")
    sub.set_defaults(func=cmd_wk)

    sub = subparsers.add_parser("characters", help="Dirichlet characters mod q")
    sub.add_argument("--q", type=int, required=True)
    sub.add_argument("--list-primitive", action="store_true")
    sub.add_argument("--format", choices=("json", "table"), default="json")
    sub.set_defaults(func=cmd_characters)

    sub = subparsers.add_parser("lemma31", help="Bound by primitive twisted sums")
    interval(sub)
    sub.add_argument("--q", type=int, required=True)
    sub.add_argument("--a", type=int, required=True)
    sub.add_argument("--lambda", dest="lam", required=True)
    sub.add_argument("--eps", type=float)
    sub.set_defaults(func=cmd_lemma31)

    sub = subparsers.add_parser("plan", help="Vaughan parameters U, V")
    sub.add_argument("--x", required=True)
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--y")
    group.add_argument("--y-theta", help="Exponent theta with y = x^theta")
    sub.add_argument("--k", type=int, default=3)
    sub.add_argument("--c1", type=float)
    sub.add_argument("--format", choices=("json", "table"), default="json")
    sub.set_defaults(func=cmd_plan)

    sub = subparsers.add_parser("reconstruct", help="S_k against -S1 + S2")
    interval(sub)
    sub.add_argument("--alpha", required=True)
    sub.add_argument("--U")
    sub.add_argument("--V")
    sub.add_argument("--split", action="store_true", help="Also report the S1 and S2 splits")
    sub.set_defaults(func=cmd_reconstruct)

    sub = subparsers.add_parser("sweep", help="Run a sweep campaign")
    sub.add_argument("--spec", required=True, help="SweepSpec file (.json, .yml)")
    sub.add_argument("--out", help="Report path; .csv or .json picks the format")
    sub.add_argument("--format", choices=("csv", "json"), default="json")
    sub.set_defaults(func=cmd_sweep)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand and return the exit code: 0 on success, 2 for
    argument and parameter errors, 3 when a budget or resource limit
    is hit.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code in (0, None) else EXIT_ARGUMENT
    configure_logging(args.verbose, args.log)
    try:
        config = GlobalConfig.load(
            args.config,
            threads=args.threads,
            prec_bits=args.prec_bits,
            budget_terms=args.budget_terms,
        )
        payload = args.func(args, config)
    except ResourceError as error:
        logger.error(f"moblab {args.command}: {error}")
        return EXIT_RESOURCE
    except (MoblabError, ValueError) as error:
        logger.error(f"moblab {args.command}: {error}")
        return EXIT_ARGUMENT
    if payload is not None:
        _write(payload, getattr(args, "format", "json"))
    return EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
