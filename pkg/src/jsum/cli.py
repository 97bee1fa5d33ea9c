"""Command-line front end.

Exit codes: 0 on success, 1 on bad input (one JSON line ``{"code", "message"}``
on stderr), 2 when an internal audit fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments, geometry, jspace, lp_space
from .errors import ConsistencyError, PreconditionError, UnconvergedError
from .geometry import SubspacePair
from .jspace import JVector
from .lp_space import Subspace, p_to_json

SUBCOMMANDS = ("jnorm", "knorm", "omega", "chain", "inclination", "extend", "bm", "experiment")


class CliError(PreconditionError):
    def __init__(self, message, code="usage"):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jsum", description="J-sum norms and l_p subspace geometry.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--input", help="JSON input file ('-' for stdin)")
    parser.add_argument("--p", help="exponent, a number or 'inf'")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, help="tolerance of the non-convex inclination search")
    parser.add_argument("--output", help="output file (default stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default=None)
    parser.add_argument("--name", choices=sorted(experiments.EXPERIMENTS))
    parser.add_argument("--trials", type=int)
    parser.add_argument("--max-len", type=int)
    parser.add_argument("--r-max", type=int)
    return parser


def _load(path):
    if path is None:
        raise CliError("--input is required for this subcommand")
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", code="io") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}", code="schema") from None


def _field(obj, key):
    if not isinstance(obj, dict) or key not in obj:
        raise CliError(f"input is missing {key!r}", code="schema")
    return obj[key]


def _p(args, obj=None):
    if args.p is not None:
        return lp_space.check_p(args.p)
    if isinstance(obj, dict) and "p" in obj:
        return lp_space.check_p(obj["p"])
    raise CliError("an exponent is required (--p or 'p' in the input)")


def _scalar(value, fmt):
    if fmt == "csv":
        return f"value\n{value!r}\n"
    return json.dumps(value) + "\n"


def _bounds(b, fmt, extra):
    out = {**b.to_json(), **extra}
    if fmt == "csv":
        keys = ("lower", "upper", "certified_lower", "certified_upper")
        return ",".join(keys) + "\n" + ",".join(experiments._fmt(out[k]) for k in keys) + "\n"
    return json.dumps(out, sort_keys=True) + "\n"


def _defaults(args):
    return {"tol": lp_space.DEFAULT_TOL, "seed": args.seed, "nonconvex_tol": _tol(args),
            "sobol_starts": geometry.SOBOL_STARTS, "random_starts": geometry.RANDOM_STARTS}


def _tol(args):
    return geometry.NONCONVEX_TOL if args.tol is None else args.tol


def _jvector(args):
    obj = _load(args.input)
    return JVector.from_json(obj, p=args.p)


def run(args) -> tuple[str, str]:
    """Execute a parsed command; returns (stdout text, stderr text)."""
    cmd = args.subcommand
    fmt = args.format
    if args.tol is not None and args.tol <= 0:
        raise CliError("--tol must be positive")
    if cmd == "jnorm":
        return _scalar(jspace.j_norm(_jvector(args)), fmt), ""
    if cmd == "knorm":
        return _scalar(jspace.k_norm(_jvector(args)), fmt), ""
    if cmd == "omega":
        return _scalar(jspace.omega_seminorm(_jvector(args)), fmt), ""
    if cmd == "chain":
        obj = _load(args.input)
        x = JVector.from_json(_field(obj, "vector"), p=args.p)
        return _scalar(jspace.chain_value(x, _field(obj, "chain"), obj.get("horizon")), fmt), ""
    if cmd == "inclination":
        obj = _load(args.input)
        U, V = Subspace.from_json(_field(obj, "U")), Subspace.from_json(_field(obj, "V"))
        p = _p(args, obj)
        b = geometry.inclination(U, V, p, seed=args.seed, tol=_tol(args))
        u, v = b.witness
        return _bounds(b, fmt, {"p": p_to_json(p), "witness_u": u.tolist(), "witness_v": v.tolist(),
                                "defaults": _defaults(args)}), ""
    if cmd == "extend":
        obj = _load(args.input)
        p = _p(args, obj)
        pair = SubspacePair(Subspace.from_json(_field(obj, "inner")), Subspace.from_json(_field(obj, "outer")), p)
        b = geometry.min_extension_norm(pair, seed=args.seed)
        return _bounds(b, fmt, {"p": p_to_json(p), "operator": b.witness.tolist(), "defaults": _defaults(args)}), ""
    if cmd == "bm":
        obj = _load(args.input)
        p = _p(args, obj)
        E = Subspace.from_json(obj.get("subspace", obj))
        b = geometry.bm_distance_to_l2(E, p, seed=args.seed)
        return _bounds(b, fmt, {"p": p_to_json(p), "defaults": _defaults(args)}), ""
    return _experiment(args)


def _experiment(args):
    name = args.name
    if name is None:
        raise CliError("experiment needs --name")
    seed = args.seed
    if name == "lemma2":
        report = experiments.run_lemma2_bounds(_p(args), trials=args.trials if args.trials is not None else 200,
                                               max_len=args.max_len or 12, seed=seed)
    elif name == "theorem7":
        report = experiments.run_theorem7_growth(_p(args), r_max=args.r_max or 10, seed=seed,
                                                 trials=args.trials if args.trials is not None else 100)
    elif name == "coordinate_pairs":
        report = experiments.run_coordinate_pairs(_p(args), n_max=args.max_len or 8)
    elif name == "rosenthal":
        report = experiments.run_rosenthal_table(i_max=args.max_len or 6, p=_p(args) if args.p else 1.5, seed=seed)
    else:
        obj = _load(args.input)
        family = obj.get("family", obj) if isinstance(obj, dict) else obj
        p_list = obj.get("p_list") if isinstance(obj, dict) and "p_list" in obj else [_p(args)]
        report = experiments.run_inclination_sweep(family, p_list, seed=seed)
    if (args.format or "csv") == "json":
        return json.dumps({"summary": report.summary(), "rows": report.rows}, sort_keys=True, default=experiments.json_default) + "\n", ""
    # CSV goes to --output (or stdout); the summary goes to the other stream
    return report.to_csv(), report.summary_json() + "\n"


def _error_line(code, message):
    return json.dumps({"code": code, "message": str(message)})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        out, side = run(args)
    except ConsistencyError as exc:
        print(_error_line(exc.code, exc), file=sys.stderr)
        return 2
    except (PreconditionError, UnconvergedError) as exc:
        print(_error_line(getattr(exc, "code", "precondition"), exc), file=sys.stderr)
        return 1
    if args.output:
        try:
            with open(args.output, "w") as fh:
                fh.write(out)
        except OSError as exc:
            print(_error_line("io", f"cannot write {args.output}: {exc.strerror}"), file=sys.stderr)
            return 1
        if side:
            sys.stdout.write(side)
    else:
        sys.stdout.write(out)
        if side:
            sys.stderr.write(side)
    return 0


if __name__ == "__main__":
    sys.exit(main())
