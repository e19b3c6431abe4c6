"""Command-line front end.

Every command prints one artifact (JSON by default, CSV where a table makes
sense) to stdout or ``--output``.  Failures print ``{"error": {...}}`` to
stderr and exit with

    0  success (mathematical negatives such as an invalid certificate included)
    2  validation error
    3  budget, capacity, precision or decidability limit reached
    64 unknown subcommand
    65 malformed input JSON
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import errors
from .field import FieldElement, element_from_obj, element_to_obj, parse_element, tower_from_obj, tower_to_obj

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_LIMIT = 3
EXIT_INTERNAL = 1
EXIT_UNKNOWN_COMMAND = 64
EXIT_BAD_JSON = 65

COMMANDS = {
    "tower": ("build", "search-units"),
    "unramified": ("check",),
    "domain": ("build", "reduce", "report"),
    "voronoi": ("field",),
    "cyclo": ("scan",),
    "lattice": ("lll", "svp", "cvp", "cover"),
}


class UsageError(Exception):
    def __init__(self, message, exit_code=EXIT_VALIDATION, code="usage"):
        super().__init__(message)
        self.exit_code = exit_code
        self.code = code


class MalformedInput(Exception):
    code = "malformed_json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ----------------------------------------------------------------- input helpers

def load_json(arg: str):
    """Inline JSON, ``-`` for stdin, or a file path."""
    try:
        if arg == "-":
            text = sys.stdin.read()
        elif arg.lstrip().startswith(("{", "[")):
            text = arg
        else:
            text = Path(arg).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {arg!r}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"malformed JSON in {arg!r}: {exc}") from exc


def _pick(obj, *keys):
    """First present key among ``keys`` (artifacts nest the object we need)."""
    if not isinstance(obj, dict):
        raise MalformedInput("expected a JSON object")
    for k in keys:
        if k in obj:
            return obj[k]
    return obj


def _tower_arg(arg: str):
    obj = load_json(arg)
    return tower_from_obj(_pick(obj, "tower"))


def _element(text: str, tower) -> FieldElement:
    s = text.lstrip()
    if s.startswith("{"):
        return element_from_obj(load_json(s), tower)
    return parse_element(text, tower)


def _fractions(values):
    return [Fraction(v) for v in values]


def _strs(values):
    return [str(v) for v in values]


# ----------------------------------------------------------------- commands

def cmd_tower_build(args):
    from .unramified import build_tower, root_discriminant_data
    from .field import TowerDescriptor
    if args.input:
        obj = _pick(load_json(args.input), "tower")
        primes = obj.get("level1") or obj.get("primes")
        base = TowerDescriptor(tuple(int(p) for p in primes))
        units = [element_from_obj({"coeffs": c}, base) for c in obj.get("S0", ())]
    else:
        if not args.primes:
            raise UsageError("tower build needs --primes or --input")
        base = TowerDescriptor(tuple(args.primes))
        units = [_element(u, base) for u in args.unit]
    tower = build_tower(base.level1_generators, units)
    return {"tower": tower_to_obj(tower), "root_discriminant": root_discriminant_data(tower)}


def cmd_tower_search_units(args):
    from .field import TowerDescriptor
    from .unramified import SearchBudget, unit_search
    if not args.primes:
        raise UsageError("tower search-units needs --primes")
    base = TowerDescriptor(tuple(args.primes))
    budget = SearchBudget(exponent_bound=args.exponent_bound, max_candidates=args.max_candidates)
    res = unit_search(base, budget)
    tower = {"level1": list(base.level1_generators)}
    if res.units:
        tower["S0"] = [element_to_obj(u)["coeffs"] for u in res.units]
    return {
        "tower": tower,
        "units": [str(u) for u in res.units],
        "exponents": [[s, list(e)] for s, e in res.exponents],
        "candidates": res.candidates,
        "passed": res.passed,
        "note": res.note,
    }


def cmd_unramified_check(args):
    from .unramified import SearchBudget, UnramifiedCertificate, check_unramified_witness, search_witness
    if args.input:
        return UnramifiedCertificate.from_obj(load_json(args.input)).to_obj()
    if not (args.field and args.w):
        raise UsageError("unramified check needs --field and --w (or --input)")
    tower = _tower_arg(args.field)
    w = _element(args.w, tower)
    if args.beta:
        return check_unramified_witness(w, _element(args.beta, tower)).to_obj()
    cert = search_witness(w, SearchBudget(exponent_bound=args.exponent_bound, max_candidates=args.max_candidates))
    if cert is None:
        return {"valid": False, "w": element_to_obj(w), "beta": None,
                "note": "no witness in the searched candidate set"}
    return cert.to_obj()


def _domain_arg(arg: str):
    from .domain import DomainBasis
    obj = load_json(arg)
    if isinstance(obj, dict) and "g" not in obj:
        obj = _pick(obj, "domain")
    return DomainBasis.from_obj(obj)


def cmd_domain_build(args):
    from .domain import build_domain
    dom = build_domain(_tower_arg(args.tower), bits_=args.precision_bits)
    return dom.to_obj()


def cmd_domain_reduce(args):
    from .domain import reduce_point
    dom = _domain_arg(args.domain)
    alpha = _element(args.point, dom.tower)
    res = reduce_point(dom, alpha)
    out = res.to_obj()
    out["input"] = element_to_obj(alpha)
    out["shift"] = element_to_obj(res.shift) if res.shift is not None else None
    return out


def cmd_domain_report(args):
    from .domain import bound_report, reports_to_csv
    reports = [bound_report(_domain_arg(d), args.mode, args.vertex_cap) for d in args.domain]
    if args.format == "csv":
        return reports_to_csv(reports)
    return [r.to_obj() for r in reports] if len(reports) > 1 else reports[0].to_obj()


def cmd_voronoi_field(args):
    from .voronoi import FieldSpec, field_report
    fld = FieldSpec.from_obj(_pick(load_json(args.field), "tower"))
    return field_report(fld, args.mode, args.enum_nodes, args.precision_bits).to_obj()


def cmd_cyclo_scan(args):
    from .voronoi import cyclo_scan
    try:
        eps = Fraction(args.epsilon)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --epsilon {args.epsilon!r}") from exc
    scan = cyclo_scan(args.max_m, eps, min_m=args.min_m, workers=args.workers, bits_=args.scan_bits)
    if args.format == "csv":
        return scan.to_csv()
    return scan.to_obj()


def _lattice_arg(arg: str):
    from .lattice import LatticeInstance
    return LatticeInstance.from_json(_pick(load_json(arg), "lattice"))


def _lattice_obj(lat) -> dict:
    obj = json.loads(lat.to_json())
    if lat.transform is not None:
        obj["transform"] = [[str(x) for x in row] for row in lat.transform]
    return obj


def cmd_lattice_lll(args):
    from .lattice import lll_reduce
    return {"lattice": _lattice_obj(lll_reduce(_lattice_arg(args.lattice)))}


def cmd_lattice_svp(args):
    from .intervals import to_strs
    from .lattice import shortest_vector_l2, shortest_vector_linf
    lat = _lattice_arg(args.lattice)
    if args.norm == "l2":
        x, sq = shortest_vector_l2(lat)
        return {"norm": "l2", "coefficients": list(x), "squared_norm": str(sq)}
    if args.bound is None:
        raise UsageError("--norm linf needs --bound")
    res = shortest_vector_linf(lat, Fraction(args.bound), args.precision_bits)
    if res is None:
        return {"norm": "linf", "found": False, "bound": args.bound}
    x, linf = res
    return {"norm": "linf", "found": True, "coefficients": list(x), "linf": to_strs(linf)}


def cmd_lattice_cvp(args):
    from .intervals import to_strs
    from .lattice import closest_vector
    lat = _lattice_arg(args.lattice)
    target = load_json(args.target) if args.target.lstrip().startswith("[") else args.target.split(",")
    res = closest_vector(lat, _fractions(target), ambient=args.ambient, bits_=args.precision_bits)
    out = {"coefficients": list(res.coefficients), "squared_distance": str(res.squared_distance),
           "distance": to_strs(res.distance)}
    if res.ambient_vector is not None:
        out["ambient_vector"] = _strs(res.ambient_vector)
    return out


def cmd_lattice_cover(args):
    from .intervals import to_strs
    from .lattice import covering_radius_small
    cr = covering_radius_small(_lattice_arg(args.lattice), args.mode, args.enum_nodes, args.precision_bits)
    out = {"method": cr.method, "interval": to_strs(cr.interval),
           "squared_lower": str(cr.squared_lower), "squared_upper": str(cr.squared_upper)}
    if cr.deep_hole is not None:
        out["deep_hole"] = _strs(cr.deep_hole)
    return out


HANDLERS = {
    ("tower", "build"): cmd_tower_build,
    ("tower", "search-units"): cmd_tower_search_units,
    ("unramified", "check"): cmd_unramified_check,
    ("domain", "build"): cmd_domain_build,
    ("domain", "reduce"): cmd_domain_reduce,
    ("domain", "report"): cmd_domain_report,
    ("voronoi", "field"): cmd_voronoi_field,
    ("cyclo", "scan"): cmd_cyclo_scan,
    ("lattice", "lll"): cmd_lattice_lll,
    ("lattice", "svp"): cmd_lattice_svp,
    ("lattice", "cvp"): cmd_lattice_cvp,
    ("lattice", "cover"): cmd_lattice_cover,
}


# ----------------------------------------------------------------- parser

def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--precision-bits", type=_positive, default=256)
    p.add_argument("--exponent-bound", type=_positive, default=3)
    p.add_argument("--max-candidates", type=_positive, default=1_000_000)
    p.add_argument("--enum-nodes", type=_positive, default=4096)
    p.add_argument("--vertex-cap", type=_positive, default=2 ** 20)
    p.add_argument("--workers", type=_positive, default=os.cpu_count() or 1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", help="write the artifact here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="towerdomains", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", metavar="{" + ",".join(COMMANDS) + "}")
    subs = {}
    for group, names in COMMANDS.items():
        g = groups.add_parser(group)
        subs[group] = g.add_subparsers(dest="command", metavar="{" + ",".join(names) + "}")

    def add(group, name, help_):
        return subs[group].add_parser(name, parents=[common], help=help_)

    p = add("tower", "build", "validate a tower and print its descriptor")
    p.add_argument("--primes", type=int, nargs="+")
    p.add_argument("--unit", action="append", default=[], help="element of L, repeatable")
    p.add_argument("--input", help="tower JSON (e.g. from 'tower search-units')")

    p = add("tower", "search-units", "greedy search for S0")
    p.add_argument("--primes", type=int, nargs="+")

    p = add("unramified", "check", "certify L(√w)/L unramified at finite primes")
    p.add_argument("--field", help='base field JSON, e.g. {"level1":[-5]}')
    p.add_argument("--w")
    p.add_argument("--beta", help="witness; searched for when omitted")
    p.add_argument("--input", help="certificate JSON to re-verify")

    p = add("domain", "build", "fundamental domain of O_{N,eps}")
    p.add_argument("--tower", required=True)

    p = add("domain", "reduce", "reduce a point of N into the domain")
    p.add_argument("--domain", required=True)
    p.add_argument("--point", required=True, help="expression in N, or element JSON")

    p = add("domain", "report", "radii, index and exponent report")
    p.add_argument("--domain", required=True, action="append")
    p.add_argument("--mode", choices=("auto", "vertex", "triangle"), default="auto")

    p = add("voronoi", "field", "covering radius, minimum and volume check for a field")
    p.add_argument("--field", required=True, help='{"level1":[...]} or {"cyclotomic":m}')
    p.add_argument("--mode", choices=("auto", "exact", "bounds"), default="auto")

    p = add("cyclo", "scan", "root discriminant scan over cyclotomic fields")
    p.add_argument("--max-m", type=_positive, required=True)
    p.add_argument("--min-m", type=_positive, default=1)
    p.add_argument("--epsilon", default="1/10")
    p.add_argument("--scan-bits", type=_positive, default=64,
                   help="interval precision of the scan (ties are decided exactly)")

    for name, help_ in (("lll", "LLL reduction"), ("svp", "shortest vector"),
                        ("cvp", "closest vector"), ("cover", "covering radius")):
        p = add("lattice", name, help_)
        p.add_argument("--lattice", required=True, help='{"gram": [...]} or {"basis": [...]}')
        if name == "svp":
            p.add_argument("--norm", choices=("l2", "linf"), default="l2")
            p.add_argument("--bound")
        if name == "cvp":
            p.add_argument("--target", required=True, help="comma-separated rationals or JSON list")
            p.add_argument("--ambient", action="store_true")
        if name == "cover":
            p.add_argument("--mode", choices=("auto", "exact", "bounds"), default="auto")
    return parser


# ----------------------------------------------------------------- dispatch

def _error(code: str, message: str, exit_code: int) -> int:
    payload = {"error": {"code": code, "message": message, "exit": exit_code}}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return exit_code


def _render(result) -> str:
    if isinstance(result, str):
        return result
    return json.dumps(result, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _exit_for(exc: errors.TowerError) -> int:
    if isinstance(exc, errors.ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, (errors.BudgetExhaustedError, errors.PrecisionError, errors.CapacityError,
                        errors.UndecidableError)):
        return EXIT_LIMIT
    return EXIT_INTERNAL


def _parse(parser, argv):
    if argv and argv[0] in COMMANDS and len(argv) > 1 and not argv[1].startswith("-") \
            and argv[1] not in COMMANDS[argv[0]]:
        raise UsageError(f"unknown subcommand {argv[0]} {argv[1]!r}", EXIT_UNKNOWN_COMMAND, "unknown_subcommand")
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        raise UsageError(f"unknown subcommand {argv[0]!r}", EXIT_UNKNOWN_COMMAND, "unknown_subcommand")
    args = parser.parse_args(argv)
    if args.group is None or getattr(args, "command", None) is None:
        raise UsageError("missing subcommand", EXIT_UNKNOWN_COMMAND, "unknown_subcommand")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        result = HANDLERS[(args.group, args.command)](args)
    except UsageError as exc:
        return _error(exc.code, str(exc), exc.exit_code)
    except MalformedInput as exc:
        return _error(exc.code, str(exc), EXIT_BAD_JSON)
    except errors.TowerError as exc:
        return _error(exc.code, str(exc), _exit_for(exc))
    except (KeyError, TypeError, IndexError) as exc:
        # structurally wrong JSON (missing or mistyped fields)
        return _error("malformed_json", f"unexpected input structure: {exc!r}", EXIT_BAD_JSON)
    except (ValueError, ZeroDivisionError) as exc:
        return _error("validation", str(exc), EXIT_VALIDATION)
    text = _render(result)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
