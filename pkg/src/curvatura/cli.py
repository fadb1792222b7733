"""Command-line front end: ``curvatura {compute,nodal,sweep,verify}``.

Exit codes: 0 success, 2 input error, 3 regularity failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import engine
from .field import ExpressionError, FieldDomainError, parse
from .geometry import (
    DegenerateCellError,
    Domain,
    MeshTopologyError,
    NonRegularLevelError,
    SublevelNotContainedError,
)
from .integrand import IrregularPointError
from .oracles import brute_force_measure

EXIT_OK, EXIT_INPUT, EXIT_REGULARITY = 0, 2, 3
CSV_COLUMNS = ("a", "k", "value", "method", "resolution", "warning")


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- parsing helpers

def parse_floats(text: str, what: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def parse_box(text: str) -> Domain:
    """``lo1,hi1xlo2,hi2x...``."""
    lo, hi = [], []
    for part in text.split("x"):
        vals = parse_floats(part, "--box")
        if len(vals) != 2:
            raise InputError(f"--box: each axis needs 'lo,hi', got {part!r}")
        lo.append(vals[0])
        hi.append(vals[1])
    try:
        return Domain.box(lo, hi)
    except ValueError as exc:
        raise InputError(f"--box: {exc}") from None


def parse_torus(text: str) -> Domain:
    try:
        return Domain.torus(parse_floats(text, "--torus"))
    except ValueError as exc:
        raise InputError(f"--torus: {exc}") from None


def parse_levels(text: str) -> list:
    """``start:stop:count``, inclusive of both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"--levels: expected start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"--levels: expected start:stop:count, got {text!r}") from None
    if count < 0:
        raise InputError("--levels: count must be >= 0")
    return [float(v) for v in np.linspace(start, stop, count)]


def parse_degrees(text: str | None, n: int) -> tuple:
    if text is None:
        return tuple(range(n + 1))
    try:
        ks = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InputError(f"--degrees: expected integers, got {text!r}") from None
    if not ks:
        raise InputError("--degrees: empty list")
    return ks


def parse_res(text: str | None, n: int):
    if text is None:
        return None
    vals = [int(t) for t in text.split(",")]
    if len(vals) == 1:
        return vals[0]
    if len(vals) != n:
        raise InputError(f"--res: need 1 or {n} values")
    if len(set(vals)) != 1:
        raise InputError("--res: anisotropic resolutions are not supported by the engine")
    return vals[0]


# ---------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvatura", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, field_required=True):
        sp.add_argument("-f", "--field", required=field_required, help="field expression, e.g. 'x^2+y^2-1'")
        dom = sp.add_mutually_exclusive_group(required=field_required)
        dom.add_argument("--torus", help="periods L1,...,Ln")
        dom.add_argument("--box", help="bounds lo1,hi1xlo2,hi2x...")
        sp.add_argument("--res", help="cells per axis")
        fmt = sp.add_mutually_exclusive_group()
        fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
        fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
        sp.add_argument("-o", "--output", help="write the report here instead of stdout")
        sp.add_argument("--threads", type=int, help="worker cap (default: $CURVATURA_THREADS, else 1)")
        sp.add_argument("--seed", type=int, default=0, help="quasirandom scramble seed")

    c = sub.add_parser("compute", help="intrinsic volumes of {f <= a}")
    common(c)
    c.add_argument("-a", "--level", type=float, required=True)
    c.add_argument("-k", "--degrees", help="comma-separated k values (default 0..n)")
    c.add_argument("--method", choices=engine.METHODS, default="volume")
    c.add_argument("--richardson", action="store_true", help="add an O(h) extrapolated value")
    c.add_argument("--mc", type=int, metavar="SAMPLES", help="add a quasi-Monte Carlo volume estimate")

    nd = sub.add_parser("nodal", help="volume of the zero set {f = 0} on a torus")
    common(nd)
    nd.add_argument("--variant", choices=engine.VARIANTS, default="all")

    sw = sub.add_parser("sweep", help="intrinsic volumes over a range of levels")
    common(sw)
    sw.add_argument("--levels", required=True, help="start:stop:count")
    sw.add_argument("-k", "--degrees")
    sw.add_argument("--method", choices=engine.METHODS, default="volume")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("-o", "--output")
    v.add_argument("--json", dest="fmt", action="store_const", const="json")
    v.add_argument("--threads", type=int)
    return p


def _domain(args) -> Domain:
    return parse_torus(args.torus) if args.torus else parse_box(args.box)


def _field(args, n):
    try:
        return parse(args.field, n)
    except ExpressionError as exc:
        raise InputError(f"--field: {exc}") from None


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_compute(args) -> str:
    dom = _domain(args)
    n = dom.dim
    expr = _field(args, n)
    req = engine.ComputeRequest(expr, dom, args.level, parse_degrees(args.degrees, n), args.method,
                                parse_res(args.res, n), args.richardson, args.threads)
    rep = engine.compute_intrinsic_volumes(req)
    extra = None
    if args.mc:
        est = brute_force_measure(expr, dom, args.level, args.mc, seed=args.seed)
        extra = {"k": 0, "value": est.value, "method": "monte-carlo", "stderr": est.stderr}
    if args.fmt == "csv":
        rows = rep.csv_rows()
        if extra:
            rows.append((rep.level, 0, extra["value"], "monte-carlo", args.mc, ""))
        return _csv(rows, CSV_COLUMNS)
    out = rep.as_dict()
    if extra:
        out["results"].append(extra)
    return json.dumps(out, indent=2) + "\n"


def cmd_nodal(args) -> str:
    dom = _domain(args)
    if not dom.is_torus:
        raise InputError("nodal volumes need --torus")
    expr = _field(args, dom.dim)
    res = parse_res(args.res, dom.dim) or engine.default_resolution(dom.dim)
    vals = engine.nodal_volume(expr, dom, args.variant, res, args.threads)
    if not isinstance(vals, dict):
        vals = {args.variant: vals}
    if args.fmt == "csv":
        return _csv([(name, v, res) for name, v in vals.items()], ("variant", "value", "resolution"))
    out = {
        "field": expr.render(),
        "domain": dom.describe(),
        "level": 0.0,
        "resolution": res,
        "results": [{"variant": name, "value": v} for name, v in vals.items()],
        "warnings": engine.seam_warnings(expr, dom),
    }
    return json.dumps(out, indent=2) + "\n"


def cmd_sweep(args) -> str:
    dom = _domain(args)
    n = dom.dim
    expr = _field(args, n)
    levels = parse_levels(args.levels)
    ks = parse_degrees(args.degrees, n)
    engine.ComputeRequest(expr, dom, 0.0, ks, args.method)  # validates ks and method
    rows = engine.level_sweep(expr, dom, levels, ks, parse_res(args.res, n), args.method, args.threads)
    if args.fmt == "json":
        out = {"field": expr.render(), "domain": dom.describe(),
               "rows": [dict(zip(CSV_COLUMNS, (r.a, r.k, r.value, r.method, r.resolution, r.warning)))
                        for r in rows]}
        return json.dumps(out, indent=2) + "\n"
    return _csv([(r.a, r.k, r.value, r.method, r.resolution, r.warning) for r in rows], CSV_COLUMNS)


def cmd_verify(args):
    from . import verify

    nums = None
    if args.only:
        try:
            nums = [int(t) for t in args.only.split(",")]
        except ValueError:
            raise InputError("--only: expected criterion numbers") from None
        bad = [x for x in nums if x not in verify.CRITERIA]
        if bad:
            raise InputError(f"--only: unknown criteria {bad}")
    live = None if args.fmt == "json" else sys.stdout
    results = verify.run_all(nums, out=live if not args.output else None)
    if args.fmt == "json":
        text = json.dumps([{"criterion": r.number, "name": r.name, "passed": r.passed,
                            "detail": r.detail} for r in results], indent=2) + "\n"
    else:
        text = "".join(r.line() + "\n" for r in results)
    if args.output or args.fmt == "json":
        _emit(text, args.output)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=sys.stderr)
    return EXIT_OK if passed == len(results) else 1


COMMANDS = {"compute": cmd_compute, "nodal": cmd_nodal, "sweep": cmd_sweep}


# options whose values may start with '-' (e.g. --box -2,2x-2,2)
_VALUE_OPTS = {"--box", "--torus", "--levels", "-a", "--level", "-f", "--field"}


def _bind_values(argv):
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}" if tok.startswith("--") else tok + argv[i + 1])
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_bind_values(argv))
    try:
        if args.threads is not None and args.threads < 1:
            raise InputError("--threads must be >= 1")
        if args.command == "verify":
            return cmd_verify(args)
        if args.fmt is None:
            args.fmt = "csv" if args.command == "sweep" else "json"
        _emit(COMMANDS[args.command](args), args.output)
        return EXIT_OK
    except (NonRegularLevelError, IrregularPointError, DegenerateCellError) as exc:
        print(f"curvatura: regularity failure: {exc}", file=sys.stderr)
        return EXIT_REGULARITY
    except (InputError, ExpressionError, FieldDomainError, SublevelNotContainedError,
            MeshTopologyError, ValueError) as exc:
        print(f"curvatura: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"curvatura: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
