"""Command-line front end.  Every subcommand prints one JSON document (sorted keys).

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import re
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from .arith import DEFAULT_EXPONENT_BUDGET, DEFAULT_PRECISION, ExponentBudgetExceeded, HPComplex, to_mpf
from .constructions import (
    NoTransversalCrossing,
    PrecisionHorizon,
    SearchBudget,
    VerificationFailed,
    Violation,
    ZeroTarget,
    covering_check,
    four_arc_jordan,
    kappa_crosses_strips,
    kappa_segment,
    nice_check,
    parse_region,
    refine_dense_orbit,
    surround_from_curve,
)
from .constructions.nice import NiceBudgetExceeded
from .curves import (
    CurveError,
    SampledCurve,
    angle_set,
    arc,
    circle,
    iterate_curve,
    polyline,
    segment,
)
from .dynmap import InvalidK, InvalidLambda, OrbitLeftS, classify, make_map, verify_lemelt
from .hairs import Itinerary, NonConvergence, OutsideRange, periodic_point, trace_boundary, trace_hair
from .render import RenderSpec, render

PRECISION_ENV = "EXPDYN_PRECISION"


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class CheckFailed(Exception):
    """Carries the JSON report of a failed verification."""

    def __init__(self, report: dict):
        super().__init__(report.get("result", "failed"))
        self.report = report


# ---------------------------------------------------------------------------
# argument helpers


def _guard(flag: str, fn: Callable, text):
    try:
        return fn(text)
    except (ValueError, TypeError, ArithmeticError) as exc:
        raise UsageError(flag, str(exc) or f"bad value {text!r}") from None


def _complex(args, flag: str) -> HPComplex:
    text = getattr(args, flag.lstrip("-").replace("-", "_"))
    return _guard(flag, lambda s: HPComplex.parse(s, args.precision, max_exponent_bits=args.exponent_budget), text)


def _reals(flag: str, text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    for p in parts:
        _guard(flag, lambda s: to_mpf(s, 64), p)
    return parts


def _positive(flag: str, text: str, prec: int):
    v = _guard(flag, lambda s: to_mpf(s, prec), text)
    if not v > 0:
        raise UsageError(flag, "must be positive")
    return v


def _itinerary(flag: str, text: str) -> Itinerary:
    return _guard(flag, Itinerary.parse, text)


def _load_curve(args, flag: str) -> SampledCurve:
    path = getattr(args, flag.lstrip("-"))
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(flag, f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(flag, f"{path} is not JSON: {exc.msg}") from None
    try:
        return SampledCurve.from_json(data, args.exponent_budget)
    except (KeyError, TypeError, ValueError, CurveError) as exc:
        raise UsageError(flag, f"{path} is not a curve file: {exc}") from None


def _map(args):
    lam = _guard("--lambda", lambda s: HPComplex.parse(s, args.precision, max_exponent_bits=args.exponent_budget),
                 args.lam)
    K = _guard("--K", lambda s: to_mpf(s, args.precision), args.K) if args.K is not None else None
    try:
        return make_map(lam, K, args.precision, args.exponent_budget)
    except InvalidLambda as exc:
        raise UsageError("--lambda", str(exc)) from None
    except InvalidK as exc:
        raise UsageError("--K", str(exc)) from None


def _budget_report(exc: ExponentBudgetExceeded) -> dict:
    return {"result": "ExponentBudgetExceeded", "step": getattr(exc, "step", None), "detail": str(exc)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_strips(args) -> dict:
    return _map(args).to_json()


def cmd_classify(args) -> dict:
    m = _map(args)
    if args.budget < 1:
        raise UsageError("--budget", "must be >= 1")
    return classify(m, _complex(args, "--z"), args.budget).to_json()


def cmd_verify_lemelt(args) -> dict:
    m = _map(args)
    if args.n < 0:
        raise UsageError("--n", "must be >= 0")
    try:
        rep = verify_lemelt(m, _complex(args, "--z"), args.n)
    except OrbitLeftS as exc:
        raise CheckFailed({"result": "OrbitLeftS", "step": exc.step}) from None
    out = rep.to_json()
    if not rep.passed:
        raise CheckFailed(out)
    return out


def _hair_common(args):
    m = _map(args)
    a = _itinerary("--itinerary", args.itinerary)
    anchors = _reals("--anchors", args.anchors)
    return m, a, anchors


def cmd_trace_hair(args):
    m, a, anchors = _hair_common(args)
    if args.depth < 1:
        raise UsageError("--depth", "must be >= 1")
    try:
        return trace_hair(m, a, args.depth, anchors).to_json()
    except OutsideRange as exc:
        raise UsageError("--anchors", str(exc)) from None


def cmd_trace_boundary(args):
    m, a, anchors = _hair_common(args)
    if args.k < 0:
        raise UsageError("--k", "must be >= 0")
    try:
        return trace_boundary(m, a, args.k, args.side, anchors).to_json()
    except OutsideRange as exc:
        raise UsageError("--anchors", str(exc)) from None


def cmd_periodic(args) -> dict:
    m = _map(args)
    if not args.cycle or set(args.cycle) - {"0", "1"}:
        raise UsageError("--cycle", "expected a nonempty word over {0,1}")
    try:
        return periodic_point(m, args.cycle).to_json()
    except NonConvergence as exc:
        raise CheckFailed({"result": "NonConvergence", "detail": str(exc)}) from None


def cmd_iterate_curve(args) -> dict:
    m = _map(args)
    c = _load_curve(args, "--curve")
    if args.n < 0:
        raise UsageError("--n", "must be >= 0")
    tol = _positive("--tol", args.tol, 64) if args.tol is not None else None
    return iterate_curve(m, c, args.n, tol, args.sample_cap).to_json()


def _hair_family(m, args):
    anchors = _reals("--anchors", args.anchors)
    fam = []
    for word in args.itineraries.split(","):
        try:
            fam.append(trace_hair(m, _itinerary("--itineraries", word), args.hair_depth, anchors))
        except OutsideRange as exc:
            raise UsageError("--anchors", str(exc)) from None
    return fam


def cmd_angle_set(args) -> dict:
    m = _map(args)
    c = _load_curve(args, "--curve")
    if args.n < 0:
        raise UsageError("--n", "must be >= 0")
    fam = _hair_family(m, args)
    levels = []
    prev = None
    for n in range(args.n + 1):
        prev = angle_set(m, c, n, fam, previous=prev, cap=args.sample_cap)
        levels.append(prev.to_json())
    return {"levels": levels}


def _search_budget(args) -> SearchBudget:
    if args.max_depth < 1:
        raise UsageError("--max-depth", "must be >= 1")
    return SearchBudget(args.max_depth, args.sample_cap)


def cmd_surround(args) -> dict:
    m = _map(args)
    c = _load_curve(args, "--curve")
    z = _complex(args, "--target")
    if z.is_zero():
        raise UsageError("--target", "must be nonzero")
    eps = _positive("--eps", args.eps, 64)
    hair = None
    if args.hair_itinerary is not None:
        anchors = _reals("--anchors", args.anchors)
        hair = trace_hair(m, _itinerary("--hair-itinerary", args.hair_itinerary), args.hair_depth, anchors)
    try:
        res = surround_from_curve(m, c, hair, z, eps, _search_budget(args))
    except NoTransversalCrossing as exc:
        raise CheckFailed({"result": "NoTransversalCrossing", "detail": str(exc)}) from None
    out = res.to_json()
    if not isinstance(res, PrecisionHorizon) and res.image is not None:
        out["image"] = res.image.to_json()
    return out


def _stage(text: str, args) -> tuple[HPComplex, object]:
    if "@" not in text:
        raise UsageError("--stage", f"expected 're,im@eps', got {text!r}")
    z_text, eps_text = text.rsplit("@", 1)
    z = _guard("--stage", lambda s: HPComplex.parse(s, args.precision, max_exponent_bits=args.exponent_budget),
               z_text)
    if z.is_zero():
        raise UsageError("--stage", "targets must be nonzero")
    return z, _positive("--stage", eps_text, 64)


def cmd_refine(args) -> dict:
    m = _map(args)
    c = _load_curve(args, "--curve")
    if not args.stage:
        raise UsageError("--stage", "at least one stage is required")
    targets = [_stage(s, args) for s in args.stage]
    return refine_dense_orbit(m, c, targets, _search_budget(args)).to_json()


def cmd_kappa(args) -> dict:
    m = _map(args)
    seg = kappa_segment(m, args.samples)
    return {"curve": seg.to_json(), "crosses": {str(k): v for k, v in kappa_crosses_strips(m, seg).items()}}


def cmd_covering(args) -> dict:
    m = _map(args)
    if not args.cycle or set(args.cycle) - {"0", "1"}:
        raise UsageError("--cycle", "expected a nonempty word over {0,1}")
    radius = _positive("--radius", args.radius, args.precision)
    if args.N < 1:
        raise UsageError("--N", "must be >= 1")
    try:
        p = periodic_point(m, args.cycle)
    except NonConvergence as exc:
        raise CheckFailed({"result": "NonConvergence", "detail": str(exc)}) from None
    out = covering_check(m, p, radius, args.N, cap=args.sample_cap).to_json()
    out["periodic_point"] = p.to_json()
    return out


def cmd_nice_check(args) -> dict:
    m = _map(args)
    c = _load_curve(args, "--boundary")
    region = _guard("--region", lambda s: parse_region(s, args.precision), args.region)
    if args.depth < 0:
        raise UsageError("--depth", "must be >= 0")
    try:
        res = nice_check(m, c, region, args.depth, args.sample_cap)
    except NiceBudgetExceeded as exc:
        out = exc.verdict.to_json()
        out["stopped"] = _budget_report(exc)
        return out
    except ValueError as exc:
        raise UsageError("--boundary", str(exc)) from None
    if isinstance(res, Violation):
        raise CheckFailed(res.to_json())
    return res.to_json()


def cmd_four_arc(args) -> dict:
    m = _map(args)
    z = _complex(args, "--target")
    eps = _positive("--eps", args.eps, 64)
    try:
        return four_arc_jordan(m, z, eps).to_json()
    except ZeroTarget as exc:
        raise UsageError("--target", str(exc)) from None
    except VerificationFailed as exc:
        raise CheckFailed({"result": "VerificationFailed", "field": exc.field, "detail": str(exc)}) from None


def cmd_make_curve(args) -> dict:
    p, b = args.precision, args.exponent_budget
    n = args.samples
    if n < 2:
        raise UsageError("--samples", "must be >= 2")
    pt = lambda flag, s: _guard(flag, lambda x: HPComplex.parse(x, p, max_exponent_bits=b), s)  # noqa: E731
    need = {"segment": ("start", "end"), "circle": ("center", "radius"),
            "arc": ("center", "radius", "theta0", "theta1"), "polyline": ("points",)}[args.kind]
    for name in need:
        if getattr(args, name) is None:
            raise UsageError(f"--{name}", f"required for --kind {args.kind}")
    if args.kind == "segment":
        c = segment(pt("--start", args.start), pt("--end", args.end), n, p, b)
    elif args.kind == "circle":
        c = circle(pt("--center", args.center), _positive("--radius", args.radius, p), n, p, b)
    elif args.kind == "arc":
        c = arc(pt("--center", args.center), _positive("--radius", args.radius, p),
                _guard("--theta0", lambda s: to_mpf(s, p), args.theta0),
                _guard("--theta1", lambda s: to_mpf(s, p), args.theta1), n, p, b)
    else:
        pts = [pt("--points", s) for s in args.points.split(";")]
        if len(pts) < 2:
            raise UsageError("--points", "need at least two vertices")
        c = polyline(pts, args.closed, p, b)
    return c.to_json()


def cmd_render(args) -> dict:
    m = _map(args)
    window = tuple(float(x) for x in _reals("--window", args.window))
    if len(window) != 4:
        raise UsageError("--window", "expected re_min,re_max,im_min,im_max")
    try:
        w, h = (int(x) for x in args.size.lower().split("x"))
    except ValueError:
        raise UsageError("--size", f"expected WIDTHxHEIGHT, got {args.size!r}") from None
    if args.out is None:
        raise UsageError("--out", "render needs an output path")
    try:
        spec = RenderSpec(window, (w, h), args.max_iter, args.palette, list(args.overlay or []))
    except ValueError as exc:
        raise UsageError("--window/--size/--palette", str(exc)) from None
    try:
        path = render(m, spec, args.out)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError("--overlay", str(exc)) from None
    return {"result": "Rendered", "path": str(path), "width": w, "height": h}


# ---------------------------------------------------------------------------
# parser


def _default_precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_PRECISION
    try:
        return int(raw)
    except ValueError:
        raise UsageError(PRECISION_ENV, f"not an integer: {raw!r}") from None


def build_parser(default_prec: int = DEFAULT_PRECISION) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", default="1,0", help="parameter as re,im (default 1,0)")
    common.add_argument("--K", default=None, help="strip cutoff; automatic when omitted")
    common.add_argument("--precision", type=int, default=default_prec,
                        help=f"working precision in bits (env {PRECISION_ENV})")
    common.add_argument("--exponent-budget", type=int, default=DEFAULT_EXPONENT_BUDGET,
                        help="largest binary exponent any value may reach")
    common.add_argument("--out", default=None, help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="expdyn", description="Dynamics of f(z) = lambda e^z.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name: str, fn, help_text: str):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(func=fn)
        return sp

    add("strips", cmd_strips, "strip system for the parameter")

    sp = add("classify", cmd_classify, "escape classification against the tower g^n(0)")
    sp.add_argument("--z", required=True)
    sp.add_argument("--budget", type=int, default=6)

    sp = add("verify-lemelt", cmd_verify_lemelt, "real-part growth and argument bounds along an orbit in S")
    sp.add_argument("--z", required=True)
    sp.add_argument("--n", type=int, required=True)

    sp = add("trace-hair", cmd_trace_hair, "points on the hair with a given itinerary")
    sp.add_argument("--itinerary", required=True)
    sp.add_argument("--depth", type=int, default=20)
    sp.add_argument("--anchors", required=True, help="comma-separated real parts")

    sp = add("trace-boundary", cmd_trace_boundary, "points whose k-th iterate is on a strip edge")
    sp.add_argument("--itinerary", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--side", choices=["+", "-"], required=True)
    sp.add_argument("--anchors", required=True)

    sp = add("periodic", cmd_periodic, "repelling periodic point for a cycle word")
    sp.add_argument("--cycle", required=True)

    sp = add("iterate-curve", cmd_iterate_curve, "image of a curve under f^n")
    sp.add_argument("--curve", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--tol", default=None)
    sp.add_argument("--sample-cap", type=int, default=2**20)

    sp = add("angle-set", cmd_angle_set, "crossing angles of f^j o curve with hairs for j = 0..n")
    sp.add_argument("--curve", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--itineraries", default="0*,1*")
    sp.add_argument("--hair-depth", type=int, default=12)
    sp.add_argument("--anchors", default="11,11.5,12,13,14,16,18,20")
    sp.add_argument("--sample-cap", type=int, default=2**16)

    for name, fn, text in (("surround", cmd_surround, "four subarcs whose iterates surround a target"),
                           ("refine", cmd_refine, "nested surround stages")):
        sp = add(name, fn, text)
        sp.add_argument("--curve", required=True)
        sp.add_argument("--max-depth", type=int, default=3)
        sp.add_argument("--sample-cap", type=int, default=2**16)
        if name == "surround":
            sp.add_argument("--target", required=True)
            sp.add_argument("--eps", required=True)
            sp.add_argument("--hair-itinerary", default=None, help="require a transversal crossing first")
            sp.add_argument("--hair-depth", type=int, default=12)
            sp.add_argument("--anchors", default="11,11.5,12,13,14,16")
        else:
            sp.add_argument("--stage", action="append", help="target and radius as re,im@eps (repeatable)")

    sp = add("kappa", cmd_kappa, "vertical segment at Re z = K + 1 spanning height 6 pi")
    sp.add_argument("--samples", type=int, default=65)

    sp = add("covering", cmd_covering, "does f^N of a disk about a periodic point cover kappa?")
    sp.add_argument("--cycle", default="0")
    sp.add_argument("--radius", required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--sample-cap", type=int, default=2**16)

    sp = add("nice-check", cmd_nice_check, "forward images of a boundary against its region")
    sp.add_argument("--boundary", required=True)
    sp.add_argument("--region", required=True, help="halfplane:upper|lower, disk:cx,cy,r or polygon:x,y;...")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--sample-cap", type=int, default=2**16)

    sp = add("four-arc", cmd_four_arc, "small Jordan curve around a target from four circle arcs")
    sp.add_argument("--target", required=True)
    sp.add_argument("--eps", required=True)

    sp = add("make-curve", cmd_make_curve, "write a curve file")
    sp.add_argument("--kind", choices=["segment", "circle", "arc", "polyline"], required=True)
    sp.add_argument("--start")
    sp.add_argument("--end")
    sp.add_argument("--center")
    sp.add_argument("--radius")
    sp.add_argument("--theta0")
    sp.add_argument("--theta1")
    sp.add_argument("--points", help="vertices as re,im;re,im;...")
    sp.add_argument("--closed", action="store_true")
    sp.add_argument("--samples", type=int, default=65)

    sp = add("render", cmd_render, "escape-time image (binary PPM)")
    sp.add_argument("--window", default="-4,14,-8,8")
    sp.add_argument("--size", default="360x320")
    sp.add_argument("--max-iter", type=int, default=50)
    sp.add_argument("--palette", default="fire")
    sp.add_argument("--overlay", action="append", help="'strips' or a curve/hair JSON file (repeatable)")
    return parser


def _emit(obj, out: Optional[str], stdout) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out is None:
        stdout.write(text)
    else:
        Path(out).write_text(text)


_NEGATIVE = re.compile(r"^-(\d|\.\d)")


def _attach_negative_values(argv: Sequence[str]) -> list[str]:
    """Rewrite ``--flag -1,2`` as ``--flag=-1,2`` so argparse does not read the value as an option."""
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        parser = build_parser(_default_precision())
    except UsageError as exc:
        stderr.write(f"expdyn: error: {exc}\n")
        return 2
    argv = _attach_negative_values(sys.argv[1:] if argv is None else argv)
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if args.precision < 64:
        stderr.write("expdyn: error: --precision: must be >= 64\n")
        return 2
    if args.exponent_budget < 1:
        stderr.write("expdyn: error: --exponent-budget: must be positive\n")
        return 2
    try:
        result = args.func(args)
    except UsageError as exc:
        stderr.write(f"expdyn: error: {exc}\n")
        return 2
    except CheckFailed as exc:
        _emit(exc.report, args.out if args.command != "render" else None, stdout)
        return 1
    except ExponentBudgetExceeded as exc:
        _emit(_budget_report(exc), args.out, stdout)
        return 1
    if args.command == "render":
        _emit(result, None, stdout)
    else:
        _emit(result, args.out, stdout)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
