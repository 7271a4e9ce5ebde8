"""Surround certificates from subarcs of a curve, and nested refinement chains.

The search never extrapolates: an iterate that cannot be represented or
resolved ends the search with a :class:`PrecisionHorizon`, and every
certificate is re-verified from the source curve before it is returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import mpmath
from mpmath import mp, mpf

from ..arith import ExponentBudgetExceeded, HPComplex, Real, dec_str, to_mpf
from ..curves import (
    TRANSVERSALITY_FLOOR,
    CurveBudgetExceeded,
    PointOnCurve,
    Reparam,
    SampleCapExceeded,
    SampledCurve,
    _direct_crossings,
    _resolvable,
    compose,
    concat,
    iterate_curve,
    self_intersections,
    winding_number,
)
from ..dynmap import ExpMap
from ..hairs import HairSample
from .fourarc import junction_angles

CLOSENESS_THRESHOLD = mpf("0.05")
REPLAY_SAMPLES = 33


class NoTransversalCrossing(Exception):
    pass


@dataclass(frozen=True)
class SearchBudget:
    max_depth: int = 3
    sample_cap: int = 2**16


@dataclass(frozen=True)
class PrecisionHorizon:
    """The search stopped at iterate ``step`` for the reason named by ``stage``."""

    step: int
    stage: str  # "resolution" | "exponent-budget" | "sample-cap" | "depth-budget"
    detail: str = ""

    def to_json(self) -> dict:
        return {"result": "PrecisionHorizon", "step": self.step, "stage": self.stage, "detail": self.detail}


@dataclass
class SurroundCertificate:
    subarcs: list[tuple[mpf, mpf]]
    iterates: list[int]
    target: HPComplex
    epsilon: mpf
    winding: int
    diameter: mpf
    corner_angles: list[mpf]
    image: Optional[SampledCurve] = None

    def to_json(self) -> dict:
        prec = max(self.target.precision_bits, 64)
        return {
            "result": "SurroundCertificate",
            "subarcs": [[dec_str(a, prec), dec_str(b, prec)] for a, b in self.subarcs],
            "iterates": list(self.iterates),
            "target": self.target.to_json(),
            "epsilon": dec_str(self.epsilon, 64),
            "verified": {"winding": self.winding, "diameter": dec_str(self.diameter, 64),
                         "corner_angles": [dec_str(a, 64) for a in self.corner_angles]},
        }


@dataclass
class ReplayReport:
    ok: bool
    winding: int
    diameter: mpf
    corner_angles: list[mpf]
    reason: str = ""
    image: Optional[SampledCurve] = None


def _piece(m: ExpMap, c: SampledCurve, a: mpf, b: mpf, n: int, tol, cap) -> SampledCurve:
    base = SampledCurve.from_geometry(Reparam(c.resolved_geometry(), a, b), REPLAY_SAMPLES, c.precision_bits)
    return iterate_curve(m, base, n, tol, cap)


def replay(m: ExpMap, c: SampledCurve, subarcs: Sequence[tuple[mpf, mpf]], iterates: Sequence[int],
           z: HPComplex, eps: Real, cap: int = 2**16) -> ReplayReport:
    """Rebuild the Jordan curve from the source curve and re-check every claim.

    Consecutive pieces must meet within 2**(-prec/2) relative; they are then
    joined through a shared sample.
    """
    eps = to_mpf(eps, 64)
    pieces = []
    p = c.precision_bits
    try:
        for (a, b), n in zip(subarcs, iterates):
            pieces.append(_piece(m, c, a, b, n, eps / 16, cap))
    except (ExponentBudgetExceeded, SampleCapExceeded) as exc:
        return ReplayReport(False, 0, mpf(0), [], f"replay could not iterate: {exc}")
    with mp.workprec(p):
        gap_tol = mpf(2) ** (-(p // 2)) * max(mpf(1), z.abs())
    for k in range(len(pieces)):
        prev, nxt = pieces[k - 1], pieces[k]
        end, start = prev.samples[-1].z, nxt.samples[0].z
        if (end - start).abs() > gap_tol:
            return ReplayReport(False, 0, mpf(0), [], f"pieces {k - 1} and {k} do not meet")
        s0 = nxt.samples[0]
        nxt.samples[0] = replace(s0, z=end)
    image = concat(pieces, closed=True)
    try:
        wn = winding_number(image, z.with_precision(image.precision_bits))
    except PointOnCurve:
        return ReplayReport(False, 0, mpf(0), [], "target lies on the curve", image)
    diam = image.diameter()
    angles = junction_angles(pieces)
    if abs(wn) != 1:
        return ReplayReport(False, wn, diam, angles, f"winding {wn}", image)
    if diam > eps:
        return ReplayReport(False, wn, diam, angles, "diameter exceeds eps", image)
    if self_intersections(image):
        return ReplayReport(False, wn, diam, angles, "curve is not simple", image)
    return ReplayReport(True, wn, diam, angles, "", image)


def verify_certificate(m: ExpMap, c: SampledCurve, cert: SurroundCertificate) -> ReplayReport:
    return replay(m, c, cert.subarcs, cert.iterates, cert.target, cert.epsilon)


def circle_closeness(piece: SampledCurve, radius: Real, center: Real = 0) -> mpf:
    """C1 distance from ``piece`` to the best-aligned arc of |w - center| = radius.

    Position error divided by the radius plus tangent-angle error, under the
    arc-length-proportional reparametrization of both curves.
    """
    p = piece.precision_bits
    with mp.workprec(p):
        r = to_mpf(radius, p)
        c0 = mpmath.mpc(center)
        pts = [mpmath.mpc(z.re, z.im) for z in piece.zs()]
        lengths = [mpf(0)]
        for a, b in zip(pts, pts[1:]):
            lengths.append(lengths[-1] + abs(b - a))
        total = lengths[-1]
        if total == 0:
            return mpf("inf")
        start = mpmath.arg(pts[0] - c0)
        turn = mpmath.arg((pts[-1] - c0) / (pts[0] - c0))
        sweep = total / r if turn >= 0 else -total / r
        worst = mpf(0)
        for s, w, smp in zip(lengths, pts, piece.samples):
            phi = start + sweep * s / total
            ref = c0 + r * mpmath.expj(phi)
            err = abs(w - ref) / r
            if smp.deriv is not None:
                ref_dir = mpmath.expj(phi + (mp.pi / 2 if sweep > 0 else -mp.pi / 2))
                d = mpmath.mpc(smp.deriv.re, smp.deriv.im)
                err += abs(mpmath.arg(d / ref_dir))
            worst = max(worst, err)
        return worst


def _close_loop(m: ExpMap, c: SampledCurve, n: int, t1: mpf, t2: mpf) -> tuple[mpf, mpf]:
    """Newton on f^n(c(t1)) = f^n(c(t2)) starting from a polyline crossing."""
    g = compose(m, c.resolved_geometry(), n)
    p = c.precision_bits
    for _ in range(40):
        z1, d1 = g.at(t1, p)
        z2, d2 = g.at(t2, p)
        with mp.workprec(p + 32):
            fx, fy = z1.re - z2.re, z1.im - z2.im
            a, b, cc, d = d1.re, -d2.re, d1.im, -d2.im
            det = a * d - b * cc
            if det == 0:
                break
            s1 = (d * fx - b * fy) / det
            s2 = (-cc * fx + a * fy) / det
            t1, t2 = to_mpf(t1 - s1, p), to_mpf(t2 - s2, p)
            if abs(s1) + abs(s2) < mpf(2) ** (8 - p):
                break
    return t1, t2


def _loop_candidates(m: ExpMap, c: SampledCurve, img: SampledCurve, n: int) -> list[tuple[mpf, mpf]]:
    out = []
    if c.closed:
        out.append((img.samples[0].t, img.samples[-1].t))
    for t1, t2, _ in self_intersections(img):
        a, b = _close_loop(m, c, n, t1, t2)
        if a < b:
            out.append((a, b))
    return out


def _quarters(a: mpf, b: mpf, p: int) -> list[tuple[mpf, mpf]]:
    with mp.workprec(p + 8):
        cuts = [to_mpf(a + (b - a) * k / 4, p) for k in range(5)]
    cuts[0], cuts[-1] = a, b
    return list(zip(cuts, cuts[1:]))


def transversal_crossings(m: ExpMap, c: SampledCurve, hair: HairSample):
    xs = _direct_crossings(m, c, c, 0, [hair])
    return [x for x in xs if TRANSVERSALITY_FLOOR <= x.angle <= mpmath.pi - TRANSVERSALITY_FLOOR]


def surround_from_curve(m: ExpMap, c: SampledCurve, hair: Optional[HairSample], z: HPComplex,
                        eps: Real, budget: SearchBudget = SearchBudget()):
    """Four subarcs of ``c`` whose iterates close up around ``z`` with diameter <= eps.

    Returns a verified :class:`SurroundCertificate` or a :class:`PrecisionHorizon`.
    The search looks, level by level, for a sub-curve of f^n o c that closes
    into a loop around ``z``; a loop is split into four consecutive subarcs.
    When ``hair`` is given, ``c`` must first cross it transversally.
    """
    eps = to_mpf(eps, 64)
    if hair is not None and not transversal_crossings(m, c, hair):
        raise NoTransversalCrossing("curve has no crossing with the hair at angle >= the floor")
    p = c.precision_bits
    for n in range(1, budget.max_depth + 1):
        if not _resolvable(m, c, n):
            return PrecisionHorizon(n, "resolution",
                                    "iterate too large to resolve strip heights at working precision")
        try:
            # turning-angle refinement only; the replay imposes the chord bound near the target
            img = iterate_curve(m, c, n, None, budget.sample_cap)
        except CurveBudgetExceeded as exc:
            return PrecisionHorizon(exc.step, "exponent-budget", str(exc))
        except SampleCapExceeded as exc:
            return PrecisionHorizon(n, "sample-cap", str(exc))
        for a, b in _loop_candidates(m, c, img, n):
            subarcs = _quarters(a, b, p)
            rep = replay(m, c, subarcs, [n] * 4, z, eps, budget.sample_cap)
            if rep.ok:
                return SurroundCertificate(subarcs, [n] * 4, z, eps, rep.winding, rep.diameter,
                                           rep.corner_angles, rep.image)
    return PrecisionHorizon(budget.max_depth, "depth-budget", "no loop around the target up to max_depth")


# ---------------------------------------------------------------------------
# refinement chains


@dataclass
class RefinementStage:
    target: HPComplex
    epsilon: mpf
    certificate: SurroundCertificate
    interval: tuple[mpf, mpf]  # on the original curve
    depth: int  # total iterate count from the original curve to this stage's Jordan curve

    def to_json(self) -> dict:
        p = max(self.target.precision_bits, 64)
        return {"target": self.target.to_json(), "epsilon": dec_str(self.epsilon, 64),
                "certificate": self.certificate.to_json(),
                "interval": [dec_str(self.interval[0], p), dec_str(self.interval[1], p)],
                "depth": self.depth}


@dataclass
class RefinementChain:
    stages: list[RefinementStage] = field(default_factory=list)
    stopped: Optional[PrecisionHorizon] = None

    def to_json(self) -> dict:
        return {"stages": [s.to_json() for s in self.stages],
                "stopped": self.stopped.to_json() if self.stopped else None}


def refine_dense_orbit(m: ExpMap, c: SampledCurve, targets: Sequence[tuple[HPComplex, Real]],
                       budget: SearchBudget = SearchBudget()) -> RefinementChain:
    """Apply the surround search stage by stage on the image of the surviving interval.

    The surviving interval of a stage is its first certified subarc, carried
    back to parameters of the original curve.
    """
    for z, _ in targets:
        if z.is_zero():
            raise ValueError("targets must be nonzero")
    chain = RefinementChain()
    cur = c
    lo, hi = mpf(0), mpf(1)
    depth = 0
    p = c.precision_bits
    for z, eps in targets:
        res = surround_from_curve(m, cur, None, z, eps, budget)
        if isinstance(res, PrecisionHorizon):
            chain.stopped = PrecisionHorizon(depth + res.step, res.stage, res.detail)
            return chain
        a, b = res.subarcs[0]
        n = res.iterates[0]
        with mp.workprec(p + 16):
            new_lo = to_mpf(lo + a * (hi - lo), p)
            new_hi = to_mpf(lo + b * (hi - lo), p)
        if not (lo <= new_lo < new_hi <= hi):
            chain.stopped = PrecisionHorizon(depth + n, "resolution", "surviving interval collapsed")
            return chain
        lo, hi = new_lo, new_hi
        depth += n
        chain.stages.append(RefinementStage(z, to_mpf(eps, 64), res, (lo, hi), depth))
        geom = compose(m, Reparam(cur.resolved_geometry(), a, b), n)
        cur = SampledCurve.from_geometry(geom, REPLAY_SAMPLES, p)
    return chain
