"""Finite-depth checks of f^n(boundary U) disjoint from U."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import mpmath
from mpmath import mp, mpf

from ..arith import ExponentBudgetExceeded, HPComplex, Real, dec_str, to_mpf
from ..curves import CurveBudgetExceeded, SampledCurve, iterate_curve, orient_det
from ..dynmap import ExpMap, FarPoint, Point, step_point

FAR = mpf("inf")


def _tol(z: HPComplex) -> mpf:
    p = z.precision_bits
    with mp.workprec(p):
        return mpf(2) ** (-(p // 2)) * max(mpf(1), z.abs())


@dataclass(frozen=True)
class HalfPlane:
    side: str  # "upper" | "lower" | "left" | "right"

    def depth(self, z: Point) -> mpf:
        """Signed distance into the region (positive inside)."""
        if isinstance(z, FarPoint):
            if z.arg is None:
                raise ExponentBudgetExceeded("far point with unknown angle")
            if self.side in ("upper", "lower"):
                return mpf(0)
            inside = (z.arg == 0) == (self.side == "right")
            return FAR if inside else -FAR
        return {"upper": z.im, "lower": -z.im, "right": z.re, "left": -z.re}[self.side]

    def to_json(self) -> dict:
        return {"kind": "halfplane", "side": self.side}


@dataclass(frozen=True)
class Disk:
    center: HPComplex
    radius: mpf

    def depth(self, z: Point) -> mpf:
        if isinstance(z, FarPoint):
            return -FAR
        with mp.workprec(max(z.precision_bits, self.center.precision_bits)):
            return self.radius - (z - self.center).abs()

    def to_json(self) -> dict:
        return {"kind": "disk", "center": self.center.to_json(), "radius": dec_str(self.radius, 64)}


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, vertices in either orientation."""

    vertices: tuple

    def depth(self, z: Point) -> mpf:
        if isinstance(z, FarPoint):
            return -FAR
        vs = list(self.vertices) + [self.vertices[0]]
        p = z.precision_bits
        with mp.workprec(p):
            dist = min(_seg_dist(z, a, b) for a, b in zip(vs, vs[1:]))
        wn = 0
        for a, b in zip(vs, vs[1:]):
            if a.im <= z.im:
                if b.im > z.im and orient_det(a, b, z)[0] > 0:
                    wn += 1
            elif b.im <= z.im and orient_det(a, b, z)[0] < 0:
                wn -= 1
        return dist if wn else -dist

    def to_json(self) -> dict:
        return {"kind": "polygon", "vertices": [v.to_json() for v in self.vertices]}


def _seg_dist(z, a, b):
    dx, dy = b.re - a.re, b.im - a.im
    L2 = dx * dx + dy * dy
    s = ((z.re - a.re) * dx + (z.im - a.im) * dy) / L2 if L2 else mpf(0)
    s = min(mpf(1), max(mpf(0), s))
    return mpmath.hypot(z.re - a.re - s * dx, z.im - a.im - s * dy)


Region = Union[HalfPlane, Disk, Polygon]


def parse_region(text: str, prec: int = 256) -> Region:
    """``halfplane:upper``, ``disk:cx,cy,r`` or ``polygon:x1,y1;x2,y2;...``."""
    kind, _, arg = text.partition(":")
    if kind == "halfplane":
        if arg not in ("upper", "lower", "left", "right"):
            raise ValueError(f"unknown half-plane {arg!r}")
        return HalfPlane(arg)
    if kind == "disk":
        parts = arg.split(",")
        if len(parts) != 3:
            raise ValueError("disk needs cx,cy,r")
        r = to_mpf(parts[2], prec)
        if r <= 0:
            raise ValueError("disk radius must be positive")
        return Disk(HPComplex.make(parts[0], parts[1], prec), r)
    if kind == "polygon":
        pts = [HPComplex.parse(v, prec) for v in arg.split(";") if v]
        if len(pts) < 3:
            raise ValueError("polygon needs at least three vertices")
        return Polygon(tuple(pts))
    raise ValueError(f"unknown region kind {kind!r}")


def strictly_inside(region: Region, z: Point) -> tuple[bool, mpf]:
    d = region.depth(z)
    if isinstance(z, FarPoint):
        return d > 0, d
    return d > _tol(z), d


@dataclass(frozen=True)
class NiceUpTo:
    depth: int
    far_from_step: Optional[int] = None
    caveat: str = "checked at sample resolution only; unsampled boundary points may still violate"

    def to_json(self) -> dict:
        return {"result": "NiceUpTo", "depth": self.depth, "far_from_step": self.far_from_step,
                "caveat": self.caveat}


@dataclass(frozen=True)
class Violation:
    n: int
    t: mpf
    z: Point
    depth_inside: mpf

    def to_json(self) -> dict:
        return {"result": "Violation", "n": self.n, "t": dec_str(self.t, 64), "z": self.z.to_json(),
                "depth_inside": dec_str(self.depth_inside, 64) if mpmath.isfinite(self.depth_inside) else "inf"}


class NiceBudgetExceeded(ExponentBudgetExceeded):
    def __init__(self, step: int, verdict: NiceUpTo):
        super().__init__(f"boundary orbit lost its angle at step {step}", step)
        self.verdict = verdict


def _worst(region: Region, ts: Sequence[mpf], pts: Sequence[Point], n: int) -> Optional[Violation]:
    best = None
    for t, z in zip(ts, pts):
        inside, d = strictly_inside(region, z)
        if inside and (best is None or d > best.depth_inside):
            best = Violation(n, t, z, d)
    return best


def nice_check(m: ExpMap, boundary: SampledCurve, region: Region, depth: int,
               cap: int = 2**16) -> Union[NiceUpTo, Violation]:
    """First step n <= depth at which an iterated boundary sample lands strictly in U.

    The witness is the most interior sample at that step.  Once the image
    outgrows the exponent budget, samples continue individually as far
    points (exact for real orbits); refinement stops there.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    for s in boundary.samples:
        if strictly_inside(region, s.z)[0]:
            raise ValueError("boundary sample lies strictly inside the region")
    cur = boundary
    far: Optional[list[Point]] = None
    far_from = None
    ts = boundary.ts()
    for n in range(1, depth + 1):
        if far is None:
            try:
                cur = iterate_curve(m, cur, 1, None, cap)
                ts = cur.ts()
                pts: list[Point] = cur.zs()
            except (CurveBudgetExceeded, ExponentBudgetExceeded):
                far = list(cur.zs())
                far_from = n
        if far is not None:
            try:
                far = [step_point(m, z) for z in far]
            except ExponentBudgetExceeded:
                raise NiceBudgetExceeded(n, NiceUpTo(n - 1, far_from)) from None
            pts = far
        try:
            v = _worst(region, ts, pts, n)
        except ExponentBudgetExceeded:
            raise NiceBudgetExceeded(n, NiceUpTo(n - 1, far_from)) from None
        if v is not None:
            return v
    return NiceUpTo(depth, far_from)
