"""Sampled piecewise-C1 curves, their forward images, and exact planar predicates.

A curve keeps an optional *geometry*: an object with ``at(t, prec)`` returning
the point and its parameter derivative.  Refinement of an image curve goes
back to the geometry instead of interpolating between stored samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Protocol, Sequence

import mpmath
import numpy as np
from mpmath import mp, mpf

from . import kernels
from .arith import (
    DEFAULT_EXPONENT_BUDGET,
    DEFAULT_PRECISION,
    ExponentBudgetExceeded,
    HPComplex,
    Real,
    dec_str,
    hp_exp,
    to_mpf,
)
from .dynmap import ExpMap, apply, with_precision
from .hairs import HairSample, Itinerary, NonConvergence, OutsideRange, _trace_point

DEFAULT_SAMPLE_CAP = 2**20
MAX_TURN = mpf("0.1")
TRANSVERSALITY_FLOOR = 1e-3
ANGLE_MATCH_TOL = 1e-3
CROSSING_NEWTON_ITER = 60
CROSSING_MAX_BITS = 2**20  # working precision needed to resolve t grows like log2 |d/dt f^n(c)|


class CurveError(Exception):
    pass


class SampleCapExceeded(CurveError):
    def __init__(self, cap: int, partial: Optional["SampledCurve"] = None):
        super().__init__(f"sample cap {cap} exceeded")
        self.cap = cap
        self.partial = partial


class CurveBudgetExceeded(ExponentBudgetExceeded):
    """Exponent budget hit while iterating a curve; ``partial`` is the last full image."""

    def __init__(self, step: int, partial: "SampledCurve"):
        super().__init__(f"curve image at step {step} exceeds the exponent budget", step)
        self.partial = partial


class PointOnCurve(CurveError):
    pass


# ---------------------------------------------------------------------------
# geometries


class Geometry(Protocol):
    def at(self, t: mpf, prec: int) -> tuple[HPComplex, HPComplex]: ...


def _hp(x: Real, prec: int, budget: int = DEFAULT_EXPONENT_BUDGET) -> HPComplex:
    if isinstance(x, HPComplex):
        return x.with_precision(prec)
    return HPComplex.from_complex(x, prec, budget)


@dataclass(frozen=True)
class Segment:
    a: HPComplex
    b: HPComplex

    def at(self, t, prec):
        a, b = self.a.with_precision(prec), self.b.with_precision(prec)
        d = b - a
        return a + d * to_mpf(t, prec), d


@dataclass(frozen=True)
class Arc:
    """center + radius * exp(i theta), theta running linearly from theta0 to theta1."""

    center: HPComplex
    radius: mpf
    theta0: mpf
    theta1: mpf

    def at(self, t, prec):
        with mp.workprec(prec + 16):
            span = self.theta1 - self.theta0
            th = self.theta0 + to_mpf(t, prec + 16) * span
            e = mpmath.expjpi(th / mp.pi) * self.radius
            z = self.center.with_precision(prec) + HPComplex.make(e.real, e.imag, prec, self.center.max_exponent_bits)
            d = HPComplex.make(-e.imag * span, e.real * span, prec, self.center.max_exponent_bits)
        return z, d


@dataclass(frozen=True)
class Polyline:
    """Piecewise-linear interpolation through ``points`` at parameters ``ts``."""

    ts: tuple
    points: tuple

    def at(self, t, prec):
        ts = self.ts
        i = max(0, min(len(ts) - 2, _bisect(ts, t) - 1))
        a, b = self.points[i].with_precision(prec), self.points[i + 1].with_precision(prec)
        with mp.workprec(prec):
            dt = ts[i + 1] - ts[i]
            s = (to_mpf(t, prec) - ts[i]) / dt
        d = (b - a) / HPComplex.make(dt, 0, prec)
        return a + (b - a) * s, d


@dataclass(frozen=True)
class Reparam:
    """base restricted to [t0, t1] and stretched onto [0, 1]."""

    base: Geometry
    t0: mpf
    t1: mpf

    def at(self, t, prec):
        with mp.workprec(prec + 16):
            span = self.t1 - self.t0
            u = self.t0 + to_mpf(t, prec + 16) * span
        z, d = self.base.at(u, prec)
        return z, d * to_mpf(span, prec)


@dataclass(frozen=True)
class Joined:
    """Pieces laid end to end, piece k occupying [k/N, (k+1)/N]."""

    pieces: tuple

    def at(self, t, prec):
        n = len(self.pieces)
        with mp.workprec(prec + 16):
            u = to_mpf(t, prec + 16) * n
            k = min(n - 1, max(0, int(mpmath.floor(u))))
            local = u - k
        z, d = self.pieces[k].at(local, prec)
        return z, d * n


@dataclass(frozen=True)
class Composed:
    """f^n applied to ``base``; the derivative is pushed forward by Df = f."""

    map: ExpMap
    base: Geometry
    n: int

    def at(self, t, prec):
        z, d = self.base.at(t, prec)
        lam = self.map.lam.with_precision(max(prec, self.map.precision_bits))
        for _ in range(self.n):
            z = apply_lam(lam, z)
            d = d * z
        return z.with_precision(prec), d.with_precision(prec)


def apply_lam(lam: HPComplex, z: HPComplex) -> HPComplex:
    return lam * hp_exp(z)


def compose(m: ExpMap, g: Geometry, n: int) -> Geometry:
    if n == 0:
        return g
    if isinstance(g, Composed) and g.map is m:
        return Composed(m, g.base, g.n + n)
    return Composed(m, g, n)


def geometry_to_json(g: Optional[Geometry], prec: int) -> Optional[dict]:
    """Exact description of segment and arc geometries; None for anything else."""
    if isinstance(g, Segment):
        return {"kind": "segment", "a": g.a.to_json(), "b": g.b.to_json()}
    if isinstance(g, Arc):
        return {"kind": "arc", "center": g.center.to_json(), "radius": dec_str(g.radius, prec),
                "theta0": dec_str(g.theta0, prec), "theta1": dec_str(g.theta1, prec)}
    return None


def geometry_from_json(d: dict, prec: int, budget: int = DEFAULT_EXPONENT_BUDGET) -> Geometry:
    if d["kind"] == "segment":
        return Segment(HPComplex.from_json(d["a"], budget), HPComplex.from_json(d["b"], budget))
    if d["kind"] == "arc":
        return Arc(HPComplex.from_json(d["center"], budget), to_mpf(d["radius"], prec),
                   to_mpf(d["theta0"], prec), to_mpf(d["theta1"], prec))
    raise ValueError(f"unknown geometry kind {d['kind']!r}")


def _bisect(ts: Sequence[mpf], t) -> int:
    lo, hi = 0, len(ts)
    while lo < hi:
        mid = (lo + hi) // 2
        if ts[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# sampled curves


@dataclass(frozen=True)
class CurveSample:
    t: mpf
    z: HPComplex
    deriv: Optional[HPComplex] = None  # dz/dt, not normalized
    unit: Optional[HPComplex] = None  # set when only the direction is known (loaded curves)

    @property
    def tangent(self) -> Optional[HPComplex]:
        if self.unit is not None:
            return self.unit
        if self.deriv is None or self.deriv.is_zero():
            return None
        return self.deriv / self.deriv.abs()


@dataclass
class SampledCurve:
    samples: list[CurveSample]
    corners: list[mpf] = field(default_factory=list)
    closed: bool = False
    geometry: Optional[Geometry] = None

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample parameters must be strictly increasing")

    def __len__(self):
        return len(self.samples)

    @property
    def precision_bits(self) -> int:
        return self.samples[0].z.precision_bits if self.samples else DEFAULT_PRECISION

    def zs(self) -> list[HPComplex]:
        return [s.z for s in self.samples]

    def ts(self) -> list[mpf]:
        return [s.t for s in self.samples]

    def resolved_geometry(self) -> Geometry:
        if self.geometry is not None:
            return self.geometry
        return Polyline(tuple(self.ts()), tuple(self.zs()))

    def diameter(self) -> mpf:
        """Diameter of the samples; above 400 samples the bounding-box diagonal (an upper bound)."""
        p = self.precision_bits
        pts = self.zs()
        with mp.workprec(p):
            xs = [z.re for z in pts]
            ys = [z.im for z in pts]
            box = mpmath.hypot(max(xs) - min(xs), max(ys) - min(ys))
            if len(pts) > 400:
                return box
            best = mpf(0)
            for i, a in enumerate(pts):
                for b in pts[i + 1:]:
                    best = max(best, mpmath.hypot(a.re - b.re, a.im - b.im))
            return best

    def to_json(self) -> dict:
        p = self.precision_bits
        return {
            "closed": self.closed,
            "samples": [{"t": dec_str(s.t, p), "z": s.z.to_json(),
                         "tangent": s.tangent.to_json() if s.tangent is not None else None}
                        for s in self.samples],
            "corners": [dec_str(c, p) for c in self.corners],
            **({"geometry": geometry_to_json(self.geometry, p)} if geometry_to_json(self.geometry, p) else {}),
        }

    @classmethod
    def from_json(cls, d: dict, max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> "SampledCurve":
        samples = []
        for s in d["samples"]:
            z = HPComplex.from_json(s["z"], max_exponent_bits)
            tan = s.get("tangent")
            deriv = HPComplex.from_json(tan, max_exponent_bits) if tan else None
            samples.append(CurveSample(to_mpf(s["t"], z.precision_bits), z, deriv, deriv))
        p = samples[0].z.precision_bits if samples else DEFAULT_PRECISION
        geom = geometry_from_json(d["geometry"], p, max_exponent_bits) if d.get("geometry") else None
        return cls(samples, [to_mpf(c, p) for c in d.get("corners", [])], bool(d.get("closed", False)), geom)

    @classmethod
    def from_geometry(cls, g: Geometry, n: int = 65, prec: int = DEFAULT_PRECISION,
                      closed: bool = False, corners: Iterable[Real] = ()) -> "SampledCurve":
        if n < 2:
            raise ValueError("need at least two samples")
        corners = sorted(to_mpf(c, prec) for c in corners)
        with mp.workprec(prec):
            ts = sorted(set([mpf(i) / (n - 1) for i in range(n)] + corners))
        samples = []
        for t in ts:
            z, d = g.at(t, prec)
            samples.append(CurveSample(t, z, d))
        if closed:
            samples[-1] = replace(samples[-1], z=samples[0].z)
        return cls(samples, corners, closed, g)


def segment(a, b, n: int = 65, prec: int = DEFAULT_PRECISION,
            max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> SampledCurve:
    g = Segment(_hp(a, prec, max_exponent_bits), _hp(b, prec, max_exponent_bits))
    return SampledCurve.from_geometry(g, n, prec)


def arc(center, radius: Real, theta0: Real, theta1: Real, n: int = 65,
        prec: int = DEFAULT_PRECISION, max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> SampledCurve:
    g = Arc(_hp(center, prec, max_exponent_bits), to_mpf(radius, prec), to_mpf(theta0, prec), to_mpf(theta1, prec))
    return SampledCurve.from_geometry(g, n, prec)


def circle(center, radius: Real, n: int = 129, prec: int = DEFAULT_PRECISION,
           max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> SampledCurve:
    with mp.workprec(prec + 16):
        tau = 2 * mp.pi
    g = Arc(_hp(center, prec, max_exponent_bits), to_mpf(radius, prec), mpf(0), to_mpf(tau, prec))
    return SampledCurve.from_geometry(g, n, prec, closed=True)


def polyline(points: Sequence, closed: bool = False, prec: int = DEFAULT_PRECISION,
             max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> SampledCurve:
    """Polyline through ``points``; every interior vertex is a corner."""
    pts = [_hp(p, prec, max_exponent_bits) for p in points]
    if closed and pts[0] != pts[-1]:
        pts.append(pts[0])
    if len(pts) < 2:
        raise ValueError("need at least two points")
    with mp.workprec(prec):
        ts = tuple(mpf(i) / (len(pts) - 1) for i in range(len(pts)))
    g = Polyline(ts, tuple(pts))
    samples = []
    for i, (t, z) in enumerate(zip(ts, pts)):
        j = min(i, len(pts) - 2)
        samples.append(CurveSample(t, z, (pts[j + 1] - pts[j]) * (len(pts) - 1)))
    return SampledCurve(samples, list(ts[1:-1]), closed, g)


def concat(curves: Sequence[SampledCurve], closed: bool = False) -> SampledCurve:
    """Join curves end to end; piece k is reparametrized onto [k/N, (k+1)/N].

    Consecutive pieces must share their junction point exactly; the shared
    sample is stored once and recorded as a corner.
    """
    n = len(curves)
    p = max(c.precision_bits for c in curves)
    samples: list[CurveSample] = []
    corners: list[mpf] = []
    with mp.workprec(p + 16):
        for k, c in enumerate(curves):
            offset = mpf(k) / n
            for i, s in enumerate(c.samples):
                if k > 0 and i == 0:
                    if samples[-1].z != s.z:
                        raise ValueError(f"piece {k} does not start where piece {k - 1} ends")
                    continue
                d = s.deriv * n if s.deriv is not None else None
                samples.append(CurveSample(to_mpf(offset + s.t / n, p), s.z, d, s.unit))
            if k > 0:
                corners.append(to_mpf(offset, p))
            corners.extend(to_mpf(offset + cc / n, p) for cc in c.corners)
    if closed and samples[0].z != samples[-1].z:
        raise ValueError("closed concatenation must end at its starting point")
    geom = Joined(tuple(c.resolved_geometry() for c in curves))
    return SampledCurve(samples, sorted(set(corners)), closed, geom)


# ---------------------------------------------------------------------------
# forward iteration


def _turn(u: HPComplex, v: HPComplex) -> mpf:
    """Unsigned angle between two nonzero directions."""
    with mp.workprec(64):
        q = mpmath.mpc(v.re, v.im) / mpmath.mpc(u.re, u.im)
        return abs(mpmath.atan2(q.imag, q.real))


def _needs_split(a: CurveSample, b: CurveSample, tol: Optional[mpf], corners: set) -> bool:
    chord = b.z - a.z
    if tol is not None and chord.abs() > tol:
        return True
    if chord.is_zero():
        return False
    if a.deriv is not None and a.t not in corners and not a.deriv.is_zero():
        if _turn(a.deriv, chord) > MAX_TURN / 2:
            return True
    if b.deriv is not None and b.t not in corners and not b.deriv.is_zero():
        if _turn(b.deriv, chord) > MAX_TURN / 2:
            return True
    return False


def refine(c: SampledCurve, tol: Optional[Real] = None, cap: int = DEFAULT_SAMPLE_CAP) -> SampledCurve:
    """Bisect parameter intervals until chords are below ``tol`` and turning is below 0.1 rad."""
    if c.geometry is None:
        return c
    p = c.precision_bits
    tol = to_mpf(tol, p) if tol is not None else None
    with mp.workprec(p):
        min_dt = mpf(2) ** (8 - p)
    corners = set(c.corners)
    out = [c.samples[0]]
    stack = list(reversed(c.samples[1:]))
    total = len(c.samples)
    while stack:
        b = stack[-1]
        a = out[-1]
        with mp.workprec(p):
            dt = b.t - a.t
        if dt > min_dt and _needs_split(a, b, tol, corners):
            if total >= cap:
                raise SampleCapExceeded(cap, SampledCurve(out + list(reversed(stack)), c.corners, c.closed, c.geometry))
            with mp.workprec(p + 8):
                tm = to_mpf(a.t + dt / 2, p)
            z, d = c.geometry.at(tm, p)
            stack.append(CurveSample(tm, z, d))
            total += 1
        else:
            out.append(stack.pop())
    if c.closed:
        out[-1] = replace(out[-1], z=out[0].z)
    return SampledCurve(out, list(c.corners), c.closed, c.geometry)


def _closes(a: HPComplex, b: HPComplex) -> bool:
    p = max(a.precision_bits, b.precision_bits)
    with mp.workprec(p):
        scale = max(mpf(1), a.abs())
        return (a - b).abs() <= scale * mpf(2) ** (-(p // 2))


def _step(m: ExpMap, c: SampledCurve, tol, cap) -> SampledCurve:
    geom = compose(m, c.resolved_geometry(), 1)
    samples = []
    for s in c.samples:
        w = apply(m, s.z)
        samples.append(CurveSample(s.t, w, s.deriv * w if s.deriv is not None else None))
    closed = c.closed or (len(samples) > 2 and _closes(samples[0].z, samples[-1].z))
    if closed and c.closed:
        samples[-1] = replace(samples[-1], z=samples[0].z)
    img = SampledCurve(samples, list(c.corners), closed, geom)
    return refine(img, tol, cap)


def iterate_curve(m: ExpMap, c: SampledCurve, n: int, tol: Optional[Real] = None,
                  cap: int = DEFAULT_SAMPLE_CAP) -> SampledCurve:
    """f^n of ``c`` with adaptive bisection after every step.

    ``tol`` bounds image chord length; ``None`` refines on turning angle only.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    cur = c
    for j in range(1, n + 1):
        try:
            cur = _step(m, cur, tol, cap)
        except CurveBudgetExceeded:
            raise
        except ExponentBudgetExceeded:
            raise CurveBudgetExceeded(j, cur) from None
    return cur


# ---------------------------------------------------------------------------
# exact predicates


def _exact(xs: Sequence[mpf]) -> tuple[list[int], int]:
    """Integers N_i and a common exponent e with xs[i] == N_i * 2**e exactly."""
    # man_exp drops the sign; the raw (sign, man, exp, bc) tuple keeps it
    pairs = [((-1 if x._mpf_[0] else 1) * int(x._mpf_[1]), x._mpf_[2]) for x in xs]
    e = min(ex for man, ex in pairs if man) if any(man for man, _ in pairs) else 0
    return [int(man) << (ex - e) if man else 0 for man, ex in pairs], e


def orient_det(a: HPComplex, b: HPComplex, c: HPComplex) -> tuple[int, mpf]:
    """Exact (sign, value) of (b - a) x (c - a)."""
    (ax, ay, bx, by, cx, cy), e = _exact([a.re, a.im, b.re, b.im, c.re, c.im])
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    sign = (det > 0) - (det < 0)
    p = max(a.precision_bits, b.precision_bits, c.precision_bits) + 32
    with mp.workprec(p):
        value = mpmath.ldexp(mpf(det), 2 * e)
    return sign, value


def _side(a, b, c) -> tuple[int, mpf]:
    sign, value = orient_det(a, b, c)
    return (1 if sign >= 0 else -1), value


def segments_cross(p1, p2, q1, q2) -> Optional[tuple[mpf, mpf]]:
    """Crossing parameters (s on p, u on q) of two segments, or None.

    Zero orientations are read as positive, so a vertex lying exactly on the
    other polyline is counted once across the two segments that share it.
    """
    s1, d1 = _side(q1, q2, p1)
    s2, d2 = _side(q1, q2, p2)
    if s1 == s2:
        return None
    s3, d3 = _side(p1, p2, q1)
    s4, d4 = _side(p1, p2, q2)
    if s3 == s4:
        return None
    p = max(z.precision_bits for z in (p1, p2, q1, q2)) + 32
    with mp.workprec(p):
        s = d1 / (d1 - d2) if d1 != d2 else mpf("0.5")
        u = d3 / (d3 - d4) if d3 != d4 else mpf("0.5")
    return s, u


def _dist_to_segment(z: HPComplex, a: HPComplex, b: HPComplex, p: int) -> mpf:
    with mp.workprec(p):
        dx, dy = b.re - a.re, b.im - a.im
        L2 = dx * dx + dy * dy
        if L2 == 0:
            return mpmath.hypot(z.re - a.re, z.im - a.im)
        s = ((z.re - a.re) * dx + (z.im - a.im) * dy) / L2
        s = min(mpf(1), max(mpf(0), s))
        return mpmath.hypot(z.re - a.re - s * dx, z.im - a.im - s * dy)


def _edges(c: SampledCurve) -> list[tuple[HPComplex, HPComplex]]:
    zs = c.zs()
    edges = list(zip(zs, zs[1:]))
    if c.closed and zs[0] != zs[-1]:
        edges.append((zs[-1], zs[0]))
    return edges


def winding_number(c: SampledCurve, z: HPComplex, tol: Optional[Real] = None) -> int:
    """Winding number of the closed polyline through the samples around ``z``.

    Upward and downward edge crossings of the horizontal ray from ``z`` are
    counted with exact orientation signs.
    """
    if not c.closed:
        raise ValueError("winding number needs a closed curve")
    p = max(c.precision_bits, z.precision_bits)
    with mp.workprec(p):
        tol = to_mpf(tol, p) if tol is not None else mpf(2) ** (-(p // 2)) * max(mpf(1), z.abs())
    wn = 0
    for a, b in _edges(c):
        if _dist_to_segment(z, a, b, p) <= tol:
            raise PointOnCurve(f"{z!r} lies within {mpmath.nstr(tol, 5)} of the curve")
        if a.im <= z.im:
            if b.im > z.im and orient_det(a, b, z)[0] > 0:
                wn += 1
        elif b.im <= z.im and orient_det(a, b, z)[0] < 0:
            wn -= 1
    return wn


def _normalized(points: Sequence[HPComplex]) -> tuple[np.ndarray, np.ndarray]:
    p = max(z.precision_bits for z in points)
    with mp.workprec(p):
        x0 = min(z.re for z in points)
        y0 = min(z.im for z in points)
        scale = max(max(z.re for z in points) - x0, max(z.im for z in points) - y0)
        if scale == 0:
            scale = mpf(1)
        xs = np.array([float((z.re - x0) / scale) for z in points])
        ys = np.array([float((z.im - y0) / scale) for z in points])
    return xs, ys


def _candidate_pairs(a: Sequence[HPComplex], b: Sequence[HPComplex], same: bool, closed: bool):
    """Segment pairs whose boxes overlap, computed on doubles with generous padding."""
    pts = list(a) + ([] if same else list(b))
    xs, ys = _normalized(pts)
    na = len(a)
    ax, ay = xs[:na], ys[:na]
    bx, by = (ax, ay) if same else (xs[na:], ys[na:])
    return kernels.bbox_pairs(
        np.ascontiguousarray(ax[:-1]), np.ascontiguousarray(ay[:-1]),
        np.ascontiguousarray(ax[1:]), np.ascontiguousarray(ay[1:]),
        np.ascontiguousarray(bx[:-1]), np.ascontiguousarray(by[:-1]),
        np.ascontiguousarray(bx[1:]), np.ascontiguousarray(by[1:]),
        1e-9, same, closed)


def _fold(angle: mpf) -> mpf:
    """Reduce a direction difference to [0, pi)."""
    with mp.workprec(64):
        r = angle % mp.pi
        return r if r < mp.pi else mpf(0)


def self_intersections(c: SampledCurve) -> list[tuple[mpf, mpf, mpf]]:
    """Crossings between non-adjacent sample segments as (t1, t2, angle in (0, pi/2])."""
    zs = c.zs()
    if len(zs) < 4:
        return []
    closed = c.closed and zs[0] == zs[-1]
    ts = c.ts()
    out = []
    p = c.precision_bits
    for i, j in _candidate_pairs(zs, zs, True, closed):
        hit = segments_cross(zs[i], zs[i + 1], zs[j], zs[j + 1])
        if hit is None:
            continue
        s, u = hit
        with mp.workprec(p + 16):
            t1 = ts[i] + s * (ts[i + 1] - ts[i])
            t2 = ts[j] + u * (ts[j + 1] - ts[j])
        th = _fold((zs[j + 1] - zs[j]).arg() - (zs[i + 1] - zs[i]).arg())
        with mp.workprec(64):
            th = min(th, mp.pi - th)
        out.append((to_mpf(t1, p), to_mpf(t2, p), th))
    return out


# ---------------------------------------------------------------------------
# angle sets


@dataclass(frozen=True)
class Crossing:
    t: mpf
    itinerary: Itinerary
    hair_depth: int
    level: int
    z: HPComplex
    angle: mpf  # in [0, pi)
    refined: bool

    def to_json(self) -> dict:
        p = self.z.precision_bits
        return {"t": dec_str(self.t, max(p, 64)), "itinerary": str(self.itinerary),
                "hair_depth": self.hair_depth, "level": self.level,
                "z": self.z.with_precision(min(p, 1024)).to_json(),
                "angle": dec_str(self.angle, 64), "refined": self.refined}


@dataclass
class AngleSet:
    n: int
    crossings: list[Crossing] = field(default_factory=list)
    tangential: list[Crossing] = field(default_factory=list)
    direct_resolved: bool = True
    propagated: int = 0

    @property
    def angles(self) -> list[mpf]:
        return [x.angle for x in self.crossings]

    @property
    def witnesses(self) -> list[tuple[mpf, str]]:
        return [(x.t, str(x.itinerary)) for x in self.crossings]

    def to_json(self) -> dict:
        return {"n": self.n, "angles": [dec_str(a, 64) for a in self.angles],
                "witnesses": [x.to_json() for x in self.crossings],
                "tangential": [x.to_json() for x in self.tangential],
                "direct_resolved": self.direct_resolved, "propagated": self.propagated}


def _angle_between(curve_dir: HPComplex, hair_dir: HPComplex) -> mpf:
    with mp.workprec(64):
        q = mpmath.mpc(curve_dir.re, curve_dir.im) / mpmath.mpc(hair_dir.re, hair_dir.im)
        return _fold(mpmath.atan2(q.imag, q.real))


def _bits(x: mpf) -> int:
    return max(0, int(mpmath.mag(x))) if x else 0


def solve_crossing(m: ExpMap, g: Geometry, level: int, t0: mpf, a: Itinerary, depth: int,
                   lo: Optional[mpf] = None, hi: Optional[mpf] = None) -> tuple[mpf, HPComplex, mpf]:
    """Newton for the parameter where f^level(g(t)) meets the hair T_a near ``t0``.

    The hair is traced afresh at the anchor Re f^level(g(t)) in every step, so
    no polyline interpolation enters the crossing angle.  Working precision
    grows with |d/dt f^level(g)| to resolve t.  Returns (t, z, angle).
    """
    base = m.precision_bits
    comp = compose(m, g, level)
    z, d = comp.at(t0, base)
    prec = base + _bits(d.abs()) + _bits(z.abs()) + 64
    if prec > CROSSING_MAX_BITS:
        raise ExponentBudgetExceeded(f"crossing needs {prec} bits of working precision", level)
    mh = with_precision(m, prec)
    comp = compose(mh, g, level)
    t = to_mpf(t0, prec)
    with mp.workprec(prec):
        stop = mpf(2) ** (32 - prec)
    for _ in range(CROSSING_NEWTON_ITER):
        z, d = comp.at(t, prec)
        hp = _trace_point(mh, a, depth, z.re, None)
        tan = hp.tangent
        with mp.workprec(prec):
            F = z.im - hp.z.im
            slope = tan.im / tan.re
            dF = d.im - slope * d.re
            if dF == 0:
                raise NonConvergence(0, "degenerate crossing derivative")
            step = F / dF
            t = t - step
            if lo is not None and (t < lo or t > hi):
                raise NonConvergence(0, "crossing left the bracketing interval")
            if abs(step) <= stop * max(mpf(1), abs(t)):
                break
    else:
        raise NonConvergence(CROSSING_NEWTON_ITER, "crossing Newton did not settle")
    z, d = comp.at(t, prec)
    hp = _trace_point(mh, a, depth, z.re, None)
    return t, z, _angle_between(d, hp.tangent)


def _resolvable(m: ExpMap, c: SampledCurve, n: int) -> bool:
    """True when f^n of the samples is small enough to resolve strips at working precision.

    Checked on the unrefined samples first: an unresolvable image can need
    millions of samples just to follow its winding.
    """
    p = c.precision_bits
    big = mpf(0)
    for z in c.zs():
        try:
            for _ in range(n):
                z = apply(m, z)
        except ExponentBudgetExceeded:
            return False
        with mp.workprec(64):
            big = max(big, abs(z.re), abs(z.im))
    with mp.workprec(64):
        return big * mpf(2) ** (-p) < mp.pi / 1024


def _direct_crossings(m: ExpMap, c: SampledCurve, img: SampledCurve, n: int,
                      hair_family: Sequence[HairSample]) -> list[Crossing]:
    zs = img.zs()
    ts = img.ts()
    geom = c.resolved_geometry()
    out: list[Crossing] = []
    for hair in hair_family:
        hz = hair.zs()
        if len(hz) < 2:
            continue
        for i, j in _candidate_pairs(zs, hz, False, False):
            hit = segments_cross(zs[i], zs[i + 1], hz[j], hz[j + 1])
            if hit is None:
                continue
            s, _ = hit
            with mp.workprec(img.precision_bits + 16):
                t0 = ts[i] + s * (ts[i + 1] - ts[i])
            try:
                t, z, ang = solve_crossing(m, geom, n, t0, hair.itinerary, hair.itinerary_depth,
                                           ts[i], ts[i + 1])
                refined = True
            except (NonConvergence, OutsideRange):
                ph, pt = hair.points[j], hair.points[j + 1]
                cd = img.samples[i].deriv or (zs[i + 1] - zs[i])
                t, z, ang = t0, zs[i], _angle_between(cd, ph.tangent + pt.tangent)
                refined = False
            out.append(Crossing(t, hair.itinerary, hair.itinerary_depth, n, z, ang, refined))
    return out


def propagate_crossing(m: ExpMap, c: SampledCurve, x: Crossing) -> Crossing:
    """The level+1 crossing of f^(level+1) o c with T_{shift(a)} continuing ``x``."""
    b = x.itinerary.shift(1)
    t, z, ang = solve_crossing(m, c.resolved_geometry(), x.level + 1, x.t, b, x.hair_depth)
    return Crossing(t, b, x.hair_depth, x.level + 1, z, ang, True)


def _dedupe(xs: list[Crossing]) -> list[Crossing]:
    out: list[Crossing] = []
    for x in sorted(xs, key=lambda x: (str(x.itinerary), x.t)):
        if out and str(out[-1].itinerary) == str(x.itinerary):
            with mp.workprec(64):
                close = abs(out[-1].t - x.t) < mpf(2) ** -40
            if close:
                continue
        out.append(x)
    return sorted(out, key=lambda x: x.t)


def angle_set(m: ExpMap, c: SampledCurve, n: int, hair_family: Sequence[HairSample],
              tol: Optional[Real] = None, previous: Optional[AngleSet] = None,
              cap: int = DEFAULT_SAMPLE_CAP) -> AngleSet:
    """Angles in [0, pi) at which f^n o c crosses the hairs.

    Crossings come from two routes: polyline intersections of the sampled
    image with ``hair_family`` (skipped when the image coordinates are too
    large to resolve strips at the working precision) and, when ``previous``
    is the level n-1 set, continuation of each earlier crossing.
    """
    found: list[Crossing] = []
    resolved = True
    if _resolvable(m, c, n):
        img = iterate_curve(m, c, n, tol, cap)
        found.extend(_direct_crossings(m, c, img, n, hair_family))
    else:
        resolved = False
    propagated = 0
    if previous is not None:
        if previous.n != n - 1:
            raise ValueError("previous angle set must be at level n-1")
        for x in previous.crossings:
            try:
                found.append(propagate_crossing(m, c, x))
                propagated += 1
            except (NonConvergence, OutsideRange, ExponentBudgetExceeded):
                continue
    result = AngleSet(n, direct_resolved=resolved, propagated=propagated)
    for x in _dedupe(found):
        if x.angle < TRANSVERSALITY_FLOOR or x.angle > math.pi - TRANSVERSALITY_FLOOR:
            result.tangential.append(x)
        else:
            result.crossings.append(x)
    return result


def angle_distance(a: Real, b: Real) -> float:
    """Distance between two angles modulo pi."""
    d = abs(float(a) - float(b)) % math.pi
    return min(d, math.pi - d)


def inclusion_report(lower: AngleSet, upper: AngleSet, tol: float = ANGLE_MATCH_TOL) -> list[tuple[float, Optional[float]]]:
    """For each angle of ``lower``, the closest angle of ``upper`` (None when none lies within tol)."""
    ups = [float(a) for a in upper.angles]
    out = []
    for a in lower.angles:
        best = min(ups, key=lambda u: angle_distance(a, u)) if ups else None
        out.append((float(a), best if best is not None and angle_distance(a, best) <= tol else None))
    return out
