"""Jordan curves around a target built as f^2 of four circle arcs."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import mpmath
from mpmath import mp, mpf

from ..arith import HPComplex, Real, dec_str, to_mpf
from ..curves import (
    TRANSVERSALITY_FLOOR,
    Arc,
    SampledCurve,
    concat,
    iterate_curve,
    self_intersections,
    winding_number,
)
from ..dynmap import ExpMap, apply, with_precision
from .sector import ZeroTarget, sector_preimage

SECTOR_EPS = mpf("0.1")
MAX_HALVINGS = 8
ARC_SAMPLES = 17


class VerificationFailed(Exception):
    def __init__(self, field_name: str, detail: str = ""):
        super().__init__(f"verification failed on {field_name}: {detail}")
        self.field = field_name


@dataclass(frozen=True)
class ArcSpec:
    """Arc of the circle |w| = radius traversed from theta_start to theta_end,
    then shifted by translate * 2 pi i."""

    radius: mpf
    theta_start: mpf
    theta_end: mpf
    translate: int

    @property
    def theta_range(self) -> tuple[mpf, mpf]:
        return (min(self.theta_start, self.theta_end), max(self.theta_start, self.theta_end))

    def length(self) -> mpf:
        lo, hi = self.theta_range
        return self.radius * (hi - lo)

    def geometry(self, prec: int, budget: int) -> Arc:
        with mp.workprec(prec + 16):
            center = HPComplex.make(0, self.translate * 2 * mp.pi, prec, budget)
        return Arc(center, self.radius, self.theta_start, self.theta_end)

    def to_json(self, prec: int) -> dict:
        lo, hi = self.theta_range
        return {"radius": dec_str(self.radius, prec), "theta_range": [dec_str(lo, prec), dec_str(hi, prec)],
                "reversed": bool(self.theta_end < self.theta_start), "translate": self.translate}


@dataclass
class FourArcResult:
    target: HPComplex
    y: HPComplex
    arcs: list[ArcSpec]
    image: SampledCurve
    winding: int
    diameter: mpf
    corner_angles: list[mpf]
    delta: mpf
    attempts: int
    epsilon: mpf = field(default_factory=lambda: mpf(0))

    def to_json(self) -> dict:
        p = self.y.precision_bits
        return {"target": self.target.to_json(), "y": self.y.to_json(), "epsilon": dec_str(self.epsilon, 64),
                "arcs": [a.to_json(p) for a in self.arcs],
                "verified": {"winding": self.winding, "diameter": dec_str(self.diameter, 64),
                             "corner_angles": [dec_str(a, 64) for a in self.corner_angles]},
                "delta": dec_str(self.delta, 64), "attempts": self.attempts,
                "image": self.image.to_json()}


def _corner(r: mpf, s: mpf, tau: mpf) -> tuple[mpf, mpf]:
    """Point with |w| = r and |w - 2 pi i| = s in the right half-plane."""
    v = (r * r - s * s + tau * tau) / (2 * tau)
    return mpmath.sqrt(r * r - v * v), v


def junction_angles(pieces: list[SampledCurve]) -> list[mpf]:
    """Crossing angle in [0, pi/2] between consecutive pieces at their shared endpoint."""
    out = []
    for k, a in enumerate(pieces):
        b = pieces[(k + 1) % len(pieces)]
        da, db = a.samples[-1].deriv, b.samples[0].deriv
        with mp.workprec(64):
            q = mpmath.mpc(db.re, db.im) / mpmath.mpc(da.re, da.im)
            th = abs(mpmath.atan2(q.imag, q.real)) % mp.pi
            out.append(min(th, mp.pi - th))
    return out


def _build(m: ExpMap, y: HPComplex, delta: mpf, tol: mpf):
    P = y.precision_bits
    budget = m.max_exponent_bits
    with mp.workprec(P + 32):
        tau = 2 * mp.pi
        r0 = mpmath.hypot(y.re, y.im)
        s0 = mpmath.hypot(y.re, y.im - tau)
        rl, rh, sl, sh = r0 - delta, r0 + delta, s0 - delta, s0 + delta
        corners = {key: _corner(r, s, tau) for key, (r, s) in
                   {"ll": (rl, sl), "lh": (rl, sh), "hh": (rh, sh), "hl": (rh, sl)}.items()}
        pts = {key: HPComplex.make(x, v, P, budget) for key, (x, v) in corners.items()}

        def ang(key, translate):
            x, v = corners[key]
            return mpmath.atan2(v - translate * tau, x)

        # loop ll -> lh -> hh -> hl -> ll; C1, C2 on |w| = r, C3, C4 on |w - 2 pi i| = s
        arcs = [
            ArcSpec(to_mpf(rl, P), to_mpf(ang("ll", 0), P), to_mpf(ang("lh", 0), P), 0),
            ArcSpec(to_mpf(sh, P), to_mpf(ang("lh", 1), P), to_mpf(ang("hh", 1), P), 1),
            ArcSpec(to_mpf(rh, P), to_mpf(ang("hh", 0), P), to_mpf(ang("hl", 0), P), 0),
            ArcSpec(to_mpf(sl, P), to_mpf(ang("hl", 1), P), to_mpf(ang("ll", 1), P), 1),
        ]
    ends = [("ll", "lh"), ("lh", "hh"), ("hh", "hl"), ("hl", "ll")]
    images = []
    for spec, (a, b) in zip(arcs, ends):
        g = spec.geometry(P, budget)
        pre = SampledCurve.from_geometry(g, ARC_SAMPLES, P)
        s = pre.samples
        s[0] = replace(s[0], z=pts[a])
        s[-1] = replace(s[-1], z=pts[b])
        images.append(iterate_curve(m, pre, 2, tol))
    return arcs, images


def four_arc_jordan(m: ExpMap, z: HPComplex, eps: Real, sector_eps: Real = SECTOR_EPS,
                    max_halvings: int = MAX_HALVINGS) -> FourArcResult:
    """Jordan curve of diameter <= eps around z made of f^2-images of four circle arcs.

    Every verification field (winding, diameter, junction angles, simplicity)
    is checked; on failure the arcs are shrunk by half and rebuilt.
    """
    if z.is_zero():
        raise ZeroTarget("target must be nonzero")
    eps = to_mpf(eps, 64)
    if eps <= 0:
        raise ValueError("eps must be positive")
    y = sector_preimage(m, z, sector_eps)
    P = y.precision_bits
    mp_ = with_precision(m, P)
    zz = z.with_precision(P)
    w = apply(mp_, y)
    with mp.workprec(P + 32):
        tau = 2 * mp.pi
        q = y.mpc / (y.mpc - mpmath.mpc(0, tau))
        sin_theta = abs(mpmath.sin(mpmath.atan2(q.imag, q.real)))
        jac = zz.abs() * w.abs()
        # the image parallelogram has diagonal about 4 delta jac / sin_theta
        delta = eps * sin_theta / (8 * jac)
    tol = eps / 16
    last = None
    for attempt in range(max_halvings + 1):
        arcs, pieces = _build(mp_, y, delta, tol)
        image = concat(pieces, closed=True)
        try:
            wn = winding_number(image, zz)
        except Exception as exc:  # PointOnCurve
            wn = 0
            last = ("winding", str(exc))
        diam = image.diameter()
        angles = junction_angles(pieces)
        checks = [
            ("winding", abs(wn) == 1, f"winding {wn}"),
            ("diameter", diam <= eps, f"diameter {mpmath.nstr(diam, 6)} > {mpmath.nstr(eps, 6)}"),
            ("corner_angles", min(angles) >= TRANSVERSALITY_FLOOR, f"min angle {mpmath.nstr(min(angles), 6)}"),
            ("jordan", not self_intersections(image), "image self-intersects"),
        ]
        failed = [(name, why) for name, ok, why in checks if not ok]
        if not failed:
            return FourArcResult(z, y, arcs, image, wn, diam, angles, to_mpf(delta, 64), attempt + 1, eps)
        last = failed[0]
        with mp.workprec(P):
            delta = delta / 2
    raise VerificationFailed(last[0], last[1])
