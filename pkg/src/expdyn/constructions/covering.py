"""The vertical segment through Re = K+1 and shallow covering checks near periodic points."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from mpmath import mp, mpf

from ..arith import ExponentBudgetExceeded, HPComplex, Real, dec_str, to_mpf
from ..curves import (
    CurveBudgetExceeded,
    PointOnCurve,
    SampleCapExceeded,
    SampledCurve,
    circle,
    iterate_curve,
    segment,
    winding_number,
)
from ..dynmap import ExpMap
from ..hairs import PeriodicPoint

KAPPA_PROBES = 25


def kappa_segment(m: ExpMap, n: int = 65) -> SampledCurve:
    """Vertical segment from K+1 - 3 pi i to K+1 + 3 pi i."""
    p = m.precision_bits
    with mp.workprec(p + 16):
        x = m.K + 1
        h = 3 * mp.pi
        lo, hi = m.hp(x, -h), m.hp(x, h)
    return segment(lo, hi, n, p, m.max_exponent_bits)


def kappa_crosses_strips(m: ExpMap, seg: SampledCurve) -> dict[int, bool]:
    """Whether the segment's Im range contains each chosen strip's band."""
    lo = min(z.im for z in seg.zs())
    hi = max(z.im for z in seg.zs())
    return {s: bool(lo <= m.strip(s).im_low and m.strip(s).im_high <= hi) for s in (0, 1)}


@dataclass
class CoveringStep:
    N: int
    covered: Optional[bool]
    windings: list[Optional[int]] = field(default_factory=list)
    note: str = ""

    def to_json(self) -> dict:
        return {"N": self.N, "covered": self.covered, "windings": self.windings, "note": self.note}


@dataclass
class CoveringReport:
    radius: mpf
    steps: list[CoveringStep]
    caveat: str = ("shallow depth: a missing cover up to N_max says nothing about larger N; "
                   "coverage is recomputed at every N, never inferred")

    @property
    def first_covered(self) -> Optional[int]:
        return next((s.N for s in self.steps if s.covered), None)

    def to_json(self) -> dict:
        return {"radius": dec_str(self.radius, 64), "steps": [s.to_json() for s in self.steps],
                "first_covered": self.first_covered, "caveat": self.caveat}


def covering_check(m: ExpMap, p: PeriodicPoint, radius: Real, N_max: int,
                   samples: int = 129, cap: int = 2**16) -> CoveringReport:
    """For N = 1..N_max, does f^N of the disk B(p, radius) cover the kappa segment?

    The disk image contains every point around which the image of its
    boundary circle winds a nonzero number of times; the segment is probed at
    evenly spaced points.
    """
    r = to_mpf(radius, m.precision_bits)
    if r <= 0:
        raise ValueError("radius must be positive")
    if p.multiplier_abs <= 1:
        raise ValueError("periodic point is not repelling")
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    probes = kappa_segment(m, KAPPA_PROBES).zs()
    cur = circle(p.z, r, samples, m.precision_bits, m.max_exponent_bits)
    steps: list[CoveringStep] = []
    for N in range(1, N_max + 1):
        try:
            cur = iterate_curve(m, cur, 1, None, cap)
        except (CurveBudgetExceeded, ExponentBudgetExceeded) as exc:
            steps.append(CoveringStep(N, None, note=f"ExponentBudgetExceeded: {exc}"))
            break
        except SampleCapExceeded as exc:
            steps.append(CoveringStep(N, None, note=f"SampleCapExceeded: {exc}"))
            break
        windings: list[Optional[int]] = []
        for q in probes:
            try:
                windings.append(winding_number(cur, q))
            except PointOnCurve:
                windings.append(None)
        covered = all(w not in (None, 0) for w in windings)
        steps.append(CoveringStep(N, covered, windings))
    return CoveringReport(r, steps)
