"""The map f(z) = lam * e**z, its strip system, itineraries and orbit tests."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import mpmath
from mpmath import mp, mpf

from .arith import (
    DEFAULT_EXPONENT_BUDGET,
    DEFAULT_PRECISION,
    ExponentBudgetExceeded,
    HPComplex,
    Real,
    TowerMagnitude,
    dec_str,
    g_tower,
    hp_exp,
    strictly_greater,
    to_mpf,
    tower_add_real,
    tower_exp,
    tower_from_real,
)

AUTO_K_MARGIN = mpf("0.5")
AUTO_K_FLOOR = mpf("10.5")


class DynamicsError(Exception):
    pass


class InvalidLambda(DynamicsError):
    pass


class InvalidK(DynamicsError):
    pass


class OrbitLeftS(DynamicsError):
    def __init__(self, step: int):
        super().__init__(f"orbit left S at step {step}")
        self.step = step


class Membership(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class Strip:
    """Open horizontal band im_low < Im z < im_high of height pi."""

    im_low: mpf
    im_high: mpf
    center: mpf

    def to_json(self, prec: int) -> dict:
        return {"im_low": dec_str(self.im_low, prec), "im_high": dec_str(self.im_high, prec)}


@dataclass(frozen=True)
class StripSystem:
    hat_strips: tuple[Strip, ...]
    chosen: tuple[Strip, Strip]

    def to_json(self, prec: int) -> dict:
        return {
            "hat_strips": [s.to_json(prec) for s in self.hat_strips],
            "chosen": [s.to_json(prec) for s in self.chosen],
        }


@dataclass(frozen=True)
class ExpMap:
    lam: HPComplex
    K: mpf
    strips: StripSystem

    @property
    def precision_bits(self) -> int:
        return self.lam.precision_bits

    @property
    def max_exponent_bits(self) -> int:
        return self.lam.max_exponent_bits

    @property
    def abs_lam(self) -> mpf:
        return self.lam.abs()

    @property
    def arg_lam(self) -> mpf:
        return self.lam.arg()

    @property
    def log_abs_lam(self) -> mpf:
        with mp.workprec(self.precision_bits + 16):
            return mpmath.log(self.abs_lam)

    @property
    def tolerance(self) -> mpf:
        """Boundary band width 2**(-prec/2) used for closed-set membership."""
        with mp.workprec(self.precision_bits):
            return mpf(2) ** (-(self.precision_bits // 2))

    def hp(self, re: Real = 0, im: Real = 0) -> HPComplex:
        return HPComplex.make(re, im, self.precision_bits, self.max_exponent_bits)

    def strip(self, s: int) -> Strip:
        return self.strips.chosen[s]

    def __call__(self, z: HPComplex) -> HPComplex:
        return apply(self, z)

    def to_json(self) -> dict:
        p = self.precision_bits
        return {"lambda": self.lam.to_json(), "K": dec_str(self.K, p), "strips": self.strips.to_json(p)}


def _auto_K(abs_lam: mpf, prec: int) -> mpf:
    with mp.workprec(prec):
        def h(k):
            return abs_lam * mpmath.exp(k) - 200 * k

        lo, hi = mpf(10), mpf(200)
        if h(hi) <= 0:
            raise InvalidLambda("|lambda| too small: |lambda| e^K <= 200 K on all of [10, 200]")
        if h(lo) > 0:
            root = lo
        else:
            for _ in range(prec):
                mid = (lo + hi) / 2
                if h(mid) > 0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < mpf(2) ** (-prec // 2):
                    break
            root = hi
        return max(AUTO_K_FLOOR, root + AUTO_K_MARGIN)


def k_is_valid(abs_lam: mpf, K: mpf, prec: int) -> bool:
    with mp.workprec(prec):
        return K > 10 and abs_lam * mpmath.exp(K) > 200 * K


def make_map(lam: Union[HPComplex, complex, str], K: Optional[Real] = None,
             prec: int = DEFAULT_PRECISION,
             max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> ExpMap:
    """Build f(z) = lam e^z.  ``K=None`` selects the automatic cutoff."""
    if isinstance(lam, str):
        lam = HPComplex.parse(lam, prec, max_exponent_bits=max_exponent_bits)
    elif not isinstance(lam, HPComplex):
        lam = HPComplex.from_complex(lam, prec, max_exponent_bits)
    if lam.is_zero():
        raise InvalidLambda("lambda must be nonzero")
    prec = lam.precision_bits
    abs_lam = lam.abs()
    if K is None:
        Kv = _auto_K(abs_lam, prec)
    else:
        Kv = to_mpf(K, prec)
        if not k_is_valid(abs_lam, Kv, prec):
            raise InvalidK(f"K={mpmath.nstr(Kv, 10)} violates K > 10 and |lam| e^K > 200 K")
    m = ExpMap(lam, to_mpf(Kv, prec), StripSystem((), (Strip(mpf(0), mpf(0), mpf(0)),) * 2))
    return ExpMap(lam, m.K, compute_strips(m))


def compute_strips(m: ExpMap) -> StripSystem:
    """Bands mapped into the closed right half-plane, within |Im z| <= 5 pi / 2."""
    p = m.precision_bits
    with mp.workprec(p + 32):
        tau = 2 * mp.pi
        half = mp.pi / 2
        c0 = -m.arg_lam
        slack = mpf(2) ** (-(p // 2))
        hats = []
        for k in range(-3, 4):
            c = c0 + k * tau
            if abs(c) <= 2 * mp.pi + slack:
                hats.append(Strip(to_mpf(c - half, p), to_mpf(c + half, p), to_mpf(c, p)))
        hats.sort(key=lambda s: s.im_low)
        ranked = sorted(hats, key=lambda s: (abs(s.center), -s.center))
    return StripSystem(tuple(hats), (ranked[0], ranked[1]))


def membership(m: ExpMap, z: HPComplex, s: int) -> Membership:
    """Closed-strip test for S_s = {Re z >= K} within the chosen hat strip s."""
    st = m.strip(s)
    tol = m.tolerance
    with mp.workprec(m.precision_bits):
        if z.re < m.K - tol or z.im < st.im_low - tol or z.im > st.im_high + tol:
            return Membership.OUTSIDE
        if z.re < m.K + tol or z.im < st.im_low + tol or z.im > st.im_high - tol:
            return Membership.AMBIGUOUS
    return Membership.INSIDE


def which_strip(m: ExpMap, z: HPComplex) -> tuple[Optional[int], bool]:
    """(s, ambiguous) for the chosen strip containing z, or (None, False)."""
    for s in (0, 1):
        res = membership(m, z, s)
        if res is not Membership.OUTSIDE:
            return s, res is Membership.AMBIGUOUS
    return None, False


def apply(m: ExpMap, z: HPComplex) -> HPComplex:
    """lam e^z.  The derivative Df(z) equals the returned value."""
    return m.lam * hp_exp(z)


def apply_with_derivative(m: ExpMap, z: HPComplex) -> tuple[HPComplex, HPComplex]:
    w = apply(m, z)
    return w, w


# ---------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class FarPoint:
    """A point too large to hold as HPComplex.

    ``arg`` is the exact argument when it is known (real orbits), else None;
    once None it stays None along the orbit.
    """

    magnitude: TowerMagnitude
    arg: Optional[int] = None  # 0 for positive reals, 1 for negative reals

    @property
    def angle_unknown(self) -> bool:
        return self.arg is None

    def to_json(self) -> dict:
        return {"magnitude": self.magnitude.to_json(), "arg": None if self.arg is None else ("0" if self.arg == 0 else "pi")}


Point = Union[HPComplex, FarPoint]


@dataclass(frozen=True)
class OrbitStatus:
    kind: str  # "InSPrefix" | "LeftS" | "ExponentBudgetStop" | "Complete"
    step: int

    def to_json(self) -> dict:
        return {"kind": self.kind, "step": self.step}


@dataclass
class OrbitRecord:
    samples: list[tuple[int, Point]] = field(default_factory=list)
    status: OrbitStatus = OrbitStatus("Complete", 0)
    ambiguous_steps: list[int] = field(default_factory=list)

    def points(self) -> list[Point]:
        return [z for _, z in self.samples]

    def to_json(self) -> dict:
        return {
            "samples": [{"n": n, "z": z.to_json()} for n, z in self.samples],
            "status": self.status.to_json(),
            "ambiguous_steps": self.ambiguous_steps,
        }


def _lam_real_sign(m: ExpMap) -> Optional[int]:
    if m.lam.im != 0:
        return None
    return 0 if m.lam.re > 0 else 1


def step_point(m: ExpMap, z: Point) -> Point:
    """One application of f; falls back to FarPoint when the budget runs out.

    Raises ExponentBudgetExceeded when not even a magnitude can be carried
    forward without inventing an angle.
    """
    if isinstance(z, HPComplex):
        try:
            return apply(m, z)
        except ExponentBudgetExceeded:
            pass
        mag = tower_exp(tower_add_real(tower_from_real(z.re, m.precision_bits), m.log_abs_lam,
                                       m.max_exponent_bits))
        sign = _lam_real_sign(m)
        arg = sign if (z.im == 0 and sign is not None) else None
        return FarPoint(mag, arg)
    if z.arg is None:
        raise ExponentBudgetExceeded("angle unknown; orbit cannot continue")
    sign = _lam_real_sign(m)
    if z.arg == 1:
        # lam e^{-X} with X past the budget: below every representable magnitude
        return m.hp(0, 0)
    if sign is None:
        raise ExponentBudgetExceeded("complex lambda on far real point; angle lost")
    return FarPoint(tower_exp(tower_add_real(z.magnitude, m.log_abs_lam, m.max_exponent_bits)), sign)


def forward_orbit(m: ExpMap, z: HPComplex, steps: int, far: bool = True) -> OrbitRecord:
    rec = OrbitRecord(samples=[(0, z)])
    cur: Point = z
    for n in range(1, steps + 1):
        try:
            if not far and isinstance(cur, HPComplex):
                nxt = apply(m, cur)
            else:
                nxt = step_point(m, cur)
        except ExponentBudgetExceeded:
            rec.status = OrbitStatus("ExponentBudgetStop", n)
            return rec
        rec.samples.append((n, nxt))
        cur = nxt
    rec.status = OrbitStatus("Complete", steps)
    return rec


def _far_strip(m: ExpMap, z: FarPoint) -> Optional[int]:
    if z.arg != 0:
        return None
    for s in (0, 1):
        st = m.strip(s)
        if st.im_low < 0 < st.im_high:
            return s
    return None


def itinerary_of(m: ExpMap, z: HPComplex, depth: int) -> tuple[str, OrbitRecord]:
    """Longest prefix a_0..a_{k-1} (k <= depth) with f^n(z) in S_{a_n}."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rec = OrbitRecord(samples=[(0, z)])
    word = []
    cur: Point = z
    for n in range(depth):
        if isinstance(cur, HPComplex):
            s, amb = which_strip(m, cur)
            if amb:
                rec.ambiguous_steps.append(n)
        else:
            s = _far_strip(m, cur)
        if s is None:
            rec.status = OrbitStatus("LeftS", n)
            return "".join(word), rec
        word.append(str(s))
        if n == depth - 1:
            break
        try:
            cur = step_point(m, cur)
        except ExponentBudgetExceeded:
            rec.status = OrbitStatus("ExponentBudgetStop", n + 1)
            return "".join(word), rec
        rec.samples.append((n + 1, cur))
    rec.status = OrbitStatus("InSPrefix", len(word))
    return "".join(word), rec


# ---------------------------------------------------------------------------
# growth / argument estimates


@dataclass
class LemEltReport:
    n: int
    reached: int
    re_growth: bool
    arg_bound: bool
    deriv_arg_bound: bool
    values: dict
    status: str = "ok"

    @property
    def passed(self) -> bool:
        return self.re_growth and self.arg_bound and self.deriv_arg_bound

    def to_json(self) -> dict:
        return {"n": self.n, "reached": self.reached, "re_growth": self.re_growth,
                "arg_bound": self.arg_bound, "deriv_arg_bound": self.deriv_arg_bound,
                "passed": self.passed, "status": self.status, "values": self.values}


def verify_lemelt(m: ExpMap, z: HPComplex, n: int) -> LemEltReport:
    """Check Re growth by 100**n and the two argument bounds along an orbit in S."""
    if n < 0:
        raise ValueError("n must be >= 0")
    orbit = [z]
    status = "ok"
    for j in range(n + 1):
        s, _ = which_strip(m, orbit[j])
        if s is None:
            raise OrbitLeftS(j)
        if j == n:
            break
        try:
            orbit.append(apply(m, orbit[j]))
        except ExponentBudgetExceeded:
            status = "ExponentBudgetExceeded"
            break
    return _lemelt_report(m, orbit, n, status)


def _is_branch_preimage(m: ExpMap, z: HPComplex, w: HPComplex) -> bool:
    """lam e^z = w, tested through log(w / lam) so that large |w| costs no precision."""
    p = max(z.precision_bits, w.precision_bits)
    with mp.workprec(p + 32):
        q = w.mpc / m.lam.mpc
        if q == 0:
            return False
        tol = mpf(2) ** (16 - min(z.precision_bits, w.precision_bits)) * max(mpf(1), abs(z.re), abs(z.im))
        if abs(mpmath.log(abs(q)) - z.re) > tol:
            return False
        tau = 2 * mp.pi
        d = (mpmath.arg(q) - z.im) / tau
        return abs(d - mpmath.nint(d)) * tau <= tol


def verify_lemelt_along(m: ExpMap, orbit: list[HPComplex], n: int) -> LemEltReport:
    """The same three checks on a supplied orbit z_0, ..., z_n.

    Meant for pull-back chains (such as the ones hair tracing produces): each
    z_j must lie in S and be a preimage of z_(j+1).  Forward evaluation of a
    rounded starting point cannot stand in here once |Df^n| exceeds 2**prec.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if len(orbit) < n + 1:
        raise ValueError(f"orbit has {len(orbit)} points, need {n + 1}")
    orbit = list(orbit[:n + 1])
    for j, z in enumerate(orbit):
        if which_strip(m, z)[0] is None:
            raise OrbitLeftS(j)
        if j < n and not _is_branch_preimage(m, z, orbit[j + 1]):
            raise ValueError(f"orbit[{j + 1}] is not the image of orbit[{j}]")
    return _lemelt_report(m, orbit, n, "ok")


def _lemelt_report(m: ExpMap, orbit: list[HPComplex], n: int, status: str) -> LemEltReport:
    p = m.precision_bits
    z = orbit[0]
    reached = len(orbit) - 1
    if reached == 0:
        return LemEltReport(n, 0, True, True, True, {}, status)
    with mp.workprec(p + 16):
        re0 = z.re
        zn = orbit[reached]
        scale = mpf(100) ** reached
        args = [w.arg() for w in orbit[1:]]
        arg_df = mpmath.fsum(args)  # continuous lift: every term lies in (-pi/2, pi/2)
        abs_sum = mpmath.fsum(abs(a) for a in args)
        arg_limit = 10 / (scale * re0)
        sum_limit = mpf(10) / (re0 * 99)
        re_growth = zn.re > scale * re0
        arg_bound = abs(args[-1]) < arg_limit
        deriv = abs(arg_df) <= abs_sum and abs_sum < sum_limit and sum_limit < mpf(1) / 50
        values = {
            "re_fn": dec_str(zn.re, p),
            "re_bound": dec_str(scale * re0, p),
            "arg_fn": dec_str(args[-1], p),
            "arg_limit": dec_str(arg_limit, p),
            "arg_Dfn": dec_str(arg_df, p),
            "sum_abs_arg": dec_str(abs_sum, p),
            "sum_limit": dec_str(sum_limit, p),
        }
    return LemEltReport(n, reached, bool(re_growth), bool(arg_bound), bool(deriv), values, status)


# ---------------------------------------------------------------------------
# escape classification


@dataclass(frozen=True)
class Classification:
    label: str  # FastEscapingCandidate | EscapingCandidate | BoundedSoFar | Undecided
    offset: Optional[int] = None
    reached: int = 0

    def to_json(self) -> dict:
        return {"label": self.label, "offset": self.offset, "reached": self.reached,
                "note": "finite-budget candidate verdict, not a proof"}


MIN_TOWER_COMPARISONS = 3
ESCAPE_MAGNITUDE = 2000  # |f| exceeds this on all of Re z >= K


def _magnitude(p: Point, prec: int) -> TowerMagnitude:
    if isinstance(p, FarPoint):
        return p.magnitude
    return tower_from_real(p.abs(), prec)


def classify(m: ExpMap, z: HPComplex, budget: int) -> Classification:
    """Compare |f^(n+k)(z)| against the tower g^n(0) over a finite budget.

    The smallest offset k for which every reachable comparison (at least
    three of them, so that g^n(0) has left [0, 1]) holds strictly is
    reported.  Verdicts are candidates over the budget only.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    p = m.precision_bits
    rec = forward_orbit(m, z, budget)
    mags = [_magnitude(w, p) for w in rec.points()]
    reached = len(mags) - 1
    escape = tower_from_real(ESCAPE_MAGNITUDE, p)
    if rec.status.kind == "Complete" and all(not strictly_greater(t, escape) for t in mags):
        return Classification("BoundedSoFar", None, reached)
    towers = [g_tower(n, p) for n in range(len(mags))]
    for k in range(0, budget + 1):
        count = len(mags) - k
        if count < MIN_TOWER_COMPARISONS:
            break
        if all(strictly_greater(mags[n + k], towers[n]) for n in range(count)):
            return Classification("FastEscapingCandidate", k, reached)
    if strictly_greater(mags[-1], escape):
        return Classification("EscapingCandidate", None, reached)
    return Classification("Undecided", None, reached)


def with_precision(m: ExpMap, prec: int) -> ExpMap:
    """The same map (same lambda value and K) evaluated at ``prec`` bits."""
    lam = m.lam.with_precision(prec)
    return ExpMap(lam, to_mpf(m.K, prec), compute_strips(ExpMap(lam, to_mpf(m.K, prec), m.strips)))
