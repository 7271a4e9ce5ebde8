"""Inverse branches, hair tracing, boundary curves and periodic points.

Hair points are parametrised by their real part (the *anchor*).  A point of
T_a with Re z = R is found by seeding deep along the itinerary and pulling
back with the inverse branches; levels whose real part no longer fits the
exponent budget are carried as tower magnitudes, where the imaginary offset
falls below every representable bit.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import mpmath
from mpmath import mp, mpf

from .arith import (
    DEFAULT_PRECISION,
    ExponentBudgetExceeded,
    HPComplex,
    Real,
    TowerMagnitude,
    dec_str,
    exp_fits,
    strictly_greater,
    to_mpf,
    tower_add_real,
    tower_exp,
    tower_from_real,
    tower_log,
    tower_sum,
    tower_to_real,
)
from .dynmap import DynamicsError, ExpMap, apply

SEED_UNCERTAINTY_FACTOR = 2  # times pi; distance from seed to the true level-n point
NEWTON_MAX_ITER = 40


class OutsideRange(DynamicsError):
    pass


class NonConvergence(DynamicsError):
    def __init__(self, iterations: int, message: str = ""):
        super().__init__(message or f"no convergence after {iterations} iterations")
        self.iterations = iterations


# ---------------------------------------------------------------------------
# itineraries


_ITIN = re.compile(r"^([01]*)(?:\(([01]+)\)|([01]*)\*)?$")


@dataclass(frozen=True)
class Itinerary:
    """A word over {0, 1}: finite prefix followed by an optional repeating cycle."""

    prefix: str = ""
    cycle: Optional[str] = None

    def __post_init__(self):
        if set(self.prefix) - {"0", "1"}:
            raise ValueError(f"bad symbols in prefix {self.prefix!r}")
        if self.cycle is not None and (not self.cycle or set(self.cycle) - {"0", "1"}):
            raise ValueError(f"bad cycle {self.cycle!r}")

    @classmethod
    def parse(cls, text: str) -> "Itinerary":
        """``"01(10)"`` is 01 then 10 forever; ``"0110*"`` is 0110 forever."""
        mt = _ITIN.match(text.strip())
        if not mt:
            raise ValueError(f"cannot parse itinerary {text!r}")
        head, paren, star = mt.group(1), mt.group(2), mt.group(3)
        if paren:
            return cls(head, paren)
        if star is not None and text.strip().endswith("*"):
            word = head + star
            if not word:
                raise ValueError("empty periodic word")
            return cls("", word)
        return cls(head, None)

    @classmethod
    def periodic(cls, word: str) -> "Itinerary":
        return cls("", word)

    def symbol(self, n: int) -> int:
        if n < len(self.prefix):
            return int(self.prefix[n])
        if self.cycle is None:
            raise IndexError(f"finite itinerary of length {len(self.prefix)} has no symbol {n}")
        return int(self.cycle[(n - len(self.prefix)) % len(self.cycle)])

    def word(self, n: int) -> str:
        return "".join(str(self.symbol(j)) for j in range(n))

    def shift(self, k: int = 1) -> "Itinerary":
        if k <= len(self.prefix):
            return Itinerary(self.prefix[k:], self.cycle)
        if self.cycle is None:
            return Itinerary("", None)
        r = (k - len(self.prefix)) % len(self.cycle)
        return Itinerary("", self.cycle[r:] + self.cycle[:r])

    def __str__(self):
        if self.cycle is None:
            return self.prefix
        return f"{self.prefix}({self.cycle})"


# ---------------------------------------------------------------------------
# bounds too small for mpf


@dataclass(frozen=True)
class ErrorBound:
    """A positive bound stored as exp(-neg_log)."""

    neg_log: TowerMagnitude
    max_exponent_bits: int

    @classmethod
    def from_value(cls, x: Real, prec: int, max_exponent_bits: int) -> "ErrorBound":
        with mp.workprec(prec + 16):
            return cls(tower_from_real(-mpmath.log(to_mpf(x, prec + 16)), prec), max_exponent_bits)

    def value(self) -> mpf:
        """The bound as an mpf; 0 when it underflows the exponent budget."""
        try:
            nl = tower_to_real(self.neg_log, self.max_exponent_bits)
        except ExponentBudgetExceeded:
            return mpf(0)
        if not exp_fits(-nl, self.max_exponent_bits) or not exp_fits(nl, self.max_exponent_bits):
            return mpf(0)
        with mp.workprec(self.neg_log.precision_bits):
            return mpmath.exp(-nl)

    def scaled(self, factor: Real) -> "ErrorBound":
        p = self.neg_log.precision_bits
        with mp.workprec(p + 16):
            shift = -mpmath.log(to_mpf(factor, p + 16))
        return ErrorBound(tower_add_real(self.neg_log, shift, self.max_exponent_bits), self.max_exponent_bits)

    def __lt__(self, other: "ErrorBound") -> bool:
        return strictly_greater(self.neg_log, other.neg_log)

    def __le__(self, other: "ErrorBound") -> bool:
        return not strictly_greater(other.neg_log, self.neg_log)

    def exceeds(self, distance: Real) -> bool:
        """True when ``distance`` is strictly below this bound."""
        d = to_mpf(distance, self.neg_log.precision_bits)
        if d == 0:
            return True
        with mp.workprec(self.neg_log.precision_bits + 16):
            return strictly_greater(tower_from_real(-mpmath.log(d), self.neg_log.precision_bits),
                                    self.neg_log)

    def to_json(self) -> dict:
        v = self.value()
        return {"value": dec_str(v, self.neg_log.precision_bits), "neg_log": self.neg_log.to_json()}


# ---------------------------------------------------------------------------
# inverse branches


def _lift(m: ExpMap, w: HPComplex, center: mpf) -> HPComplex:
    q = w / m.lam
    if q.is_zero():
        raise OutsideRange("inverse branch at 0")
    z = q.log()
    p = z.precision_bits
    guard = 32 + (max(0, int(mpmath.mag(center))) if center else 0)
    with mp.workprec(p + guard):
        tau = 2 * mp.pi
        k = mpmath.nint((center - z.im) / tau)
        im = z.im + k * tau
    return HPComplex(z.re, to_mpf(im, p), p, z.max_exponent_bits)


def hat_branch(m: ExpMap, w: HPComplex, s: int) -> HPComplex:
    """Branch of f^{-1} whose image band is centred on hat strip s (no range check)."""
    return _lift(m, w, m.strip(s).center)


def inverse_branch(m: ExpMap, w: HPComplex, s: int) -> HPComplex:
    """The unique z in S_s with f(z) = w."""
    tol = m.tolerance
    with mp.workprec(m.precision_bits + 16):
        radius = m.abs_lam * mpmath.exp(m.K)
        if w.re < -tol * max(1, w.abs()) or w.abs() < radius * (1 - tol):
            raise OutsideRange(
                f"w=({mpmath.nstr(w.re, 8)}, {mpmath.nstr(w.im, 8)}) outside the range of S_{s}")
    return hat_branch(m, w, s)


# ---------------------------------------------------------------------------
# tracing


@dataclass(frozen=True)
class HairPoint:
    anchor: mpf
    z: HPComplex
    error_bound: ErrorBound
    worst_case_bound: ErrorBound
    tangent: HPComplex
    orbit: tuple = ()  # pull-back chain z, f(z), ... while it fits the exponent budget

    def to_json(self) -> dict:
        p = self.z.precision_bits
        return {"anchor": dec_str(self.anchor, p), "z": self.z.to_json(),
                "err": dec_str(self.error_bound.value(), p),
                "err_neg_log": self.error_bound.neg_log.to_json(),
                "err_worst_case": dec_str(self.worst_case_bound.value(), p),
                "tangent": self.tangent.to_json()}


@dataclass
class HairSample:
    itinerary: Itinerary
    itinerary_depth: int
    points: list[HairPoint] = field(default_factory=list)
    side: str = "OnHair"  # or "UpperBoundary(k)" / "LowerBoundary(k)"

    def zs(self) -> list[HPComplex]:
        return [p.z for p in self.points]

    def to_json(self) -> list[dict]:
        return [p.to_json() for p in self.points]


def _tower_prec(p: int) -> int:
    # towers only feed error bounds; full working precision buys nothing there
    return min(p, DEFAULT_PRECISION)


@dataclass
class _Chain:
    hp_levels: list[mpf]            # forward real model X_0..X_h
    towers: list[TowerMagnitude]    # X_{h+1}..X_depth


def _forward_model(m: ExpMap, R: mpf, depth: int) -> _Chain:
    p = m.precision_bits
    xs = [R]
    towers: list[TowerMagnitude] = []
    log_lam = m.log_abs_lam
    for _ in range(depth):
        if towers:
            towers.append(tower_exp(tower_add_real(towers[-1], log_lam, m.max_exponent_bits)))
            continue
        with mp.workprec(64):
            fits = (xs[-1] + log_lam) * 1.4426950408889634 <= m.max_exponent_bits
        if fits:
            with mp.workprec(p + 16):
                xs.append(to_mpf(m.abs_lam * mpmath.exp(xs[-1]), p))
        else:
            towers.append(tower_exp(tower_add_real(tower_from_real(xs[-1], _tower_prec(p)), log_lam, m.max_exponent_bits)))
    return _Chain(xs, towers)


def _pull_back(m: ExpMap, seed: HPComplex, symbols: Sequence[int]) -> list[HPComplex]:
    """[z_0, ..., z_h] with z_h = seed and z_j = L_{a_j}(z_{j+1})."""
    out = [seed]
    for s in reversed(symbols):
        out.append(inverse_branch(m, out[-1], s))
    out.reverse()
    return out


def _trace_point(m: ExpMap, a: Itinerary, depth: int, R: mpf, boundary: Optional[str]) -> HairPoint:
    p = m.precision_bits
    if depth < 0:
        raise ValueError("depth must be >= 0")
    tol = m.tolerance
    if R < m.K - tol:
        raise OutsideRange(f"anchor {mpmath.nstr(R, 8)} below K")
    chain = _forward_model(m, R, depth)
    h = len(chain.hp_levels) - 1
    top = a.symbol(h)
    if boundary is not None and depth <= h:
        st = m.strip(top)
        seed_im = st.im_high if boundary == "+" else st.im_low
    else:
        seed_im = m.strip(top).center
    symbols = [a.symbol(j) for j in range(h)]

    X = chain.hp_levels[h]
    with mp.workprec(p + 16):
        stop = mpf(2) ** (16 - p) * max(mpf(1), abs(R))
    for _ in range(NEWTON_MAX_ITER):
        seed = m.hp(X, seed_im)
        zs = _pull_back(m, seed, symbols)
        with mp.workprec(p + 32):
            D = mpmath.mpc(1)
            for w in zs[1:]:
                D /= w.mpc
            err = R - zs[0].re
            if abs(err) <= stop or D.real == 0:
                break
            X = to_mpf(X + err / D.real, p + 32)
    # error bound: seed uncertainty times the backward contraction to depth
    with mp.workprec(p + 32):
        logs = [tower_from_real(mpmath.log(w.abs()), _tower_prec(p)) for w in zs[1:]]
        logs += [tower_log(t) for t in chain.towers]
        total = tower_sum(logs, m.max_exponent_bits)
        seed_unc = SEED_UNCERTAINTY_FACTOR * mp.pi
        tangent = D / abs(D) if D != 0 else mpmath.mpc(1)
    eb = ErrorBound(total, m.max_exponent_bits).scaled(seed_unc)
    with mp.workprec(p + 32):
        worst = ErrorBound(tower_from_real(depth * mpmath.log(2000), _tower_prec(p)), m.max_exponent_bits).scaled(seed_unc)
    return HairPoint(to_mpf(R, p), zs[0], eb, worst,
                     HPComplex.make(tangent.real, tangent.imag, p, m.max_exponent_bits), tuple(zs))


def trace_hair(m: ExpMap, a: Itinerary, depth: int, anchors: Iterable[Real]) -> HairSample:
    """Points of T_a with the given real parts, pulled back from depth ``depth``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rs = sorted(to_mpf(r, m.precision_bits) for r in anchors)
    return HairSample(a, depth, [_trace_point(m, a, depth, r, None) for r in rs])


def trace_boundary(m: ExpMap, a: Itinerary, k: int, side: str, anchors: Iterable[Real]) -> HairSample:
    """Samples of W^{+/-}_{k,a}: f^k lands on the upper/lower edge of S_{a_k}."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    rs = sorted(to_mpf(r, m.precision_bits) for r in anchors)
    label = f"UpperBoundary({k})" if side == "+" else f"LowerBoundary({k})"
    return HairSample(a, k, [_trace_point(m, a, k, r, side) for r in rs], side=label)


def hausdorff(a: Sequence[HPComplex], b: Sequence[HPComplex]) -> mpf:
    p = max(z.precision_bits for z in list(a) + list(b))
    with mp.workprec(p):
        def one_way(xs, ys):
            return max(min((x - y).abs() for y in ys) for x in xs)
        return max(one_way(a, b), one_way(b, a))


# ---------------------------------------------------------------------------
# periodic points


@dataclass
class PeriodicPoint:
    z: HPComplex
    period: int
    multiplier_abs: mpf
    itinerary: Itinerary
    residual: mpf
    iterations: int

    def to_json(self) -> dict:
        p = self.z.precision_bits
        return {"z": self.z.to_json(), "period": self.period,
                "multiplier_abs": dec_str(self.multiplier_abs, p),
                "itinerary": str(self.itinerary), "residual": dec_str(self.residual, p),
                "iterations": self.iterations}


def _cycle_orbit(m: ExpMap, z: HPComplex, p: int) -> list[HPComplex]:
    out = [z]
    for _ in range(p):
        out.append(apply(m, out[-1]))
    return out


def periodic_point(m: ExpMap, cycle: str, seed: Optional[HPComplex] = None,
                   tol: Optional[Real] = None, polish: bool = True) -> PeriodicPoint:
    """Repelling periodic point with the given pure-cycle itinerary.

    The composed inverse branch L_{c0} o ... o L_{c(p-1)} is iterated until
    successive iterates agree to ``tol``; a few Newton steps on
    f^p(z) - z then take the point to full working precision.
    """
    if not cycle or set(cycle) - {"0", "1"}:
        raise ValueError(f"bad cycle {cycle!r}")
    prec = m.precision_bits
    syms = [int(c) for c in cycle]
    per = len(syms)
    with mp.workprec(prec):
        tol_v = to_mpf(tol, prec) if tol is not None else mpf(2) ** (-(prec // 2))
    # default seed sits off the real axis so the principal log never meets 0
    z = seed if seed is not None else m.hp(1, m.strip(syms[0]).center + 1)
    limit = 10 * prec
    it = 0
    try:
        while True:
            it += 1
            if it > limit:
                raise NonConvergence(limit)
            w = z
            for s in reversed(syms):
                w = hat_branch(m, w, s)
            step = (w - z).abs()
            z = w
            if step < tol_v:
                break
    except (OutsideRange, ValueError) as exc:
        raise NonConvergence(it, f"branch domain failure: {exc}") from exc
    if polish:
        for _ in range(4):
            orb = _cycle_orbit(m, z, per)
            with mp.workprec(prec + 32):
                deriv = mpmath.mpc(1)
                for v in orb[1:]:
                    deriv *= v.mpc
                F = orb[-1].mpc - z.mpc
                if F == 0:
                    break
                dz = F / (deriv - 1)
                nz = z.mpc - dz
            z = m.hp(nz.real, nz.imag)
    orb = _cycle_orbit(m, z, per)
    with mp.workprec(prec + 16):
        mult = mpmath.fprod(v.abs() for v in orb[1:])
        residual = (orb[-1] - z).abs()
    if residual >= 10 * tol_v:
        raise NonConvergence(it, f"residual {mpmath.nstr(residual, 5)} above tolerance")
    if not mult > 1:
        raise NonConvergence(it, "cycle is not repelling")
    return PeriodicPoint(z, per, mult, Itinerary.periodic(cycle), residual, it)
