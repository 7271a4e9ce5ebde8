"""Adaptive-precision complex numbers and level-index ("tower") magnitudes.

Real parts are carried as :class:`mpmath.mpf` values.  Every operation runs
inside an explicit ``mp.workprec`` block sized from the operands, so results
never depend on whatever the global mpmath precision happens to be.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import mpmath
from mpmath import mp, mpf

DEFAULT_PRECISION = 256
DEFAULT_EXPONENT_BUDGET = 2**20
PI_GUARD_BITS = 32
LOG2E = 1.0 / math.log(2.0)

Real = Union[int, float, str, mpf]


class ArithError(Exception):
    pass


class ExponentBudgetExceeded(ArithError):
    """Raised when a magnitude would not fit in ``max_exponent_bits``."""

    def __init__(self, message: str = "exponent budget exceeded", step: int | None = None):
        super().__init__(message)
        self.step = step


def to_mpf(x: Real, prec: int = DEFAULT_PRECISION) -> mpf:
    """Round ``x`` to ``prec`` bits.  Strings are parsed as decimals."""
    with mp.workprec(prec):
        return mpf(x) if not isinstance(x, mpf) else +x


def dec_str(x: mpf, prec: int) -> str:
    """Decimal string with enough digits to round-trip ``prec`` bits."""
    digits = int(math.ceil(prec * math.log10(2))) + 2
    with mp.workprec(prec + 8):
        return mpmath.nstr(x, digits, min_fixed=-1, max_fixed=-1, strip_zeros=True) if x != 0 else "0"


def two_pi(prec: int) -> mpf:
    with mp.workprec(prec + PI_GUARD_BITS):
        return 2 * mp.pi


def _as_pair(other) -> tuple[mpf, mpf, int, int]:
    if isinstance(other, HPComplex):
        return other.re, other.im, other.precision_bits, other.max_exponent_bits
    if isinstance(other, complex):
        return mpf(other.real), mpf(other.imag), 0, 0
    if isinstance(other, mpmath.mpc):
        return other.real, other.imag, 0, 0
    if isinstance(other, mpf):
        # mpf(x) would round to the ambient context precision
        return other, mpf(0), 0, 0
    if isinstance(other, int):
        with mp.workprec(max(53, other.bit_length())):
            return mpf(other), mpf(0), 0, 0
    return mpf(other), mpf(0), 0, 0


@dataclass(frozen=True)
class HPComplex:
    """Immutable complex number with an explicit working precision.

    ``max_exponent_bits`` bounds the binary exponent of any magnitude this
    value is allowed to produce through :func:`hp_exp`.
    """

    re: mpf
    im: mpf
    precision_bits: int = DEFAULT_PRECISION
    max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET

    def __post_init__(self):
        if self.precision_bits < 64:
            raise ValueError(f"precision_bits must be >= 64, got {self.precision_bits}")
        if self.max_exponent_bits < 1:
            raise ValueError("max_exponent_bits must be positive")
        if not (mpmath.isfinite(self.re) and mpmath.isfinite(self.im)):
            raise ValueError("HPComplex parts must be finite")

    @classmethod
    def make(cls, re: Real = 0, im: Real = 0, prec: int = DEFAULT_PRECISION,
             max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> "HPComplex":
        return cls(to_mpf(re, prec), to_mpf(im, prec), prec, max_exponent_bits)

    @classmethod
    def from_complex(cls, z, prec: int = DEFAULT_PRECISION,
                     max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> "HPComplex":
        if isinstance(z, HPComplex):
            return z.with_precision(prec)
        re, im, _, _ = _as_pair(z)
        return cls.make(re, im, prec, max_exponent_bits)

    @classmethod
    def parse(cls, text: str, prec: int = DEFAULT_PRECISION, **kw) -> "HPComplex":
        """Parse ``"re,im"`` (or a lone real) as decimal strings."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) == 1:
            parts.append("0")
        if len(parts) != 2 or not all(parts):
            raise ValueError(f"expected 're,im', got {text!r}")
        return cls.make(parts[0], parts[1], prec, **kw)

    # -- conversions -------------------------------------------------------

    def with_precision(self, prec: int) -> "HPComplex":
        return HPComplex(to_mpf(self.re, prec), to_mpf(self.im, prec), prec, self.max_exponent_bits)

    def like(self, re: Real, im: Real = 0) -> "HPComplex":
        """A value with this one's precision and budget."""
        return HPComplex.make(re, im, self.precision_bits, self.max_exponent_bits)

    @property
    def mpc(self) -> mpmath.mpc:
        with mp.workprec(self.precision_bits):
            return mpmath.mpc(self.re, self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def to_json(self) -> dict:
        p = self.precision_bits
        return {"re": dec_str(self.re, p), "im": dec_str(self.im, p), "prec": p}

    @classmethod
    def from_json(cls, d: dict, max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> "HPComplex":
        return cls.make(d["re"], d["im"], int(d.get("prec", DEFAULT_PRECISION)), max_exponent_bits)

    def __repr__(self) -> str:
        return f"HPComplex({mpmath.nstr(self.re, 20)}, {mpmath.nstr(self.im, 20)}, prec={self.precision_bits})"

    # -- arithmetic --------------------------------------------------------

    def _binary(self, other):
        re, im, p, b = _as_pair(other)
        return re, im, max(self.precision_bits, p), max(self.max_exponent_bits, b)

    def __add__(self, other):
        re, im, p, b = self._binary(other)
        with mp.workprec(p):
            return HPComplex(self.re + re, self.im + im, p, b)

    __radd__ = __add__

    def __sub__(self, other):
        re, im, p, b = self._binary(other)
        with mp.workprec(p):
            return HPComplex(self.re - re, self.im - im, p, b)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        with mp.workprec(self.precision_bits):
            return HPComplex(-self.re, -self.im, self.precision_bits, self.max_exponent_bits)

    def __mul__(self, other):
        re, im, p, b = self._binary(other)
        with mp.workprec(p):
            if im == 0:
                return HPComplex(self.re * re, self.im * re, p, b)
            return HPComplex(self.re * re - self.im * im, self.re * im + self.im * re, p, b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        re, im, p, b = self._binary(other)
        with mp.workprec(p):
            q = mpmath.mpc(self.re, self.im) / mpmath.mpc(re, im)
            return HPComplex(q.real, q.imag, p, b)

    def __rtruediv__(self, other):
        return HPComplex.from_complex(other, self.precision_bits, self.max_exponent_bits) / self

    def __eq__(self, other):
        if not isinstance(other, HPComplex):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def conj(self) -> "HPComplex":
        with mp.workprec(self.precision_bits):
            return HPComplex(self.re, -self.im, self.precision_bits, self.max_exponent_bits)

    def abs(self) -> mpf:
        with mp.workprec(self.precision_bits):
            return mpmath.hypot(self.re, self.im)

    def arg(self) -> mpf:
        """Principal argument in (-pi, pi]."""
        with mp.workprec(self.precision_bits):
            return mpmath.atan2(self.im, self.re)

    def log(self) -> "HPComplex":
        """Principal logarithm."""
        if self.re == 0 and self.im == 0:
            raise ValueError("log(0)")
        with mp.workprec(self.precision_bits + 16):
            re = mpmath.log(mpmath.hypot(self.re, self.im))
            im = mpmath.atan2(self.im, self.re)
        return HPComplex.make(re, im, self.precision_bits, self.max_exponent_bits)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0


def hp_exp(z: HPComplex) -> HPComplex:
    """e**z with the imaginary part reduced mod 2*pi at full working precision."""
    p = z.precision_bits
    with mp.workprec(64):
        too_big = z.re * LOG2E > z.max_exponent_bits
    if too_big:
        raise ExponentBudgetExceeded(
            f"exp of Re={mpmath.nstr(z.re, 8)} needs more than {z.max_exponent_bits} exponent bits")
    guard = PI_GUARD_BITS + (max(0, int(mpmath.mag(z.im))) if z.im else 0)
    with mp.workprec(p + guard):
        tau = 2 * mp.pi
        k = mpmath.nint(z.im / tau)
        r = z.im - k * tau
    with mp.workprec(p + 16):
        m = mpmath.exp(z.re)
        c, s = mpmath.cos(r), mpmath.sin(r)
        re, im = m * c, m * s
    return HPComplex(to_mpf(re, p), to_mpf(im, p), p, z.max_exponent_bits)


def exp_fits(re: mpf, max_exponent_bits: int) -> bool:
    with mp.workprec(64):
        return re * LOG2E <= max_exponent_bits


# ---------------------------------------------------------------------------
# Tower magnitudes


_E_BAND_TOL_BITS = 8


@dataclass(frozen=True)
class TowerMagnitude:
    """exp applied ``level`` times to ``mantissa``.

    For ``level >= 1`` the mantissa lies in [1, e); at level 0 it is any real
    strictly below e.  Ordering is lexicographic on (level, mantissa).
    """

    level: int
    mantissa: mpf
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")

    def key(self):
        return (self.level, self.mantissa)

    def __lt__(self, other):
        return compare(self, other) < 0

    def __le__(self, other):
        return compare(self, other) <= 0

    def __gt__(self, other):
        return compare(self, other) > 0

    def __ge__(self, other):
        return compare(self, other) >= 0

    def to_json(self) -> dict:
        return {"level": self.level, "mantissa": dec_str(self.mantissa, self.precision_bits),
                "prec": self.precision_bits}

    @classmethod
    def from_json(cls, d: dict) -> "TowerMagnitude":
        p = int(d.get("prec", DEFAULT_PRECISION))
        return cls(int(d["level"]), to_mpf(d["mantissa"], p), p)

    def __repr__(self):
        return f"Tower(level={self.level}, mantissa={mpmath.nstr(self.mantissa, 15)})"


def _band_top(prec: int) -> mpf:
    """Values at or above this count as >= e (rounding slack of a few ulps)."""
    with mp.workprec(prec + 16):
        return mp.e * (1 - mpf(2) ** (_E_BAND_TOL_BITS - prec))


def tower_from_real(x: Real, prec: int = DEFAULT_PRECISION) -> TowerMagnitude:
    x = to_mpf(x, prec)
    top = _band_top(prec)
    level = 0
    with mp.workprec(prec + 16):
        while x >= top:
            x = mpmath.log(x)
            level += 1
        if level and x < 1:
            x = mpf(1)  # snapped: the value sat within rounding of e at the level below
    return TowerMagnitude(level, to_mpf(x, prec), prec)


def tower_exp(m: TowerMagnitude) -> TowerMagnitude:
    if m.level >= 1:
        return TowerMagnitude(m.level + 1, m.mantissa, m.precision_bits)
    with mp.workprec(m.precision_bits + 16):
        one_low = 1 - mpf(2) ** (_E_BAND_TOL_BITS - m.precision_bits)
        if m.mantissa >= one_low:
            return TowerMagnitude(1, to_mpf(max(m.mantissa, mpf(1)), m.precision_bits), m.precision_bits)
        return TowerMagnitude(0, to_mpf(mpmath.exp(m.mantissa), m.precision_bits), m.precision_bits)


def tower_log(m: TowerMagnitude) -> TowerMagnitude:
    if m.level >= 2:
        return TowerMagnitude(m.level - 1, m.mantissa, m.precision_bits)
    if m.level == 1:
        return TowerMagnitude(0, m.mantissa, m.precision_bits)
    if m.mantissa <= 0:
        raise ValueError("log of nonpositive tower")
    with mp.workprec(m.precision_bits + 16):
        return tower_from_real(mpmath.log(m.mantissa), m.precision_bits)


def compare(a: TowerMagnitude, b: TowerMagnitude) -> int:
    ka, kb = a.key(), b.key()
    return (ka > kb) - (ka < kb)


def strictly_greater(a: TowerMagnitude, b: TowerMagnitude) -> bool:
    """a > b with a relative margin of a few ulps on the mantissa.

    Used where both sides come out of rounded arithmetic and equality must
    not be reported as a strict win.
    """
    if a.level != b.level:
        return a.level > b.level
    p = min(a.precision_bits, b.precision_bits)
    with mp.workprec(p + 16):
        slack = mpf(2) ** (_E_BAND_TOL_BITS + 8 - p) * max(abs(a.mantissa), abs(b.mantissa), mpf(1))
        return a.mantissa - b.mantissa > slack


def tower_to_real(m: TowerMagnitude, max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> mpf:
    """Convert back to an mpf, or raise if the value exceeds the budget."""
    p = m.precision_bits
    with mp.workprec(p + 16):
        x = m.mantissa
        for _ in range(m.level):
            if not exp_fits(x, max_exponent_bits):
                raise ExponentBudgetExceeded("tower too tall to convert")
            x = mpmath.exp(x)
    return to_mpf(x, p)


def tower_is_real(m: TowerMagnitude, max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> bool:
    try:
        tower_to_real(m, max_exponent_bits)
    except ExponentBudgetExceeded:
        return False
    return True


def tower_add_real(m: TowerMagnitude, d: Real,
                   max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> TowerMagnitude:
    """m + d.  Once m is past the exponent budget, d is below its last bit."""
    try:
        x = tower_to_real(m, max_exponent_bits)
    except ExponentBudgetExceeded:
        return m
    with mp.workprec(m.precision_bits + 16):
        return tower_from_real(x + to_mpf(d, m.precision_bits + 16), m.precision_bits)


def tower_sum(terms: list[TowerMagnitude],
              max_exponent_bits: int = DEFAULT_EXPONENT_BUDGET) -> TowerMagnitude:
    """Sum of nonnegative towers; unrepresentable terms swamp the rest."""
    if not terms:
        return tower_from_real(0)
    p = max(t.precision_bits for t in terms)
    big = [t for t in terms if not tower_is_real(t, max_exponent_bits)]
    if big:
        return max(big, key=TowerMagnitude.key)
    with mp.workprec(p + 16):
        total = mpmath.fsum(tower_to_real(t, max_exponent_bits) for t in terms)
    return tower_from_real(total, p)


def g_tower(n: int, prec: int = DEFAULT_PRECISION) -> TowerMagnitude:
    """g^n(0) for g = exp, as a tower."""
    m = tower_from_real(0, prec)
    for _ in range(n):
        m = tower_exp(m)
    return m
