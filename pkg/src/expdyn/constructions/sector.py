"""Second preimages of a target inside the sector around arg = pi/4."""
from __future__ import annotations

import math

import mpmath
from mpmath import mp, mpf

from ..arith import ExponentBudgetExceeded, HPComplex, Real, to_mpf
from ..dynmap import ExpMap, apply, with_precision


class ZeroTarget(ValueError):
    pass


def sector_preimage(m: ExpMap, z: HPComplex, eps: Real, max_attempts: int = 16) -> HPComplex:
    """Some y with f(f(y)) = z and |arg y - pi/4| < eps.

    The first preimage is taken with a large lift 2 pi i k so that the second
    logarithm has real part near ``2/eps``; the second lift is chosen to make
    Im y as close to Re y as an integer multiple of 2 pi allows.  The result
    carries extra precision (about log2 k bits) so that f(y) is still exact
    enough for the second application of f.
    """
    if z.is_zero():
        raise ZeroTarget("target must be nonzero")
    eps = to_mpf(eps, 64)
    if not (0 < eps < mpf("0.5")):
        raise ValueError("eps must lie in (0, 1/2)")
    p = m.precision_bits
    L = max(mpf(4), 2 / eps)
    for _ in range(max_attempts):
        with mp.workprec(64):
            log2k = float((L + m.log_abs_lam) / mpmath.log(2) - mpmath.log(2 * mp.pi, 2))
        if log2k > m.max_exponent_bits:
            raise ExponentBudgetExceeded(f"lift index 2**{log2k:.0f} exceeds the exponent budget")
        P = p + max(0, math.ceil(log2k)) + 64
        mp_ = with_precision(m, P)
        lam = mp_.lam
        zz = z.with_precision(P)
        with mp.workprec(P):
            tau = 2 * mp.pi
            k = mpmath.nint(mpmath.exp(L) * mp_.abs_lam / tau)
            lift = HPComplex.make(0, k * tau, P, m.max_exponent_bits)
        w = (zz / lam).log() + lift
        v = (w / lam).log()
        with mp.workprec(P):
            j = mpmath.nint((v.re - v.im) / tau)
            y = HPComplex.make(v.re, v.im + j * tau, P, m.max_exponent_bits)
            off = abs(mpmath.atan2(y.im, y.re) - mp.pi / 4)
        back = apply(mp_, apply(mp_, y))
        with mp.workprec(P):
            ok_trip = (back - zz).abs() <= mpf(2) ** (16 - p) * max(mpf(1), zz.abs())
        if off < eps and ok_trip:
            return y
        L *= 2
    raise ExponentBudgetExceeded("no sector preimage found within the attempt limit")
