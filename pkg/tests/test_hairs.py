import math

import mpmath
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from expdyn.arith import HPComplex, two_pi
from expdyn.dynmap import apply, itinerary_of, make_map, verify_lemelt_along
from expdyn.hairs import (
    ErrorBound,
    Itinerary,
    OutsideRange,
    hausdorff,
    inverse_branch,
    periodic_point,
    trace_boundary,
    trace_hair,
)

from oracles import fixed_point_oracle, lambertw_fixed_point

M1 = make_map("1,0")
P = 256


# -- itineraries -------------------------------------------------------------

def test_itinerary_parse_forms():
    a = Itinerary.parse("0110*")
    assert a.word(9) == "011001100"
    b = Itinerary.parse("01(10)")
    assert b.word(7) == "0110101"
    c = Itinerary.parse("011")
    assert c.word(3) == "011"
    with pytest.raises(IndexError):
        c.symbol(3)
    with pytest.raises(ValueError):
        Itinerary.parse("012")


@given(st.text("01", min_size=0, max_size=5), st.text("01", min_size=1, max_size=4), st.integers(0, 12))
def test_shift_drops_symbols(prefix, cycle, k):
    a = Itinerary(prefix, cycle)
    assert a.shift(k).word(10) == a.word(k + 10)[k:]


# -- inverse branches --------------------------------------------------------

def test_inverse_branch_examples():
    with mp.workprec(P + 32):
        w = M1.hp(mpmath.exp(mpf("10.5")), 0)
    z0 = inverse_branch(M1, w, 0)
    z1 = inverse_branch(M1, w, 1)
    assert abs(z0.re - mpf("10.5")) < mpf(2) ** (8 - P) and z0.im == 0
    assert abs(z1.re - mpf("10.5")) < mpf(2) ** (8 - P)
    assert abs(z1.im - two_pi(P)) < mpf(2) ** (8 - P)
    with pytest.raises(OutsideRange):
        inverse_branch(M1, M1.hp(1, 0), 0)


radii = st.floats(min_value=0, max_value=40)
angles = st.floats(min_value=-math.pi / 2, max_value=math.pi / 2)


@pytest.mark.parametrize("lam", ["1,0", "0,1", "1e-9,0"])
@given(radii, angles, st.sampled_from([0, 1]))
def test_round_trip(lam, logr, theta, s):
    m = make_map(lam)
    with mp.workprec(P + 32):
        R = m.abs_lam * mpmath.exp(m.K + mpf(logr))
        w = m.hp(R * mpmath.cos(theta), R * mpmath.sin(theta))
    z = inverse_branch(m, w, s)
    back = apply(m, z)
    with mp.workprec(P):
        assert (back - w).abs() <= w.abs() * mpf(2) ** (16 - P)


@given(radii, angles)
def test_branch_separation(logr, theta):
    with mp.workprec(P + 32):
        R = mpmath.exp(M1.K + mpf(logr))
        w = M1.hp(R * mpmath.cos(theta), R * mpmath.sin(theta))
    a, b = inverse_branch(M1, w, 0), inverse_branch(M1, w, 1)
    assert a.re == b.re
    with mp.workprec(P):
        offset = M1.strip(1).center - M1.strip(0).center
        assert abs((b.im - a.im) - offset) < mpf(2) ** (8 - P)


# -- hair tracing ------------------------------------------------------------

def test_real_hair_on_axis():
    h = trace_hair(M1, Itinerary.parse("0*"), 15, [12, 20, 50])
    for p in h.points:
        assert p.error_bound.exceeds(abs(p.z.im))


def test_distinct_hairs():
    a = trace_hair(M1, Itinerary.parse("0*"), 10, [12, 20])
    b = trace_hair(M1, Itinerary.parse("1(0)"), 10, [12, 20])
    for p, q in zip(a.points, b.points):
        assert (p.z - q.z).abs() > 1


def test_points_ordered_by_anchor():
    h = trace_hair(M1, Itinerary.parse("01*"), 10, [15, 11, 13])
    assert [float(p.anchor) for p in h.points] == [11, 13, 15]
    for p in h.points:
        assert abs(p.z.re - p.anchor) < mpf(2) ** (24 - P) * p.anchor


def test_doubling_depth_moves_less_than_bound():
    a = Itinerary.parse("0110*")
    shallow = trace_hair(M1, a, 5, [11, 12, 14])
    deep = trace_hair(M1, a, 10, [11, 12, 14])
    for p, q in zip(shallow.points, deep.points):
        assert p.error_bound.exceeds((p.z - q.z).abs())


def test_error_bound_contracts_by_2000_per_level():
    a = Itinerary.parse("01*")
    for d in (2, 3, 4):
        p = trace_hair(M1, a, d, [11]).points[0]
        q = trace_hair(M1, a, d + 1, [11]).points[0]
        assert q.error_bound <= p.error_bound.scaled(mpf(1) / 2000)


def test_too_small_anchor():
    with pytest.raises(OutsideRange):
        trace_hair(M1, Itinerary.parse("0*"), 5, [5])


@pytest.mark.parametrize("word", ["0*", "1*", "01*", "001*", "1101*"])
def test_hair_points_have_expected_itinerary(word):
    a = Itinerary.parse(word)
    h = trace_hair(M1, a, 12, [10.6, 11, 12, 13])
    for p in h.points:
        w, _ = itinerary_of(M1, p.z, 2)
        assert w == a.word(len(w)) and len(w) >= 1
        # the pull-back chain certifies the longer prefix
        assert len(p.orbit) >= 3
        for j, z in enumerate(p.orbit[:3]):
            assert which_symbol(z) == a.symbol(j)


def which_symbol(z):
    from expdyn.dynmap import which_strip
    return which_strip(M1, z)[0]


@pytest.mark.parametrize("word", ["0*", "1*", "10*", "0110*"])
def test_tangent_and_monotone_growth(word):
    h = trace_hair(M1, Itinerary.parse(word), 12, [10.6 + 0.25 * i for i in range(12)])
    zs = h.zs()
    for a, b in zip(zs, zs[1:]):
        assert b.re > a.re
        assert abs(float((b - a).arg())) <= 1 / 50 + 1e-3
    for p in h.points:
        assert abs(float(p.tangent.arg())) < 1 / 50


@pytest.mark.parametrize("word", ["0*", "01*", "110*"])
def test_hair_points_pass_lemelt_along_chain(word):
    h = trace_hair(M1, Itinerary.parse(word), 12, [10.6, 11, 12])
    for p in h.points:
        for n in (1, 2):
            assert verify_lemelt_along(M1, list(p.orbit), n).passed


def test_hair_json_schema():
    rows = trace_hair(M1, Itinerary.parse("0*"), 5, [12]).to_json()
    assert isinstance(rows, list) and {"anchor", "z", "err"} <= set(rows[0])


# -- boundary curves ---------------------------------------------------------

def test_boundary_k0_on_line():
    h = trace_boundary(M1, Itinerary.parse("0*"), 0, "+", [11, 12, 13])
    for p in h.points:
        assert abs(p.z.im - M1.strip(0).im_high) < mpf(2) ** (16 - P)
        assert p.z.re >= M1.K


def test_boundary_k1_image_on_line():
    h = trace_boundary(M1, Itinerary.parse("0*"), 1, "+", [11, 12])
    top = M1.strip(0).im_high
    for p in h.points:
        w = apply(M1, p.z)
        assert abs(w.im - top) < mpf(2) ** (40 - P) * w.abs()
        assert w.re >= M1.K


def test_boundary_accumulates_on_hair():
    a = Itinerary.parse("0*")
    anchors = [11, 11.5, 12, 13]
    hair = trace_hair(M1, a, 12, anchors).zs()
    dists = [hausdorff(trace_boundary(M1, a, k, "+", anchors).zs(), hair) for k in range(4)]
    assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))


def test_boundary_bad_side():
    with pytest.raises(ValueError):
        trace_boundary(M1, Itinerary.parse("0*"), 1, "x", [11])


# -- periodic points ---------------------------------------------------------

def test_fixed_point_cycle_0():
    pp = periodic_point(M1, "0")
    oracle = fixed_point_oracle()
    assert abs(oracle - lambertw_fixed_point()) < mpf(10) ** -100
    with mp.workprec(P):
        assert abs(pp.z.mpc - oracle) < mpf(10) ** -60
        assert abs(pp.multiplier_abs - abs(oracle)) < mpf(10) ** -60
    assert pp.multiplier_abs > 1
    assert abs(float(pp.z.re) - 0.3181315) < 1e-7 and abs(float(pp.z.im) - 1.3372357) < 1e-7


def test_fixed_point_cycle_1():
    pp = periodic_point(M1, "1")
    assert abs(float(pp.z.im) - 2 * math.pi) < 1.6
    assert pp.residual < mpf(2) ** -120


@pytest.mark.parametrize("cycle", ["01", "001", "011"])
def test_periodic_residuals(cycle):
    pp = periodic_point(M1, cycle)
    assert pp.period == len(cycle)
    assert pp.residual < 10 * mpf(2) ** -128
    assert pp.multiplier_abs > 1


def test_periodic_bad_cycle():
    with pytest.raises(ValueError):
        periodic_point(M1, "")


def test_error_bound_value_underflow():
    eb = ErrorBound.from_value("1e-10", P, 2**20)
    with mp.workprec(P):
        assert abs(eb.value() - mpf("1e-10")) < mpf("1e-70")
