import math

import mpmath
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from expdyn.arith import HPComplex, two_pi
from expdyn.dynmap import (
    InvalidK,
    InvalidLambda,
    Membership,
    OrbitLeftS,
    apply,
    classify,
    compute_strips,
    forward_orbit,
    itinerary_of,
    make_map,
    membership,
    verify_lemelt,
    verify_lemelt_along,
    which_strip,
)

from oracles import auto_K_oracle, f_oracle, fixed_point_oracle

M1 = make_map("1,0")


# -- make_map ----------------------------------------------------------------

def test_auto_K_lambda_one():
    assert M1.K == mpf("10.5")
    assert math.exp(10.5) > 2100


def test_auto_K_small_lambda():
    m = make_map("1e-9,0")
    root = auto_K_oracle(1e-9)
    assert abs(root - 29.40) < 0.01
    assert abs(float(m.K) - (root + 0.5)) < 1e-10
    assert 1e-9 * math.exp(29) < 5800 and 1e-9 * math.exp(30) > 6000


@pytest.mark.parametrize("lam", [1.0, 1e-3, 1e-6, 1e-9, 50.0])
def test_auto_K_oracle_agreement(lam):
    m = make_map(HPComplex.make(lam, 0))
    assert abs(float(m.K) - max(10.5, auto_K_oracle(lam) + 0.5)) < 1e-9


def test_explicit_K():
    with pytest.raises(InvalidK):
        make_map("1,0", K=10)
    assert make_map("1,0", K=12).K == 12


def test_zero_lambda():
    with pytest.raises(InvalidLambda):
        make_map("0,0")


# -- strips ------------------------------------------------------------------

def test_strips_lambda_one():
    s = M1.strips
    centers = sorted(float(h.center) for h in s.hat_strips)
    assert len(centers) == 3
    assert all(abs(a - b) < 1e-12 for a, b in zip(centers, [-2 * math.pi, 0, 2 * math.pi]))
    chosen = sorted(float(c.center) for c in s.chosen)
    assert abs(chosen[0]) < 1e-15 and abs(chosen[1] - 2 * math.pi) < 1e-12


def test_strips_lambda_i():
    m = make_map("0,1")
    bands = sorted((float(c.im_low), float(c.im_high)) for c in m.strips.chosen)
    assert abs(bands[0][0] + math.pi) < 1e-12 and abs(bands[0][1]) < 1e-12
    assert abs(bands[1][0] - math.pi) < 1e-12 and abs(bands[1][1] - 2 * math.pi) < 1e-12
    assert len(m.strips.hat_strips) == 2


@given(st.floats(min_value=-math.pi, max_value=math.pi), st.floats(min_value=1e-6, max_value=1e6))
def test_strip_heights_and_containment(theta, r):
    lam = HPComplex.make(r * math.cos(theta), r * math.sin(theta))
    if lam.is_zero():
        return
    m = make_map(lam)
    with mp.workprec(256):
        pi = +mp.pi
        for h in m.strips.hat_strips:
            assert abs(h.im_high - h.im_low - pi) < mpf(2) ** -200
            assert h.im_low >= -5 * pi / 2 - mpf(2) ** -100 and h.im_high <= 5 * pi / 2 + mpf(2) ** -100
        a, b = m.strips.chosen
        assert a.im_high <= b.im_low or b.im_high <= a.im_low
    assert 2 <= len(m.strips.hat_strips) <= 3


def test_compute_strips_idempotent():
    assert compute_strips(M1) == M1.strips


# -- apply -------------------------------------------------------------------

def test_apply_examples():
    assert apply(M1, HPComplex.make(0, 0)) == HPComplex.make(1, 0)
    m2 = make_map("2,0")
    with mp.workprec(300):
        ln3 = mpmath.log(3)
    w = apply(m2, HPComplex.make(ln3, 0))
    assert abs(w.re - 6) < mpf(2) ** -250 and w.im == 0


def test_vertical_segment_maps_to_circle():
    r = mpf("10.5")
    with mp.workprec(256):
        R = mpmath.exp(r)
    for k in range(17):
        with mp.workprec(300):
            y = two_pi(256) * k / 16
        w = apply(M1, HPComplex.make(r, y))
        assert abs(w.abs() / R - 1) < mpf(2) ** -240


@given(st.floats(min_value=-20, max_value=20), st.floats(min_value=-20, max_value=20))
def test_apply_matches_oracle(x, y):
    z = HPComplex.make(x, y)
    with mp.workprec(300):
        err = abs(apply(M1, z).mpc - f_oracle(1, z.mpc))
        assert err <= abs(f_oracle(1, z.mpc)) * mpf(2) ** -250


@given(st.sampled_from([0, 1]), st.floats(min_value=-30, max_value=30), st.floats(min_value=0, max_value=1))
def test_strip_maps_into_right_half_plane(s, x, frac):
    st_ = M1.strip(s)
    with mp.workprec(256):
        y = st_.im_low + (st_.im_high - st_.im_low) * mpf(frac)
    w = apply(M1, HPComplex.make(x, y))
    assert w.re >= -w.abs() * mpf(2) ** -200


@pytest.mark.parametrize("lam", ["1,0", "0,1", "1e-9,0", "1,1"])
def test_growth_on_S(lam):
    m = make_map(lam)
    for i in range(11):
        x = m.K + i
        for s in (0, 1):
            st_ = m.strip(s)
            for frac in ("0.01", "0.5", "0.99"):
                with mp.workprec(256):
                    y = st_.im_low + (st_.im_high - st_.im_low) * mpf(frac)
                z = m.hp(x, y)
                w = apply(m, z)
                assert w.abs() > 200 * z.re > 2000


# -- itineraries -------------------------------------------------------------

def test_itinerary_real_orbit():
    word, rec = itinerary_of(M1, HPComplex.make(11, 0), 5)
    assert word == "00000"
    assert rec.status.kind == "InSPrefix"


def test_itinerary_shifted_orbit():
    z = HPComplex(mpf(11), two_pi(256), 256)
    word, rec = itinerary_of(M1, z, 5)
    # f(11 + 2 pi i) = e^11 lies on the real axis, so the exact word is 1000...; the
    # rounding of 2 pi in Im z is amplified by |f'| ~ e^11 and then by e^(e^11), so
    # only the first two symbols are certified at 256 bits
    assert word == "10"
    assert rec.status.kind == "LeftS" and rec.status.step == 2


def test_itinerary_left_S():
    word, rec = itinerary_of(M1, HPComplex.make(0, 0), 4)
    assert word == "" and rec.status.kind == "LeftS" and rec.status.step == 0


@given(st.floats(min_value=10.5, max_value=14), st.floats(min_value=-1.5, max_value=7.8), st.integers(0, 4))
def test_itinerary_prefix_property(x, y, d):
    z = HPComplex.make(x, y)
    w1, r1 = itinerary_of(M1, z, d)
    w2, r2 = itinerary_of(M1, z, d + 1)
    assert w2.startswith(w1)


def test_membership_tolerance():
    st0 = M1.strip(0)
    z = M1.hp(11, st0.im_high)
    assert membership(M1, z, 0) is Membership.AMBIGUOUS
    assert which_strip(M1, M1.hp(11, 0)) == (0, False)


def test_far_angle_flag_sticks():
    rec = forward_orbit(M1, HPComplex.make(11, "0.5"), 4)
    seen = False
    for _, p in rec.samples:
        if getattr(p, "arg", 0) is None:
            seen = True
        elif seen:
            pytest.fail("angle-unknown flag cleared")


# -- verify_lemelt -----------------------------------------------------------

def test_lemelt_n1():
    r = verify_lemelt(M1, HPComplex.make(11, 0), 1)
    assert r.passed
    assert mpf(r.values["re_fn"]) > 1100
    assert abs(float(mpf(r.values["re_fn"])) - math.exp(11)) < 1e-6


def test_lemelt_n0_vacuous():
    assert verify_lemelt(M1, HPComplex.make(12, "0.3"), 0).passed


def test_lemelt_off_axis_leaves_S():
    # f(11 + 0.001i) has Im = e^11 sin(0.001), about 59.9: outside both strips
    with pytest.raises(OrbitLeftS) as exc:
        verify_lemelt(M1, HPComplex.make(11, "0.001"), 2)
    assert exc.value.step == 1


def test_lemelt_small_offset_n2():
    # an offset small enough to stay in S for two steps
    r = verify_lemelt(M1, HPComplex.make(11, "1e-30000"), 2)
    assert r.passed and r.reached == 2


def test_lemelt_along_rejects_inconsistent_orbit():
    z0 = M1.hp(11, 0)
    with pytest.raises(ValueError):
        verify_lemelt_along(M1, [z0, M1.hp(60000, 0)], 1)
    r = verify_lemelt_along(M1, [z0, apply(M1, z0)], 1)
    assert r.passed


def test_lemelt_report_json():
    d = verify_lemelt(M1, HPComplex.make(11, 0), 1).to_json()
    assert d["passed"] is True and set(d["values"]) >= {"re_fn", "arg_limit", "sum_limit"}


# -- classify ----------------------------------------------------------------

def test_classify_11():
    c = classify(M1, HPComplex.make(11, 0), 6)
    assert c.label == "FastEscapingCandidate"
    assert c.offset == 0  # smallest offset; see the decisions ledger


def test_classify_zero_needs_offset_one():
    c = classify(M1, HPComplex.make(0, 0), 6)
    assert c.label == "FastEscapingCandidate" and c.offset == 1


def test_classify_fixed_point():
    fp = fixed_point_oracle(300)
    c = classify(M1, HPComplex.make(fp.real, fp.imag), 8)
    assert c.label == "BoundedSoFar"


def test_classify_budget():
    with pytest.raises(ValueError):
        classify(M1, HPComplex.make(1, 0), 0)
