import json
import math

import mpmath
import pytest
from hypothesis import assume, given, strategies as st
from mpmath import mp, mpf

from expdyn.arith import HPComplex, two_pi
from expdyn.curves import (
    AngleSet,
    CurveBudgetExceeded,
    PointOnCurve,
    SampleCapExceeded,
    SampledCurve,
    Segment,
    angle_distance,
    angle_set,
    arc,
    circle,
    concat,
    inclusion_report,
    iterate_curve,
    orient_det,
    polyline,
    refine,
    segment,
    segments_cross,
    self_intersections,
    winding_number,
)
from expdyn.dynmap import make_map
from expdyn.hairs import Itinerary, trace_hair

from oracles import orient_oracle, segment_angle_oracle, winding_oracle

M1 = make_map("1,0")
P = 256
HAIRS = [trace_hair(M1, Itinerary.parse(w), 12, [10.6, 11, 11.5, 12, 13, 14, 16, 20]) for w in ("0*", "1*")]


def hp(x, y=0):
    return HPComplex.make(x, y, P)


# -- construction and JSON ---------------------------------------------------

def test_t_strictly_increasing():
    c = segment(hp(0), hp(1), 5)
    with pytest.raises(ValueError):
        SampledCurve(list(reversed(c.samples)))


def test_circle_closes_exactly():
    c = circle(hp(0), 1, 33)
    assert c.closed and c.samples[0].z == c.samples[-1].z


def test_polyline_corners():
    c = polyline([hp(0), hp(1), hp(1, 1), hp(0, 1)], closed=True)
    assert len(c.corners) == 3 and c.closed


def test_concat_requires_shared_junctions():
    a = segment(hp(0), hp(1), 5)
    b = segment(hp(1), hp(1, 1), 5)
    joined = concat([a, b])
    assert len(joined.corners) == 1
    with pytest.raises(ValueError):
        concat([a, segment(hp(2), hp(3), 5)])


coords = st.floats(min_value=-100, max_value=100, allow_nan=False)


@given(coords, coords, coords, coords, st.integers(2, 40), st.booleans())
def test_json_round_trip(x0, y0, x1, y1, n, as_arc):
    assume(abs(complex(x0, y0) - complex(x1, y1)) > 1e-6)
    if as_arc:
        c = arc(hp(x0, y0), abs(x1) + 0.5, 0, y1 % 6, n)
    else:
        c = segment(hp(x0, y0), hp(x1, y1), n)
    d = c.to_json()
    text = json.dumps(d, sort_keys=True)
    back = SampledCurve.from_json(json.loads(text))
    assert json.dumps(back.to_json(), sort_keys=True) == text
    assert back.zs() == c.zs() and back.ts() == c.ts()


def test_json_schema_keys():
    d = circle(hp(0), 1, 9).to_json()
    assert {"closed", "samples", "corners"} <= set(d)
    s = d["samples"][0]
    assert set(s) == {"t", "z", "tangent"} and isinstance(s["t"], str)


# -- iteration ---------------------------------------------------------------

def test_vertical_segment_maps_to_circle():
    c = segment(hp("10.5", 0), HPComplex(mpf("10.5"), two_pi(P), P), 65)
    tol = mpf(100)
    img = iterate_curve(M1, c, 1, tol)
    assert img.closed
    with mp.workprec(P):
        R = mpmath.exp(mpf("10.5"))
        dev = max(abs(z.abs() - R) for z in img.zs())
        assert dev < tol and dev / R < mpf(2) ** -200
        chords = [(b - a).abs() for a, b in zip(img.zs(), img.zs()[1:])]
        assert max(chords) <= tol
    assert abs(float(R) - 36315.5) < 0.1


def test_iterate_zero_is_identity():
    c = segment(hp(1, 1), hp(2, 3), 9)
    assert iterate_curve(M1, c, 0).zs() == c.zs()


def test_real_segment_two_steps():
    img = iterate_curve(M1, segment(hp(11), hp(12), 9), 2)
    assert all(z.im == 0 for z in img.zs())
    with mp.workprec(P):
        lo = mpmath.log(mpmath.log(img.zs()[0].re))
        hi = mpmath.log(mpmath.log(img.zs()[-1].re))
    assert abs(lo - 11) < mpf(2) ** -200 and abs(hi - 12) < mpf(2) ** -200


def test_budget_exceeded_reports_partial():
    with pytest.raises(CurveBudgetExceeded) as exc:
        iterate_curve(M1, segment(hp(11), hp(12), 5), 3)
    assert exc.value.step == 3 and len(exc.value.partial) >= 5


def test_sample_cap():
    c = circle(hp(0), 1, 9)
    with pytest.raises(SampleCapExceeded):
        refine(c, mpf("1e-6"), cap=200)


def test_corners_preserved():
    c = polyline([hp(0), hp(1), hp(1, 1)])
    img = iterate_curve(M1, c, 1)
    assert img.corners == c.corners


@given(st.floats(min_value=-1, max_value=1), st.floats(min_value=-1, max_value=1),
       st.floats(min_value=0.1, max_value=1), st.floats(min_value=0.1, max_value=1))
def test_semigroup(x, y, dx, dy):
    c = segment(hp(x, y), hp(x + dx, y + dy), 9)
    two = iterate_curve(M1, c, 2)
    one_one = iterate_curve(M1, iterate_curve(M1, c, 1), 1)
    a = {s.t: s.z for s in two.samples}
    b = {s.t: s.z for s in one_one.samples}
    common = set(a) & set(b)
    assert len(common) >= 9
    with mp.workprec(P):
        for t in common:
            assert (a[t] - b[t]).abs() <= mpf(2) ** (24 - P) * max(mpf(1), a[t].abs())


# -- predicates --------------------------------------------------------------

def test_winding_unit_circle():
    c = circle(hp(0), 1, 65)
    assert winding_number(c, hp(0)) == 1
    assert winding_number(c, hp(2)) == 0
    with pytest.raises(PointOnCurve):
        winding_number(c, c.samples[5].z)
    with pytest.raises(ValueError):
        winding_number(segment(hp(0), hp(1)), hp(0, 1))


def test_winding_reversed_and_double():
    c = circle(hp(0), 1, 65)
    rev = SampledCurve.from_geometry(
        type(c.geometry)(c.geometry.center, c.geometry.radius, c.geometry.theta1, c.geometry.theta0),
        65, P, closed=True)
    assert winding_number(rev, hp(0)) == -1
    with mp.workprec(P + 16):
        g2 = type(c.geometry)(c.geometry.center, c.geometry.radius, mpf(0), 2 * two_pi(P))
    twice = SampledCurve.from_geometry(g2, 129, P, closed=True)
    assert winding_number(twice, hp("0.1", "0.2")) == 2


@given(st.integers(3, 12), st.lists(st.floats(min_value=0.2, max_value=3), min_size=12, max_size=12),
       st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
def test_winding_matches_oracle_on_star_polygons(k, radii, px, py):
    pts = []
    for i in range(k):
        th = 2 * math.pi * i / k
        pts.append(hp(radii[i] * math.cos(th), radii[i] * math.sin(th)))
    c = polyline(pts, closed=True)
    z = hp(px, py)
    try:
        w = winding_number(c, z)
    except PointOnCurve:
        return
    assert w == winding_oracle([p.mpc for p in pts], z.mpc)


@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=-2, max_value=2),
       st.sampled_from([9, 17, 33]))
def test_winding_invariant_under_refinement(px, py, n):
    z = hp(px, py)
    assume(abs(abs(complex(px, py)) - 1) > 0.05)
    coarse = circle(hp(0), 1, n)
    fine = refine(coarse, mpf("0.01"))
    assert len(fine) > len(coarse)
    assert winding_number(coarse, z) == winding_number(fine, z)


def test_self_intersections_circle_empty():
    assert self_intersections(circle(hp(0), 1, 129)) == []


def test_figure_eight():
    c = polyline([hp(0), hp(1, 1), hp(1, -1), hp(0, 0).like(0, 0) + hp(-1, 1), hp(-1, -1), hp(0)], closed=True)
    xs = self_intersections(c)
    assert len(xs) == 1 and xs[0][2] > 0


@given(st.floats(min_value=0.05, max_value=math.pi - 0.05))
def test_crossing_angle(theta):
    d = complex(math.cos(theta), math.sin(theta))
    # the connecting leg stays below the real axis, so the only crossing is at 0
    c = polyline([hp(-1), hp(1), hp(2, -2), hp(-d.real, -d.imag), hp(d.real, d.imag)])
    xs = self_intersections(c)
    assert len(xs) == 1
    assert abs(float(xs[0][2]) - segment_angle_oracle(1, d)) < 1e-12


small = st.integers(-2**60, 2**60)


@given(small, small, small, small, small, small, st.integers(-80, 80))
def test_orient_det_exact(ax, ay, bx, by, cx, cy, e):
    with mp.workprec(P):
        pts = [mpmath.ldexp(mpf(v), e) for v in (ax, ay, bx, by, cx, cy)]
    a, b, c = HPComplex(pts[0], pts[1], P), HPComplex(pts[2], pts[3], P), HPComplex(pts[4], pts[5], P)
    assert orient_det(a, b, c)[0] == orient_oracle(pts[0:2], pts[2:4], pts[4:6])


def test_orient_det_near_collinear():
    with mp.workprec(P):
        eps = mpf(2) ** -200
        a, b = hp(0), hp(1, 1)
        c_on = hp("0.5", "0.5")
        c_above = HPComplex(mpf("0.5"), mpf("0.5") + eps, P)
    assert orient_det(a, b, c_on)[0] == 0
    assert orient_det(a, b, c_above)[0] == 1


def test_segments_cross_parameters():
    s, u = segments_cross(hp(0), hp(2), hp(1, -1), hp(1, 1))
    assert s == mpf("0.5") and u == mpf("0.5")
    assert segments_cross(hp(0), hp(1), hp(0, 1), hp(1, 1)) is None


# -- angle sets --------------------------------------------------------------

def test_angle_set_vertical():
    c = segment(hp(11, -1), hp(11, 1), 33)
    a0 = angle_set(M1, c, 0, HAIRS)
    assert len(a0.angles) == 1
    assert angle_distance(a0.angles[0], math.pi / 2) < 1e-12
    t, word = a0.witnesses[0]
    assert abs(float(t) - 0.5) < 1e-12 and word == "(0)"


def test_angle_set_slope_one():
    c = segment(hp(10, -1), hp(12, 1), 33)
    a0 = angle_set(M1, c, 0, HAIRS)
    assert len(a0.angles) == 1 and angle_distance(a0.angles[0], math.pi / 4) < 1e-12


@pytest.mark.parametrize("start,end", [((11, -1), (11, 1)), ((10, -1), (12, 1))])
def test_angle_set_monotone(start, end):
    c = segment(hp(*start), hp(*end), 33)
    a0 = angle_set(M1, c, 0, HAIRS)
    a1 = angle_set(M1, c, 1, HAIRS, previous=a0)
    assert a1.direct_resolved
    assert all(match is not None for _, match in inclusion_report(a0, a1))


def test_angle_set_json():
    c = segment(hp(11, -1), hp(11, 1), 17)
    d = angle_set(M1, c, 0, HAIRS).to_json()
    assert d["n"] == 0 and len(d["angles"]) == len(d["witnesses"]) == 1


def test_tangential_crossing_excluded():
    c = segment(hp(11, -1), hp(13, "1e-5"), 17).samples
    tangent = segment(hp(11, "-1e-6"), hp(13, "1e-6"), 17)
    a = angle_set(M1, tangent, 0, HAIRS)
    assert a.angles == [] and len(a.tangential) == 1


def test_previous_level_checked():
    c = segment(hp(11, -1), hp(11, 1), 17)
    a0 = angle_set(M1, c, 0, HAIRS)
    with pytest.raises(ValueError):
        angle_set(M1, c, 2, HAIRS, previous=a0)


def test_angle_distance_mod_pi():
    assert angle_distance(0.001, math.pi - 0.001) < 0.0021
