import numpy as np
import pytest

from expdyn.dynmap import make_map
from expdyn.hairs import Itinerary, trace_hair
from expdyn.render import (
    STRIP_COLOR,
    RenderSpec,
    escape_counts,
    ppm_bytes,
    render,
    render_array,
)

M1 = make_map("1,0")


def test_single_pixel_escapes_fast():
    spec = RenderSpec((10.9, 11.1, -0.1, 0.1), (1, 1), max_iter=3)
    counts = escape_counts(M1, spec)
    assert counts.shape == (1, 1) and 0 <= counts[0, 0] <= 2


def test_fixed_point_neighbourhood_does_not_escape_at_once():
    # points near the repelling fixed point stay bounded for a few steps
    spec = RenderSpec((0.318, 0.3183, 1.337, 1.3374), (1, 1), max_iter=3)
    assert escape_counts(M1, spec)[0, 0] == -1


def test_zero_iterations():
    spec = RenderSpec((-1, 1, -1, 1), (4, 3), max_iter=0)
    assert (escape_counts(M1, spec) == -1).all()


def test_strip_overlay_draws_horizontal_lines():
    spec = RenderSpec((-4, 14, -8, 8), (90, 80), max_iter=5, overlays=["strips"])
    img = render_array(M1, spec)
    rows = [y for y in range(80) if (img[y] == STRIP_COLOR).all(axis=-1).sum() > 10]
    assert len(rows) >= 3
    for y in rows:
        xs = np.nonzero((img[y] == STRIP_COLOR).all(axis=-1))[0]
        # lines start at Re = K = 10.5, i.e. column (10.5 + 4) / 18 * 90 - 0.5
        assert xs.min() >= 71 and xs.max() == 89


def test_hair_overlay(tmp_path):
    h = trace_hair(M1, Itinerary.parse("0*"), 5, [11, 12, 13])
    import json
    p = tmp_path / "hair.json"
    p.write_text(json.dumps(h.to_json()))
    spec = RenderSpec((10, 14, -1, 1), (40, 21), max_iter=2, palette="gray", overlays=[str(p)])
    img = render_array(M1, spec)
    assert (img[10, 10:31] == 255).all()


def test_bad_overlay(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    with pytest.raises(ValueError):
        render_array(M1, RenderSpec((0, 1, 0, 1), (2, 2), overlays=[str(p)]))


def test_ppm_header_and_size(tmp_path):
    spec = RenderSpec((-4, 14, -8, 8), (36, 32), max_iter=10)
    out = render(M1, spec, tmp_path / "a.ppm")
    data = out.read_bytes()
    assert data.startswith(b"P6\n36 32\n255\n")
    assert len(data) == len(b"P6\n36 32\n255\n") + 36 * 32 * 3


def test_deterministic(tmp_path):
    spec = RenderSpec((-4, 14, -8, 8), (36, 32), max_iter=10, overlays=["strips"])
    a = render(M1, spec, tmp_path / "a.ppm").read_bytes()
    b = render(M1, spec, tmp_path / "b.ppm").read_bytes()
    assert a == b
    assert ppm_bytes(render_array(M1, spec)) == a


@pytest.mark.parametrize("kw", [dict(window=(1, 0, 0, 1)), dict(resolution=(0, 4)),
                                dict(max_iter=-1), dict(palette="neon")])
def test_spec_validation(kw):
    args = dict(window=(0, 1, 0, 1), resolution=(2, 2))
    args.update(kw)
    with pytest.raises(ValueError):
        RenderSpec(**args)
