import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uniradon.errors import CapabilityError, InputError
from uniradon.phantoms import (
    PhantomSpec,
    Primitive,
    RasterGrid,
    SupportMask,
    analytic_radon,
    ball,
    disc,
    eval_phantom,
    evaluate,
    gaussian,
    load_phantom,
    make_quadrant_phantom,
    phantom,
    phantom_from_dict,
    phantom_to_dict,
    rasterize,
)


def test_eval_examples():
    d = phantom(disc())
    assert eval_phantom(d, [0, 0]) == 1.0
    assert eval_phantom(d, [2, 0]) == 0.0
    assert eval_phantom(phantom(gaussian()), [1, 1]) == pytest.approx(math.exp(-1), abs=1e-12)


def test_eval_dimension_mismatch():
    with pytest.raises(InputError):
        eval_phantom(phantom(disc()), [0, 0, 0])


def test_analytic_radon_examples():
    d = phantom(disc())
    for phi in (0.0, 0.7, 2.0):
        assert analytic_radon(d, 0.0, [math.cos(phi), math.sin(phi)]) == pytest.approx(2.0)
    assert analytic_radon(d, 0.5, [1.0, 0.0]) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert analytic_radon(phantom(ball()), 0.0, [0.0, 0.0, 1.0]) == pytest.approx(math.pi)


def test_analytic_radon_rejects_non_unit_direction():
    with pytest.raises(InputError):
        analytic_radon(phantom(disc()), 0.0, [2.0, 0.0])


def test_ellipse_radon_against_quadrature():
    spec = phantom(Primitive("ellipse2d", (0.2, -0.1), (0.9, 0.4), 1.5, 0.6))
    d = np.array([math.cos(1.1), math.sin(1.1)])
    dp = np.array([-d[1], d[0]])
    s = np.linspace(-2, 2, 400001)
    for tau in (-0.3, 0.0, 0.25):
        pts = tau * d + s[:, None] * dp
        numeric = np.sum(evaluate(spec, pts)) * (s[1] - s[0])
        assert analytic_radon(spec, tau, d) == pytest.approx(numeric, abs=2e-4)


def test_masked_ellipse_has_no_closed_form():
    spec = PhantomSpec(2, ((Primitive("ellipse2d", (0, 0), (1, 0.5)), SupportMask.unit_box()),))
    with pytest.raises(CapabilityError):
        analytic_radon(spec, 0.0, [1.0, 0.0])


def test_quadrant_disc_chord():
    q = make_quadrant_phantom(disc(amplitude=2.0), disc(amplitude=1.0))
    # vertical line x1 = 0.5 crosses quadrant I for 0 < x2 < sqrt(0.75)
    assert analytic_radon(q, 0.5, [1.0, 0.0]) == pytest.approx(2.0 * math.sqrt(0.75))
    assert analytic_radon(q, -0.5, [1.0, 0.0]) == pytest.approx(math.sqrt(0.75))


def test_rasterize_examples():
    grid = RasterGrid.square(3, 1.0)
    r = rasterize(phantom(disc()), grid).values
    assert r[1, 1] == 1.0
    assert r[0, 0] == r[0, 2] == r[2, 0] == r[2, 2] == 0.0
    assert np.all(rasterize(PhantomSpec(2, ()), grid).values == 0)
    off = rasterize(phantom(disc(center=(0.5, 0.0))), RasterGrid.square(9, 1.0)).values
    assert not np.array_equal(off, off[:, ::-1])


def test_raster_layout_is_x1_fastest():
    grid = RasterGrid((0, 10), (1, 12), (2, 3))
    pts = grid.points()
    assert pts[:2].tolist() == [[0, 10], [1, 10]]
    assert grid.array_shape == (3, 2)


def test_zero_size_grid_rejected():
    with pytest.raises(InputError):
        RasterGrid.square(0, 1.0)


def test_quadrant_phantom_examples():
    g = make_quadrant_phantom(gaussian(), gaussian())
    for x in ([0.3, 0.4], [1.2, 0.1]):
        assert eval_phantom(g, x) == eval_phantom(g, -np.array(x))
    only_one = make_quadrant_phantom(gaussian(), gaussian(amplitude=0.0))
    assert eval_phantom(only_one, [-0.5, -0.5]) == 0.0
    assert eval_phantom(only_one, [-0.5, 0.5]) == 0.0
    two = make_quadrant_phantom(gaussian(amplitude=2.0), gaussian(amplitude=1.0))
    assert eval_phantom(two, [0.5, 0.5]) == pytest.approx(2 * eval_phantom(two, [-0.5, -0.5]))


def test_primitive_invariants():
    with pytest.raises(InputError):
        disc(radius=0.0)
    with pytest.raises(InputError):
        Primitive("disc2d", (0, 0, 0), (1,))
    with pytest.raises(InputError):
        PhantomSpec(3, ((disc(), SupportMask()),))


def test_gaussian_effective_support():
    g = gaussian(sigma=0.5)
    lo, hi = g.bounds()
    edge = Primitive.evaluate(g, np.array([hi[0], 0.0]))
    assert edge < 1e-12
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2), st.floats(-3, 3),
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
)
def test_values_bounded_by_amplitude(cx, cy, r, amp, x):
    for prim in (disc((cx, cy), r, amp), gaussian((cx, cy), r, amp)):
        assert abs(eval_phantom(phantom(prim), x)) <= abs(amp)


def test_json_round_trip(tmp_path):
    spec = PhantomSpec(
        2,
        (
            (disc((0.1, 0.2), 0.5, 2.0), SupportMask("quadrant", quadrant="I")),
            (Primitive("ellipse2d", (0, 0), (0.5, 0.3), 1.0, 0.4), SupportMask()),
            (Primitive("rectangle2d", (0, 0), (0.5, 0.3)), SupportMask.unit_box()),
        ),
        SupportMask.unit_box(),
    )
    path = tmp_path / "p.json"
    path.write_text(json.dumps(phantom_to_dict(spec)))
    assert load_phantom(path) == spec


def test_json_rejects_unknown_keys(tmp_path):
    obj = {"n": 2, "primitives": [{"kind": "disc2d", "center": [0, 0], "params": {"radius": 1, "r2": 1}}]}
    with pytest.raises(InputError, match="r2"):
        phantom_from_dict(obj)
    with pytest.raises(InputError, match="extra"):
        phantom_from_dict({"n": 2, "primitives": [], "extra": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_phantom(bad)
