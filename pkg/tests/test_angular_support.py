import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from uniradon.angular_support import (
    AngularDomain,
    SlopeLine,
    admissible,
    angular_mask,
    from_slope,
    mask_sinogram,
    same_line,
    slope_radon_value,
    to_slope,
)
from uniradon.errors import CapabilityError, InputError
from uniradon.phantoms import SupportMask, ball, phantom
from uniradon.radon import AngularGrid, RadialGrid, direct_radon_analytic


def test_to_slope_examples():
    line = to_slope(0.3, math.pi / 2)
    assert line.t == pytest.approx(0.3) and line.p == pytest.approx(0.0, abs=1e-15)
    line = to_slope(0.0, math.pi / 4)
    assert line.t == 0.0 and line.p == pytest.approx(-1.0)
    with pytest.raises(CapabilityError):
        to_slope(0.2, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_slope_round_trip(tau, phi):
    assume(abs(math.sin(phi)) > 1e-3)
    assert same_line(from_slope(to_slope(tau, phi)), (tau, phi), atol=1e-8)


def test_slope_radon_examples(disc_sino):
    assert slope_radon_value(disc_sino, SlopeLine(0.0, 0.0)) == pytest.approx(2.0)
    assert slope_radon_value(disc_sino, SlopeLine(2.0, 0.0)) == 0.0
    phi = math.pi / 6
    k = int(round(phi / (2 * math.pi / 360)))
    tau = 0.25
    line = to_slope(tau, phi)
    expected = float(disc_sino.sample(np.array([tau]), rows=np.array([k]))[0]) / math.sin(phi)
    assert slope_radon_value(disc_sino, line) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(2 * float(disc_sino.sample(np.array([tau]), rows=np.array([k]))[0]))
    with pytest.raises(InputError):
        slope_radon_value(disc_sino, SlopeLine(10.0, 0.0))


def test_admissible_examples():
    assert admissible(2.1, 1, 1) is True
    assert admissible(2.0, 1, 1) is False
    assert admissible(1, -1, 0.5) is True
    assert admissible(-2.1, 1, 1) is True
    assert admissible(0, 1, 0.5) is False
    with pytest.raises(InputError):
        admissible(0, 0, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-3, 3), st.floats(0, 5))
def test_admissible_monotone_in_q1(q1, q2, t, dq):
    if admissible(q1, q2, t):
        assert admissible(q1 + dq, q2, t)


def test_angular_mask_examples():
    d = angular_mask(SupportMask.unit_box())
    assert d.intervals == ((-math.pi / 2, math.pi / 2),)
    assert d.measure == pytest.approx(math.pi)
    assert angular_mask(SupportMask("box", ((-2, 2), (-2, 2)))) == d
    with pytest.raises(CapabilityError):
        angular_mask(SupportMask("quadrant", quadrant="I"))
    grid = AngularGrid.full_circle(360)
    inside = grid.angles[d.contains(grid.angles)]
    assert not np.any(np.isclose(np.mod(inside, math.pi), math.pi / 2))


def test_domain_validation():
    with pytest.raises(InputError):
        AngularDomain(((1.0, 0.5),))
    with pytest.raises(InputError):
        AngularDomain(((0.0, 1.0), (0.5, 2.0)))
    assert AngularDomain(((0.0, 1.0), (1.0, 2.0))).measure == pytest.approx(2.0)
    assert AngularDomain.full().is_full


def test_mask_sinogram_examples(disc_sino):
    half = mask_sinogram(disc_sino, AngularDomain.half_range())
    assert half.angular.size == 179
    assert half.angular.weights.sum() == pytest.approx(math.pi)
    assert half.values.shape == (179, disc_sino.radial.count)
    assert mask_sinogram(disc_sino, AngularDomain.full()) is disc_sino
    with pytest.raises(InputError):
        mask_sinogram(disc_sino, AngularDomain(((0.001, 0.002),)))


def test_mask_sinogram_3d_band():
    s = direct_radon_analytic(phantom(ball()), RadialGrid.symmetric(2.0, 33), AngularGrid.full_sphere(8, 6))
    band = AngularDomain((((0.0, math.pi), (0.0, math.pi)),), n=3)
    m = mask_sinogram(s, band)
    assert m.angular.weights.sum() == pytest.approx(2 * math.pi)
    assert m.values.shape[1] == s.values.shape[1]
