"""Angular restrictions induced by a finite box support.

Lines are described either by ``(tau, phi)`` with ``<n_phi, x> = tau`` or by
the slope form ``x2 = p * x1 + t``.  Frequencies ``q = (q1, q2)`` paired with
an intercept ``t`` are *admissible* when the line they describe keeps the
box constraints with strict inequality; equality cases are boundary points
and are always rejected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, InputError
from .radon import TWO_PI

log = logging.getLogger(__name__)

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class SlopeLine:
    """The line ``x2 = p * x1 + t``."""

    t: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.p)):
            raise InputError("slope line parameters must be finite")


def to_slope(tau, phi):
    s = math.sin(phi)
    if abs(s) <= 1e-12:
        raise CapabilityError("vertical line: no slope form, keep the (tau, phi) description")
    return SlopeLine(tau / s, -math.cos(phi) / s)


def from_slope(line):
    """``(tau, phi)`` of the same line, with ``phi`` in ``(0, pi)``."""
    r = math.hypot(1.0, line.p)
    return line.t / r, math.atan2(1.0, -line.p)


def same_line(a, b, atol=1e-9):
    """Whether two ``(tau, phi)`` pairs describe the same geometric line."""
    (t1, p1), (t2, p2) = a, b
    dphi = math.remainder(p1 - p2, TWO_PI)
    if abs(dphi) <= atol:
        return abs(t1 - t2) <= atol
    if abs(abs(dphi) - math.pi) <= atol:
        return abs(t1 + t2) <= atol
    return False


def admissible(q1, q2, t):
    """Strict admissibility of ``(q1, q2, t)`` for the unit box.

    Quadrant I (``q1, q2 > 0``) requires ``(t+1) q2 < q1`` for every ``t``
    and ``(1-t) q2 < q1`` for ``t < 1``.  Quadrant IV (``q1 > 0 > q2``)
    requires ``(t+1) q2 < q1`` when ``t < -1`` and ``(1-t) q2 < q1`` when
    ``0 < t < 1``; other intercepts have no admissible branch there.  In both
    quadrants the inactive inequality holds automatically, so the test is
    the pair of inequalities restricted to the covered ``t``-ranges.
    Quadrants II and III are handled by reflecting ``q1``.  Points on the
    axes are boundary points.  Accepts scalars or arrays.
    """
    q1, q2, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q1, q2, t)))
    if np.any((q1 == 0) & (q2 == 0)):
        raise InputError("q = (0, 0) carries no direction")
    a = np.abs(q1)
    covered = (q2 > 0) | ((q2 < 0) & ((t < -1) | ((t > 0) & (t < 1))))
    ok = covered & (a > 0) & ((t + 1) * q2 < a) & ((1 - t) * q2 < a)
    return bool(ok) if ok.ndim == 0 else ok


@dataclass(frozen=True)
class AngularDomain:
    """Union of open angular intervals (n=2) or open (phi, theta) bands (n=3).

    A 2D interval of length at least ``2 pi`` covers the whole circle and has
    no excluded endpoint.
    """

    intervals: tuple
    n: int = 2

    def __post_init__(self):
        if self.n == 2:
            items = tuple((float(a), float(b)) for a, b in self.intervals)
            for a, b in items:
                if not b > a:
                    raise InputError(f"empty angular interval ({a}, {b})")
        elif self.n == 3:
            items = tuple(
                ((float(pa), float(pb)), (float(ta), float(tb))) for (pa, pb), (ta, tb) in self.intervals
            )
            for (pa, pb), (ta, tb) in items:
                if not (pb > pa and tb > ta and ta >= 0 and tb <= math.pi):
                    raise InputError("invalid (phi, theta) band")
        else:
            raise InputError(f"unsupported dimension {self.n}")
        if not items:
            raise InputError("angular domain needs at least one interval")
        object.__setattr__(self, "intervals", items)
        if self.n == 2:
            self._check_disjoint()

    def _check_disjoint(self):
        for i, (a1, b1) in enumerate(self.intervals):
            for a2, b2 in self.intervals[i + 1:]:
                if b1 - a1 >= TWO_PI or b2 - a2 >= TWO_PI:
                    raise InputError("a full-circle interval cannot be combined with others")
                if _open_contains(a1, b1, a2) or _open_contains(a2, b2, a1):
                    raise InputError("angular intervals overlap")

    @classmethod
    def full(cls, n=2):
        if n == 2:
            return cls(((0.0, TWO_PI),))
        return cls((((0.0, TWO_PI), (0.0, math.pi)),), n=3)

    @classmethod
    def half_range(cls):
        """The open interval (-pi/2, pi/2)."""
        return cls(((-math.pi / 2, math.pi / 2),))

    @property
    def is_full(self):
        if self.n == 2:
            return any(b - a >= TWO_PI for a, b in self.intervals)
        return any(
            pb - pa >= TWO_PI and ta <= 0 and tb >= math.pi for (pa, pb), (ta, tb) in self.intervals
        )

    @property
    def measure(self):
        if self.n == 2:
            return float(sum(min(b - a, TWO_PI) for a, b in self.intervals))
        return float(
            sum(min(pb - pa, TWO_PI) * (math.cos(ta) - math.cos(tb)) for (pa, pb), (ta, tb) in self.intervals)
        )

    def membership(self, angles):
        """Index of the containing interval for every angle, -1 if outside."""
        angles = np.asarray(angles, dtype=float)
        which = np.full(angles.shape[:1] if self.n == 3 else angles.shape, -1)
        for i, item in enumerate(self.intervals):
            if self.n == 2:
                a, b = item
                inside = _open_contains(a, b, angles)
            else:
                (pa, pb), (ta, tb) = item
                inside = _open_contains(pa, pb, angles[:, 0])
                if tb - ta < math.pi:
                    inside &= (angles[:, 1] > ta + _EDGE_TOL) & (angles[:, 1] < tb - _EDGE_TOL)
            which = np.where((which < 0) & inside, i, which)
        return which

    def contains(self, angles):
        return self.membership(angles) >= 0


def _open_contains(a, b, phi):
    length = b - a
    if length >= TWO_PI:
        return np.ones(np.shape(phi), dtype=bool)
    off = np.mod(np.asarray(phi, dtype=float) - a, TWO_PI)
    return (off > _EDGE_TOL) & (off < length - _EDGE_TOL)


def angular_mask(support):
    """Open angular interval induced by a box support: ``(-pi/2, pi/2)``."""
    if support.kind != "box":
        raise CapabilityError(f"angular masks are derived for box supports only, got {support.kind!r}")
    if not is_canonical_box(support):
        log.info("non-canonical box %s: interval generalised by scaling symmetry", support.box)
    return AngularDomain.half_range()


def is_canonical_box(support):
    return support.kind == "box" and all(b == (-1.0, 1.0) for b in support.box)


def mask_sinogram(s, domain):
    """Keep grid directions strictly inside ``domain`` and reweight them.

    Surviving directions keep their rectangle weights.  In 2D the cells of
    the excluded endpoints are handed to the nearest surviving direction at
    each end, so every interval carries exactly its measure and the rule
    matches the trapezoid rule to third order; for 3D bands the weights are
    rescaled to the band measure.  The full domain returns ``s`` unchanged.
    """
    if domain.n != s.n:
        raise InputError("domain dimension differs from sinogram dimension")
    if domain.is_full:
        return s
    angles = s.angular.angles
    which = domain.membership(angles)
    keep = np.flatnonzero(which >= 0)
    if keep.size == 0:
        raise InputError("angular domain contains no grid direction")
    weights = s.angular.weights[keep].copy()
    for i, item in enumerate(domain.intervals):
        sel = np.flatnonzero(which[keep] == i)
        if sel.size == 0:
            continue
        if domain.n == 2:
            a, b = item
            deficit = (b - a) - weights[sel].sum()
            off = np.mod(angles[keep[sel]] - a, TWO_PI)
            lo, hi = sel[np.argmin(off)], sel[np.argmax(off)]
            if lo == hi:
                weights[lo] += deficit
            else:
                weights[lo] += deficit / 2
                weights[hi] += deficit / 2
        else:
            (pa, pb), (ta, tb) = item
            measure = min(pb - pa, TWO_PI) * (math.cos(ta) - math.cos(tb))
            weights[sel] *= measure / weights[sel].sum()
    log.info("angular mask keeps %d of %d directions", keep.size, s.angular.size)
    return s.with_values(s.values[keep], angular=s.angular.subset(keep, weights))


def slope_radon_value(s, line):
    """Slope-form Radon value ``R(tau, phi) / |sin phi|`` of ``line``."""
    if s.n != 2:
        raise InputError("slope form is two-dimensional")
    tau, phi = from_slope(line)
    for t, p in ((tau, phi), (-tau, phi + math.pi)):
        value = _read_line(s, t, p)
        if value is not None:
            return value / abs(math.sin(phi))
    raise InputError(f"line (tau={tau:.6g}, phi={phi:.6g}) is outside the sinogram grids")


def _read_line(s, tau, phi):
    if not (s.radial.tau_min <= tau <= s.radial.tau_max):
        return None
    angles = s.angular.angles
    order = np.argsort(angles)
    srt = angles[order]
    gaps = np.diff(np.concatenate([srt, [srt[0] + TWO_PI]]))
    step = float(np.median(gaps))
    phi = phi % TWO_PI
    off = np.mod(phi - srt, TWO_PI)
    j = int(np.argmin(off))
    if off[j] <= 1e-9:
        return float(s.sample(np.array([tau]), rows=np.array([order[j]]))[0])
    if gaps[j] > 1.5 * step:
        return None
    k = (j + 1) % len(srt)
    f = off[j] / gaps[j]
    r = np.array([order[j], order[k]])
    v = s.sample(np.array([tau, tau]), rows=r)
    return float((1 - f) * v[0] + f * v[1])
