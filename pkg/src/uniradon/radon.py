"""Direct Radon transform on radial x angular grids.

Conventions used throughout the package:

* In 2D the direction of angle ``phi`` is ``(cos phi, sin phi)``; in 3D the
  direction of ``(phi, theta)`` is ``(sin t cos p, sin t sin p, cos t)``.
* A sinogram row holds ``R(tau_j, direction_k)`` for all radial samples.
* Reads between radial samples use linear interpolation of the row
  extended by zeros on both sides, so anything beyond the window reads 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import ndimage

from .errors import CapabilityError, InputError
from .phantoms import PhantomSpec, Raster, analytic_radon, evaluate

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class RadialGrid:
    tau_min: float
    tau_max: float
    count: int

    def __post_init__(self):
        if int(self.count) < 3:
            raise InputError(f"radial grid needs at least 3 samples, got {self.count}")
        if not self.tau_max > self.tau_min:
            raise InputError("radial grid needs tau_max > tau_min")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "tau_min", float(self.tau_min))
        object.__setattr__(self, "tau_max", float(self.tau_max))

    @classmethod
    def symmetric(cls, half_width, count):
        return cls(-half_width, half_width, count)

    @property
    def spacing(self):
        return (self.tau_max - self.tau_min) / (self.count - 1)

    @property
    def is_symmetric(self):
        return abs(self.tau_min + self.tau_max) <= 1e-12 * self.tau_max

    @property
    def samples(self):
        if self.is_symmetric:
            # built from the centre so that samples[::-1] == -samples bitwise
            return (np.arange(self.count) - (self.count - 1) / 2) * self.spacing
        return self.tau_min + np.arange(self.count) * self.spacing

    def trapezoid_weights(self):
        w = np.full(self.count, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        return w


@dataclass(frozen=True)
class AngularGrid:
    """Directions with quadrature weights.

    ``angles`` has shape ``(K,)`` for n=2 and ``(K, 2)`` holding
    ``(phi, theta)`` for n=3; 3D weights already include ``sin theta``.
    """

    n: int
    angles: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        angles = np.array(self.angles, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if self.n == 2:
            if angles.ndim != 1:
                raise InputError("2D angular grid takes a flat list of angles")
            angles = np.mod(angles, TWO_PI)
        elif self.n == 3:
            if angles.ndim != 2 or angles.shape[1] != 2:
                raise InputError("3D angular grid takes (phi, theta) pairs")
            angles[:, 0] = np.mod(angles[:, 0], TWO_PI)
            if np.any((angles[:, 1] < 0) | (angles[:, 1] > math.pi)):
                raise InputError("theta must lie in [0, pi]")
        else:
            raise InputError(f"unsupported dimension {self.n}")
        if weights.shape != (len(angles),):
            raise InputError("one weight per direction is required")
        if len(angles) == 0:
            raise InputError("angular grid is empty")
        if np.any(weights <= 0):
            raise InputError("quadrature weights must be positive")
        angles.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def full_circle(cls, count):
        """``count`` equispaced angles on [0, 2 pi) with equal weights."""
        return cls(2, TWO_PI * np.arange(count) / count, np.full(count, TWO_PI / count))

    @classmethod
    def full_sphere(cls, n_phi, n_theta):
        """Equispaced phi times Gauss-Legendre nodes in cos(theta)."""
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x[::-1])
        wt = wx[::-1]
        phi = TWO_PI * np.arange(n_phi) / n_phi
        P, T = np.meshgrid(phi, theta, indexing="ij")
        W = np.outer(np.full(n_phi, TWO_PI / n_phi), wt)
        return cls(3, np.stack([P.ravel(), T.ravel()], axis=1), W.ravel())

    @property
    def size(self):
        return len(self.weights)

    @property
    def directions(self):
        """Unit vectors; antipodal pairs in the grid are exact negations."""
        if self.n == 2:
            dirs = np.stack([np.cos(self.angles), np.sin(self.angles)], axis=1)
        else:
            p, t = self.angles[:, 0], self.angles[:, 1]
            dirs = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=1)
        return _snap_antipodes(dirs)

    def subset(self, index, weights=None):
        index = np.asarray(index)
        w = self.weights[index] if weights is None else weights
        return AngularGrid(self.n, self.angles[index], w)


def _snap_antipodes(dirs):
    # rounding makes cos(phi + pi) differ from -cos(phi) by an ulp, which
    # the square-root edge of a chord amplifies; pair directions explicitly
    keys = {tuple(k): i for i, k in enumerate(np.round(dirs * 1e9).astype(np.int64))}
    out = dirs.copy()
    done = np.zeros(len(dirs), dtype=bool)
    for i, k in enumerate(np.round(dirs * 1e9).astype(np.int64)):
        j = keys.get(tuple(-k))
        if j is not None and not done[i] and not done[j] and j != i:
            out[j] = -out[i]
            done[i] = done[j] = True
    return out


@dataclass(frozen=True)
class Sinogram:
    """Sampled Radon image, rows indexed by direction, columns by tau."""

    n: int
    radial: RadialGrid
    angular: AngularGrid
    values: np.ndarray = field(repr=False)
    provenance: str = "analytic"
    support_radius: float = math.inf

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if self.angular.n != self.n:
            raise InputError("angular grid dimension differs from sinogram dimension")
        if values.shape != (self.angular.size, self.radial.count):
            raise InputError(
                f"values shape {values.shape} does not match grids "
                f"({self.angular.size}, {self.radial.count})"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("sinogram values must be finite")
        r = self.support_radius
        if r < -self.radial.tau_min and np.any(values[:, 0] != 0):
            raise InputError("boundary exclusion violated: nonzero samples at tau_min")
        if r < self.radial.tau_max and np.any(values[:, -1] != 0):
            raise InputError("boundary exclusion violated: nonzero samples at tau_max")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_values(self, values, **changes):
        kw = dict(
            n=self.n,
            radial=self.radial,
            angular=self.angular,
            values=values,
            provenance=self.provenance,
            support_radius=self.support_radius,
        )
        kw.update(changes)
        return Sinogram(**kw)

    def sample(self, tau, rows=None):
        """Interpolated reads; by default the last axis of ``tau`` runs over rows."""
        return interp_rows(self.values, self.radial, tau, rows)


def interp_rows(values, radial, tau, rows=None):
    """Linear interpolation of zero-extended sinogram rows.

    ``rows`` is an integer array broadcastable against ``tau`` selecting the
    row for every read; the default pairs the last axis of ``tau`` with the
    rows of ``values``.
    """
    tau = np.asarray(tau, dtype=float)
    n_rows, count = values.shape
    rows = np.arange(n_rows) if rows is None else np.asarray(rows)
    padded = np.zeros((n_rows, count + 2))
    padded[:, 1:-1] = values
    idx = np.clip((tau - radial.tau_min) / radial.spacing + 1.0, 0.0, count + 1.0)
    i0 = np.minimum(np.floor(idx).astype(np.intp), count)
    frac = idx - i0
    return padded[rows, i0] * (1.0 - frac) + padded[rows, i0 + 1] * frac


def _map_ordered(func, items, threads):
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def direct_radon_numeric(source, radial, angular, step, threads=1):
    """Line integrals by composite midpoint quadrature along each line.

    ``source`` is a :class:`PhantomSpec` (exact point evaluation) or a
    :class:`Raster` (bilinear interpolation, zero outside).
    """
    if angular.n != 2:
        raise CapabilityError("numeric line integration is implemented for n=2 only")
    if step <= 0:
        raise InputError("step must be positive")
    if isinstance(source, PhantomSpec):
        if source.n != 2:
            raise InputError("numeric Radon transform needs a 2D phantom")
        rho = source.support_radius

        def f(points):
            return evaluate(source, points)

    elif isinstance(source, Raster):
        grid = source.grid
        if grid.n != 2:
            raise InputError("numeric Radon transform needs a 2D raster")
        spacing = [
            (grid.hi[i] - grid.lo[i]) / (grid.shape[i] - 1) if grid.shape[i] > 1 else 1.0
            for i in range(2)
        ]
        rho = math.hypot(
            max(abs(grid.lo[0]), abs(grid.hi[0])) + spacing[0],
            max(abs(grid.lo[1]), abs(grid.hi[1])) + spacing[1],
        )
        values = np.asarray(source.values)

        def f(points):
            coords = [
                (points[..., 1] - grid.lo[1]) / spacing[1],
                (points[..., 0] - grid.lo[0]) / spacing[0],
            ]
            flat = [c.ravel() for c in coords]
            out = ndimage.map_coordinates(values, flat, order=1, mode="constant", cval=0.0)
            return out.reshape(points.shape[:-1])

    else:
        raise InputError("source must be a PhantomSpec or a Raster")
    if rho > 0 and step > 2 * rho:
        raise InputError(f"step {step} exceeds the support diameter {2 * rho}")
    taus = radial.samples
    if rho == 0:
        values = np.zeros((angular.size, radial.count))
        return Sinogram(2, radial, angular, values, "numeric", 0.0)
    n_s = max(1, math.ceil(2 * rho / step))
    h = 2 * rho / n_s
    s = -rho + (np.arange(n_s) + 0.5) * h
    hit = np.abs(taus) < rho
    dirs = angular.directions

    def row(k):
        c, si = dirs[k]
        out = np.zeros(radial.count)
        t = taus[hit][:, None]
        pts = np.stack([t * c - s * si, t * si + s * c], axis=-1)
        out[hit] = f(pts).sum(axis=1) * h
        return out

    rows = _map_ordered(row, range(angular.size), threads)
    return Sinogram(2, radial, angular, np.array(rows), "numeric", rho)


def direct_radon_analytic(spec, radial, angular):
    if angular.n != spec.n:
        raise InputError("angular grid dimension differs from phantom dimension")
    taus = radial.samples
    rows = [analytic_radon(spec, taus, d) for d in angular.directions]
    return Sinogram(spec.n, radial, angular, np.array(rows), "analytic", spec.support_radius)


def antipodal_partner(angular, atol=1e-9):
    """Index of the grid angle ``phi + pi`` for every angle (2D)."""
    if angular.n != 2:
        raise InputError("antipodal pairing is defined here for n=2")
    target = np.mod(angular.angles + math.pi, TWO_PI)
    diff = np.abs(target[:, None] - angular.angles[None, :])
    diff = np.minimum(diff, TWO_PI - diff)
    partner = np.argmin(diff, axis=1)
    if np.any(diff[np.arange(len(partner)), partner] > atol):
        raise InputError("angular grid is not antipodally closed")
    return partner


def antipodal_check(s):
    """Largest ``|R(tau, phi) - R(-tau, phi + pi)|`` over the grid."""
    if s.n != 2:
        raise InputError("antipodal_check needs a 2D sinogram")
    if not s.radial.is_symmetric:
        raise InputError("antipodal_check needs a symmetric radial grid")
    partner = antipodal_partner(s.angular)
    mirrored = s.values[partner, ::-1]
    return float(np.max(np.abs(s.values - mirrored)))


def radial_derivative(s, order):
    """Central differences in tau; second-order one-sided stencils at the ends."""
    if order not in (1, 2):
        raise CapabilityError(f"radial derivative of order {order} is not supported")
    if s.radial.count < 2 * order + 1:
        raise InputError("too few radial samples for this derivative order")
    v = s.values
    h = s.radial.spacing
    out = np.empty_like(v)
    if order == 1:
        out[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
        out[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * h)
        out[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * h)
    else:
        out[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / (h * h)
        out[:, 0] = (2 * v[:, 0] - 5 * v[:, 1] + 4 * v[:, 2] - v[:, 3]) / (h * h)
        out[:, -1] = (2 * v[:, -1] - 5 * v[:, -2] + 4 * v[:, -3] - v[:, -4]) / (h * h)
    return s.with_values(out, support_radius=s.support_radius + 3 * h)


def angular_average(s, x, eta):
    """Weighted sum over directions of ``R(eta + <n_k, x>, n_k)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (s.n,):
        raise InputError(f"x must be a {s.n}-vector")
    shifts = eta + s.angular.directions @ x
    return float(np.sum(s.angular.weights * s.sample(shifts)))


@dataclass(frozen=True)
class SurfaceTermResult:
    residual: float
    boundary_magnitude: float


def surface_term_check(s, weight):
    """Integration-by-parts balance of ``w * dR/dtau`` row by row.

    ``weight`` holds polynomial coefficients in increasing degree.  The
    residual is ``max |int w R' + int w' R - [w R]|`` with trapezoid
    quadrature; ``boundary_magnitude`` is ``max |[w R]|`` at the window ends.
    """
    coef = np.atleast_1d(np.asarray(weight, dtype=float))
    if len(coef) > 5:
        raise InputError("weight polynomial degree must be at most 4")
    w = Polynomial(coef)
    taus = s.radial.samples
    trap = s.radial.trapezoid_weights()
    dR = radial_derivative(s, 1).values
    wv, dwv = w(taus), w.deriv()(taus)
    lhs = (dR * wv) @ trap + (s.values * dwv) @ trap
    ends = s.values[:, -1] * wv[-1] - s.values[:, 0] * wv[0]
    residual = float(np.max(np.abs(lhs - ends)))
    edge = np.maximum(np.abs(s.values[:, -1] * wv[-1]), np.abs(s.values[:, 0] * wv[0]))
    return SurfaceTermResult(residual, float(np.max(edge)))
