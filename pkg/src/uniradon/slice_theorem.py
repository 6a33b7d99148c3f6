"""Numerical check of the Fourier slice theorem.

Forward transforms carry no prefactor: ``F[f](q) = int exp(-i<q,x>) f(x) dx``
and a slice is ``int exp(-i lambda tau) R(tau, n) dtau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError
from .phantoms import PhantomSpec, evaluate

_QUADRANT_SECTORS = {"I": (0.0, 0.5), "II": (0.5, 1.0), "III": (1.0, 1.5), "IV": (1.5, 2.0)}


@dataclass(frozen=True)
class SliceSpectrum:
    direction: np.ndarray
    lambdas: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if not np.allclose(np.sort(lam), np.sort(-lam), rtol=0, atol=1e-12):
            raise InputError("lambda samples must be symmetric about 0")
        if not np.all(np.isfinite(self.values)):
            raise InputError("slice values must be finite")


def fourier_slice(s, angle_index, lambdas):
    """Trapezoid-rule Fourier transform of one sinogram row."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(np.abs(lam) * s.radial.spacing > 1.0):
        raise InputError(
            f"|lambda| * dtau must not exceed 1 (dtau={s.radial.spacing:.4g}, max |lambda|={np.max(np.abs(lam)):.4g})"
        )
    taus = s.radial.samples
    kernel = np.exp(-1j * np.outer(lam, taus)) * s.radial.trapezoid_weights()
    values = kernel @ s.values[angle_index]
    return SliceSpectrum(s.angular.directions[angle_index], lam, values)


def fourier_direct(spec, q, rtol=1e-6, max_refinements=4):
    """``F[f](q)`` by midpoint quadrature, refined until it settles.

    Each primitive is integrated in its natural coordinates: polar or
    spherical about its centre (quadrant masks cornered at that centre
    become angular sectors), affine-polar for ellipses and Cartesian over
    the clipped box otherwise.  A refinement is accepted when it changes
    the primitive's contribution by less than ``rtol`` times that
    primitive's L1 norm.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (spec.n,):
        raise InputError(f"q must be a {spec.n}-vector")
    total = 0j
    for i in range(len(spec.primitives)):
        total += _primitive_transform(spec, i, q, rtol, max_refinements)
    return complex(total)


def _primitive_transform(spec, index, q, rtol, max_refinements):
    prim, _ = spec.primitives[index]
    quad = _quadrature(spec, index, q)
    history = []
    for level in range(max_refinements + 1):
        value, l1 = quad(level)
        if l1 == 0.0:
            return 0j
        history.append(value)
        if level and abs(value - history[-2]) <= rtol * l1:
            return value
    diffs = [abs(b - a) for a, b in zip(history, history[1:])]
    raise NumericError(
        f"Fourier quadrature for primitive {index} ({prim.kind}) did not settle "
        f"after {max_refinements} refinements",
        {"primitive": index, "kind": prim.kind, "values": history, "diffs": diffs, "q": q.tolist()},
    )


def _quadrature(spec, index, q):
    """Return ``level -> (integral, L1 norm)`` for one masked primitive."""
    prim, _ = spec.primitives[index]
    masks = spec.masks_of(index)
    c = np.array(prim.center)
    A = prim.amplitude
    qn = float(np.linalg.norm(q))
    shift = np.exp(-1j * float(c @ q))

    def profile(rho):
        if prim.kind.startswith("gaussian"):
            return A * np.exp(-rho * rho / (2 * prim.size[0] ** 2))
        return np.full_like(rho, A)

    lo, hi = 0.0, 2.0
    radial = prim.kind in ("disc2d", "gaussian2d", "ball3d", "gaussian3d")
    for m in masks:
        if radial and prim.n == 2 and m.kind == "quadrant" and np.all(c == 0.0):
            a, b = _QUADRANT_SECTORS[m.quadrant]
            lo, hi = max(lo, a), min(hi, b)
        else:
            radial = False
    if prim.kind == "ellipse2d" and masks:
        return _cartesian(spec, index, q)

    if prim.kind in ("disc2d", "gaussian2d") and radial:
        if hi <= lo:
            return lambda level: (0j, 0.0)
        periodic = (lo, hi) == (0.0, 2.0)
        width = (hi - lo) * math.pi
        reach = prim.reach

        def polar(level):
            n_rho = 64 * math.ceil(reach) * 2**level
            n_th = _theta_count(qn * reach) if periodic else 64 * 2**level
            rho = (np.arange(n_rho) + 0.5) * reach / n_rho
            th = lo * math.pi + (np.arange(n_th) + 0.5) * width / n_th
            proj = np.cos(th) * q[0] + np.sin(th) * q[1]
            ring = np.exp(-1j * np.outer(rho, proj)).sum(axis=1)
            weight = profile(rho) * rho * (reach / n_rho) * (width / n_th)
            return complex(shift * np.sum(weight * ring)), float(np.sum(np.abs(weight)) * n_th)

        return polar

    if prim.kind == "ellipse2d":
        a, b = prim.size
        ca, sa = math.cos(prim.angle), math.sin(prim.angle)
        # q seen in the ellipse's unit-disc coordinates
        qa = a * (ca * q[0] + sa * q[1])
        qb = b * (-sa * q[0] + ca * q[1])

        def affine(level):
            n_rho = 64 * 2**level
            n_th = _theta_count(max(a, b) * qn)
            rho = (np.arange(n_rho) + 0.5) / n_rho
            th = (np.arange(n_th) + 0.5) * 2 * math.pi / n_th
            ring = np.exp(-1j * np.outer(rho, np.cos(th) * qa + np.sin(th) * qb)).sum(axis=1)
            weight = A * a * b * rho * (1.0 / n_rho) * (2 * math.pi / n_th)
            return complex(shift * np.sum(weight * ring)), float(np.sum(np.abs(weight)) * n_th)

        return affine

    if prim.kind in ("ball3d", "gaussian3d") and radial:
        reach = prim.reach

        def spherical(level):
            n_rho = 64 * math.ceil(reach) * 2**level
            n_ph = _theta_count(qn * reach)
            n_mu = 64 * 2**level
            rho = (np.arange(n_rho) + 0.5) * reach / n_rho
            mu = -1 + (np.arange(n_mu) + 0.5) * 2 / n_mu
            ph = (np.arange(n_ph) + 0.5) * 2 * math.pi / n_ph
            st = np.sqrt(1 - mu * mu)
            proj = (np.outer(st, np.cos(ph)) * q[0] + np.outer(st, np.sin(ph)) * q[1]
                    + mu[:, None] * q[2]).ravel()
            shell = np.exp(-1j * np.outer(rho, proj)).sum(axis=1)
            weight = profile(rho) * rho * rho * (reach / n_rho) * (2 / n_mu) * (2 * math.pi / n_ph)
            return complex(shift * np.sum(weight * shell)), float(np.sum(np.abs(weight)) * proj.size)

        return spherical

    return _cartesian(spec, index, q)


def _theta_count(z):
    # the periodic rule is spectrally accurate once the count exceeds ~2(z + 20)
    return int(max(64, 2 * math.ceil(z) + 48))


def _cartesian(spec, index, q):
    prim, mask = spec.primitives[index]
    sub = PhantomSpec(spec.n, ((prim, mask),), spec.global_mask)
    lo, hi = sub.bounds()
    if np.any(hi <= lo):
        return lambda level: (0j, 0.0)
    n = spec.n

    def cartesian(level):
        m = (128 if n == 2 else 32) * 2**level
        h = (hi - lo) / m
        axes = [lo[i] + (np.arange(m) + 0.5) * h[i] for i in range(n)]
        cell = float(np.prod(h))
        value, l1 = 0j, 0.0
        for start in range(0, m, 64):
            mesh = np.meshgrid(axes[0][start:start + 64], *axes[1:], indexing="ij")
            pts = np.stack(mesh, axis=-1)
            f = evaluate(sub, pts)
            value += complex(np.sum(f * np.exp(-1j * (pts @ q)))) * cell
            l1 += float(np.sum(np.abs(f))) * cell
        return value, l1

    return cartesian


def slice_residual(spec, s, directions, lambdas):
    """Relative L2 gap between sinogram slices and direct Fourier values.

    ``directions`` are angle indices into the sinogram's angular grid.
    """
    slices, direct = [], []
    for k in directions:
        spectrum = fourier_slice(s, k, lambdas)
        slices.append(spectrum.values)
        direct.append([fourier_direct(spec, lam * spectrum.direction) for lam in spectrum.lambdas])
    slices = np.concatenate(slices)
    direct = np.concatenate([np.asarray(d, dtype=complex) for d in direct])
    norm = float(np.linalg.norm(direct))
    diff = float(np.linalg.norm(slices - direct))
    if norm == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / norm


def slice_table(spec, s, directions, lambdas):
    """Rows ``(angle, lambda, |slice|, |direct|, |slice - direct|)`` for reports."""
    rows = []
    for k in directions:
        spectrum = fourier_slice(s, k, lambdas)
        angle = s.angular.angles[k]
        for lam, value in zip(spectrum.lambdas, spectrum.values):
            d = fourier_direct(spec, lam * spectrum.direction)
            rows.append((float(np.atleast_1d(angle)[0]), float(lam), abs(value), abs(d), abs(value - d)))
    return rows
