"""Universal inverse Radon transform ``f = f_S + f_A``.

With the forward conventions of :mod:`uniradon.slice_theorem` the inverse
carries ``c_n = (2 pi)^-n`` and, for every direction ``n_k`` and target
``x``, reads ``g(eta) = R(eta + <n_k, x>, n_k)``:

* ``f_S = c_n i^(n-2) (-1)^(n-1) (n-1)! sum_k w_k FP int g(eta) / eta^n``
* ``f_A = c_n (-1)^(n-1) i^(n-1) pi sum_k w_k g^(n-1)(0)``

``FP`` is the Hadamard finite part over ``[-H, H]``.  In ``exact_limit``
mode it is evaluated by Taylor subtraction on an eta grid offset by half a
radial sample; in ``epsilon_kernel`` mode ``1/eta^n`` is replaced by the
real part of the regularised kernel and the result is optionally
Richardson-extrapolated in epsilon.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .angular_support import AngularDomain, mask_sinogram
from .errors import CapabilityError, InputError
from .phantoms import RasterGrid
from .radon import antipodal_partner, radial_derivative

log = logging.getLogger(__name__)

MODES = ("exact_limit", "epsilon_kernel")
TERMS = ("fS", "fA")
CHUNK = 64


def normalization(n):
    return (2 * math.pi) ** (-n)


@dataclass(frozen=True)
class KernelSpec:
    """How the lambda-integral limit is taken.

    ``epsilon`` and ``window`` (the half-width ``H``) default to ``4 * dtau``
    and ``tau_max`` of the sinogram in use.  ``extrapolation`` is a pair of
    epsilons for a Richardson step; ``"default"`` means ``(4 dtau, 2 dtau)``.
    """

    n: int = 2
    mode: str = "exact_limit"
    epsilon: float | None = None
    window: float | None = None
    extrapolation: object = None

    def __post_init__(self):
        if self.n < 2:
            raise InputError("dimension must be at least 2")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.window is not None and not self.window > 0:
            raise InputError("window must be positive")

    def resolve(self, s):
        """Concrete ``(H, epsilons)`` for sinogram ``s``; epsilons empty in exact mode."""
        tau_max = min(-s.radial.tau_min, s.radial.tau_max)
        H = tau_max if self.window is None else self.window
        if H > tau_max + 1e-12:
            raise InputError(f"window half-width {H} exceeds the radial window {tau_max}")
        d = s.radial.spacing
        if self.mode == "exact_limit":
            return H, ()
        if self.extrapolation is None:
            eps = (4 * d if self.epsilon is None else self.epsilon,)
        elif self.extrapolation == "default":
            eps = (4 * d, 2 * d)
        else:
            eps = tuple(float(e) for e in self.extrapolation)
            if len(eps) != 2 or eps[0] == eps[1] or min(eps) <= 0:
                raise InputError("extrapolation needs two distinct positive epsilons")
        for e in eps:
            if not e < H / 10:
                raise InputError(f"epsilon {e} must be below H/10 = {H / 10}")
        return H, eps


def regularized_lambda_kernel(spec, eta):
    """``i^(2-n) (n-1)! / (eps + i eta)^n`` for epsilon-kernel specs."""
    if spec.mode != "epsilon_kernel":
        raise CapabilityError("the exact limit has no pointwise kernel; use f_S/f_A")
    if spec.epsilon is None:
        raise InputError("kernel evaluation needs an explicit epsilon")
    n = spec.n
    eta = np.asarray(eta, dtype=float)
    value = (1j ** (2 - n)) * math.factorial(n - 1) / (spec.epsilon + 1j * eta) ** n
    return value if value.ndim else complex(value)


@dataclass(frozen=True)
class ReconstructionField:
    points: np.ndarray = field(repr=False)
    fS: np.ndarray = field(repr=False)
    fA: np.ndarray = field(repr=False)
    terms: tuple
    kernel: KernelSpec
    domain: AngularDomain
    c_n: float
    grid: RasterGrid | None = None
    total: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        fS = np.asarray(self.fS, dtype=complex)
        fA = np.asarray(self.fA, dtype=complex)
        pts = np.asarray(self.points, dtype=float)
        if not (fS.shape == fA.shape == pts.shape[:1]):
            raise InputError("field arrays have inconsistent shapes")
        if self.grid is not None and self.grid.shape and int(np.prod(self.grid.shape)) != len(pts):
            raise InputError("grid size differs from the number of points")
        if self.c_n != normalization(self.kernel.n):
            raise InputError("normalisation constant must be (2 pi)^-n")
        total = fS + fA
        if not np.array_equal(total, fS + fA):
            raise InputError("total is not the sum of its addends")
        for name, arr in (("points", pts), ("fS", fS), ("fA", fA), ("total", total)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def as_raster(self, values):
        if self.grid is None:
            raise InputError("field was evaluated on points, not on a raster")
        return np.asarray(values).reshape(self.grid.array_shape)


class _Backprojector:
    """Tables shared by every target for one (sinogram, kernel) pair."""

    def __init__(self, s, kernel, terms):
        self.s = s
        self.n = s.n
        self.kernel = kernel
        self.terms = terms
        self.H, self.eps = kernel.resolve(s)
        d = s.radial.spacing
        self.d = d
        self.M = max(1, int(round(self.H / d)))
        self.H_eff = self.M * d
        K, N = s.values.shape
        # the regular tail |eta| > H is integrated as an ordinary integral up
        # to the furthest read, so the result does not depend on H
        self.L = N + 2
        self.pad = self.L + 4
        self.V = np.zeros((K, N + 2 * self.pad))
        self.V[:, self.pad:self.pad + N] = s.values
        self.rows = np.arange(K)
        self.weights = s.angular.weights
        self.dirs = s.angular.directions
        pref = normalization(self.n)
        self.cS = pref * (1j ** (self.n - 2))
        self.cA = pref * (-1) ** (self.n - 1) * (1j ** (self.n - 1)) * math.pi
        if "fS" in terms:
            self._build_fs_tables()
        self.D = None
        if "fA" in terms or (kernel.mode == "exact_limit" and self.n == 3 and "fS" in terms):
            self.D = {}
        if self.D is not None:
            needed = {self.n - 1} if "fA" in terms else set()
            if kernel.mode == "exact_limit" and self.n == 3 and "fS" in terms:
                needed.add(1)
            for order in needed:
                Dv = radial_derivative(s, order).values
                padded = np.zeros_like(self.V)
                padded[:, self.pad:self.pad + N] = Dv
                self.D[order] = padded

    # -- tables -----------------------------------------------------------
    def _phase_tables(self, m, cplus, cminus):
        tables = []
        for r in range(m):
            cp, cm = cplus[r::m], cminus[r::m]
            A = np.array([np.convolve(row, cp[::-1])[len(cp) - 1:] for row in self.V])
            B = np.array([np.convolve(row, cm)[: self.V.shape[1]] for row in self.V])
            tables.append(((r + 0.5) / m, A, B))
        return tables

    def _build_fs_tables(self):
        n, d, M = self.n, self.d, self.M
        if self.kernel.mode == "exact_limit":
            if n not in (2, 3):
                raise CapabilityError("exact-limit finite parts are implemented for n = 2 and 3")
            eta = (np.arange(self.L) + 0.5) * d
            c = d / eta**n
            sign = 1.0 if n == 2 else -1.0
            const = float(np.sum(d / eta[:M] ** 2) + 1.0 / self.H_eff)
            self.exact = (self._phase_tables(1, c, sign * c), const)
            self.scale = (-1) ** (n - 1) * math.factorial(n - 1)
            return
        self.eps_tables = []
        for e in self.eps:
            m = max(1, math.ceil(4 * d / e))
            h = d / m
            eta = (np.arange(self.L * m) + 0.5) * h
            kp = (1j ** (2 - n)) * math.factorial(n - 1) / (e + 1j * eta) ** n
            km = (1j ** (2 - n)) * math.factorial(n - 1) / (e - 1j * eta) ** n
            self.eps_tables.append((e, self._phase_tables(m, h * kp.real, h * km.real)))

    # -- evaluation -------------------------------------------------------
    def _read(self, table, b):
        i0 = np.floor(b).astype(np.intp)
        f = b - i0
        return (1 - f) * table[self.rows, i0] + f * table[self.rows, i0 + 1]

    def _cubic(self, table, b):
        # four-point Lagrange read at fractional index b
        i0 = np.floor(b).astype(np.intp)
        f = b - i0
        w = (
            -f * (f - 1) * (f - 2) / 6,
            (f + 1) * (f - 1) * (f - 2) / 2,
            -(f + 1) * f * (f - 2) / 2,
            (f + 1) * f * (f - 1) / 6,
        )
        return sum(wk * table[self.rows, i0 + k - 1] for k, wk in enumerate(w))

    def _window_sum(self, tables, b):
        total = 0.0
        for off, A, B in tables:
            total = total + self._cubic(A, b + off) + self._cubic(B, b - off)
        return total

    def chunk(self, points):
        a = points @ self.dirs.T
        b = (a - self.s.radial.tau_min) / self.d + self.pad
        fS = np.zeros(len(points), dtype=complex)
        fA = np.zeros(len(points), dtype=complex)
        if "fS" in self.terms:
            if self.kernel.mode == "exact_limit":
                tables, const = self.exact
                S = self._window_sum(tables, b)
                if self.n == 2:
                    S = S - 2 * self._cubic(self.V, b) * const
                else:
                    S = S - 2 * self._cubic(self.D[1], b) * const
                fS = self.cS * self.scale * (S @ self.weights)
            else:
                sums = [(e, self._window_sum(t, b) @ self.weights) for e, t in self.eps_tables]
                if len(sums) == 1:
                    value = sums[0][1]
                else:
                    (e1, s1), (e2, s2) = sums
                    value = (e1 * s2 - e2 * s1) / (e1 - e2)
                fS = self.cS * value
        if "fA" in self.terms:
            fA = self.cA * (self._read(self.D[self.n - 1], b) @ self.weights)
        return fS, fA


def _target_points(targets, n):
    if isinstance(targets, RasterGrid):
        if targets.n != n:
            raise InputError("raster dimension differs from sinogram dimension")
        return targets.points(), targets
    pts = np.atleast_2d(np.asarray(targets, dtype=float))
    if pts.shape[-1] != n:
        raise InputError(f"targets must be {n}-vectors")
    return pts, None


def _check_targets(s, pts):
    limit = min(-s.radial.tau_min, s.radial.tau_max)
    norms = np.linalg.norm(pts, axis=1)
    bad = np.flatnonzero(norms > limit + 1e-12)
    if bad.size:
        shown = ", ".join(str(tuple(np.round(pts[i], 6))) for i in bad[:5])
        raise InputError(
            f"{bad.size} target(s) outside the reconstruction circle |x| <= {limit}: {shown}"
        )
    if s.support_radius > limit:
        log.warning(
            "support radius %.3g exceeds the window %.3g; reads beyond the window are taken as zero",
            s.support_radius,
            limit,
        )


def reconstruct(s, targets, domain=None, kernel=None, terms=TERMS, threads=1):
    """Evaluate the requested addends at every target.

    Targets are processed in fixed chunks of ``CHUNK`` points; threads only
    distribute chunks, so results do not depend on ``threads``.
    """
    terms = tuple(t for t in TERMS if t in set(terms))
    if not terms:
        raise InputError("request at least one of fS, fA")
    domain = AngularDomain.full(s.n) if domain is None else domain
    kernel = KernelSpec(n=s.n) if kernel is None else kernel
    if kernel.n != s.n:
        raise InputError("kernel dimension differs from sinogram dimension")
    if s.n not in (2, 3):
        raise CapabilityError("reconstruction pipelines exist for n = 2 and 3")
    pts, grid = _target_points(targets, s.n)
    _check_targets(s, pts)
    restricted = mask_sinogram(s, domain)
    engine = _Backprojector(restricted, kernel, terms)
    starts = range(0, len(pts), CHUNK)

    def run(start):
        return engine.chunk(pts[start:start + CHUNK])

    if threads and threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(i) for i in starts]
    fS = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, complex)
    fA = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, complex)
    return ReconstructionField(pts, fS, fA, terms, kernel, domain, normalization(s.n), grid)


def f_S_at(s, x, domain=None, kernel=None):
    return complex(reconstruct(s, [x], domain, kernel, terms=("fS",)).fS[0])


def f_A_at(s, x, domain=None):
    return complex(reconstruct(s, [x], domain, terms=("fA",)).fA[0])


def fa_pair_sums(s, x):
    """Per-pair sums of the ``f_A`` summands at ``phi`` and ``phi + pi`` (2D).

    Returns an array with one entry per antipodal pair; each entry is the
    sum of the two weighted derivative reads, before the common prefactor.
    """
    if s.n != 2:
        raise InputError("antipodal pairing is two-dimensional")
    partner = antipodal_partner(s.angular)
    D = radial_derivative(s, 1)
    x = np.asarray(x, dtype=float)
    reads = D.sample(s.angular.directions @ x) * s.angular.weights
    first = np.flatnonzero(np.arange(len(partner)) < partner)
    return reads[first] + reads[partner[first]]


@dataclass(frozen=True)
class DecompositionReport:
    rel_l2_real: float
    rel_l2_imag: float
    fa_over_fs: float
    max_abs_error: float
    max_abs_fs: float
    max_abs_fa: float
    normalized: bool = True

    def as_dict(self):
        return {
            "rel_l2_real": self.rel_l2_real,
            "rel_l2_imag": self.rel_l2_imag,
            "fa_over_fs": self.fa_over_fs,
            "max_abs_error": self.max_abs_error,
            "max_abs_fs": self.max_abs_fs,
            "max_abs_fa": self.max_abs_fa,
            "normalized": self.normalized,
        }


def decomposition_report(field, reference):
    """Error and addend-balance metrics of ``field`` against ``reference``."""
    ref = np.asarray(reference, dtype=float).ravel()
    if ref.shape != field.total.shape:
        raise InputError(f"reference has {ref.size} values, field has {field.total.size}")
    err = field.total.real - ref
    ref_norm = float(np.linalg.norm(ref))
    denom = ref_norm if ref_norm > 0 else 1.0
    fs_norm = float(np.linalg.norm(field.fS))
    fa_norm = float(np.linalg.norm(field.fA))
    return DecompositionReport(
        rel_l2_real=float(np.linalg.norm(err)) / denom,
        rel_l2_imag=float(np.linalg.norm(field.total.imag)) / denom,
        fa_over_fs=fa_norm / fs_norm if fs_norm > 0 else (0.0 if fa_norm == 0 else math.inf),
        max_abs_error=float(np.max(np.abs(err), initial=0.0)),
        max_abs_fs=float(np.max(np.abs(field.fS), initial=0.0)),
        max_abs_fa=float(np.max(np.abs(field.fA), initial=0.0)),
        normalized=ref_norm > 0,
    )
