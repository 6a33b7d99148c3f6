"""Analytic phantoms with closed-form Radon images.

A phantom is an additive composition of primitives (discs, ellipses,
rectangles, gaussians, balls), each optionally restricted by a support
mask: an axis-aligned closed box or an open coordinate quadrant.

Rasters are sampled at cell centres.  A :class:`RasterGrid` is described by
the coordinates of its first and last cell centre along every axis; the
value array is stored row-major with ``x1`` varying fastest, i.e. a 2D
raster has shape ``(count_x2, count_x1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapabilityError, InputError

#: gaussian primitives are considered zero beyond this many standard deviations
GAUSS_CUT = 8.0

PRIMITIVE_KINDS = {
    "disc2d": 2,
    "ellipse2d": 2,
    "rectangle2d": 2,
    "gaussian2d": 2,
    "ball3d": 3,
    "gaussian3d": 3,
}

_QUADRANT_SIGNS = {"I": (1, 1), "II": (-1, 1), "III": (-1, -1), "IV": (1, -1)}


@dataclass(frozen=True)
class SupportMask:
    """Indicator restricting a primitive (or a whole phantom).

    ``kind="box"`` keeps the closed box ``box[i][0] <= x_i <= box[i][1]``;
    ``kind="quadrant"`` keeps the open quadrant, e.g. ``"I"`` is
    ``x1 > 0, x2 > 0``.
    """

    kind: str = "none"
    box: tuple = ()
    quadrant: str = ""

    def __post_init__(self):
        if self.kind not in ("none", "box", "quadrant"):
            raise InputError(f"unknown mask kind {self.kind!r}")
        if self.kind == "box":
            box = tuple((float(lo), float(hi)) for lo, hi in self.box)
            if not box:
                raise InputError("box mask needs at least one interval")
            for lo, hi in box:
                if not lo < hi:
                    raise InputError(f"empty box interval [{lo}, {hi}]")
            object.__setattr__(self, "box", box)
        if self.kind == "quadrant" and self.quadrant not in _QUADRANT_SIGNS:
            raise InputError(f"unknown quadrant {self.quadrant!r}")

    @classmethod
    def unit_box(cls, n=2):
        """The canonical box [-1, 1]^n."""
        return cls("box", tuple((-1.0, 1.0) for _ in range(n)))

    def check_dimension(self, n):
        if self.kind == "box" and len(self.box) != n:
            raise InputError(f"box mask has {len(self.box)} axes, phantom has {n}")
        if self.kind == "quadrant" and n != 2:
            raise InputError("quadrant masks are only defined in 2D")

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        if self.kind == "none":
            return np.ones(points.shape[:-1], dtype=bool)
        if self.kind == "box":
            inside = np.ones(points.shape[:-1], dtype=bool)
            for i, (lo, hi) in enumerate(self.box):
                inside &= (points[..., i] >= lo) & (points[..., i] <= hi)
            return inside
        s1, s2 = _QUADRANT_SIGNS[self.quadrant]
        return (s1 * points[..., 0] > 0) & (s2 * points[..., 1] > 0)

    def halfplanes(self):
        """Constraints ``<a, x> + b > 0`` (or ``>= 0``) describing the mask."""
        if self.kind == "box":
            planes = []
            for i, (lo, hi) in enumerate(self.box):
                e = np.zeros(len(self.box))
                e[i] = 1.0
                planes.append((e, -lo))
                planes.append((-e, hi))
            return planes
        if self.kind == "quadrant":
            s1, s2 = _QUADRANT_SIGNS[self.quadrant]
            return [(np.array([s1, 0.0]), 0.0), (np.array([0.0, s2]), 0.0)]
        return []

    def bounds(self, n):
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        if self.kind == "box":
            lo[:] = [b[0] for b in self.box]
            hi[:] = [b[1] for b in self.box]
        elif self.kind == "quadrant":
            for i, s in enumerate(_QUADRANT_SIGNS[self.quadrant]):
                if s > 0:
                    lo[i] = 0.0
                else:
                    hi[i] = 0.0
        return lo, hi


NO_MASK = SupportMask()


@dataclass(frozen=True)
class Primitive:
    """One analytic building block.

    ``size`` holds the shape parameters: ``(radius,)`` for discs and balls,
    ``(sigma,)`` for gaussians, ``(a, b)`` semi-axes for ellipses (rotated
    by ``angle``) and ``(hx, hy)`` half-widths for axis-aligned rectangles.
    """

    kind: str
    center: tuple
    size: tuple
    amplitude: float = 1.0
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise InputError(f"unknown primitive kind {self.kind!r}")
        center = tuple(float(c) for c in self.center)
        size = tuple(float(s) for s in np.atleast_1d(self.size))
        if len(center) != self.n:
            raise InputError(f"{self.kind} needs a {self.n}-vector center, got {len(center)}")
        expected = 2 if self.kind in ("ellipse2d", "rectangle2d") else 1
        if len(size) != expected:
            raise InputError(f"{self.kind} needs {expected} size parameter(s)")
        if not all(s > 0 and math.isfinite(s) for s in size):
            raise InputError(f"{self.kind} size parameters must be positive, got {size}")
        if not math.isfinite(self.amplitude):
            raise InputError("amplitude must be finite")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def n(self):
        return PRIMITIVE_KINDS[self.kind]

    @property
    def reach(self):
        """Radius of a ball about the centre containing the support."""
        if self.kind.startswith("gaussian"):
            return GAUSS_CUT * self.size[0]
        if self.kind == "rectangle2d":
            return math.hypot(*self.size)
        return max(self.size)

    def bounds(self):
        c = np.array(self.center)
        if self.kind == "rectangle2d":
            h = np.array(self.size)
        elif self.kind == "ellipse2d":
            a, b = self.size
            ca, sa = math.cos(self.angle), math.sin(self.angle)
            h = np.array([math.hypot(a * ca, b * sa), math.hypot(a * sa, b * ca)])
        else:
            h = np.full(self.n, self.reach)
        return c - h, c + h

    def evaluate(self, points):
        """Unmasked values at ``points`` (shape ``(..., n)``)."""
        x = np.asarray(points, dtype=float) - np.array(self.center)
        A = self.amplitude
        if self.kind in ("disc2d", "ball3d"):
            return np.where(np.sum(x * x, axis=-1) < self.size[0] ** 2, A, 0.0)
        if self.kind.startswith("gaussian"):
            r2 = np.sum(x * x, axis=-1)
            return np.where(r2 < self.reach**2, A * np.exp(-r2 / (2 * self.size[0] ** 2)), 0.0)
        if self.kind == "rectangle2d":
            inside = (np.abs(x[..., 0]) < self.size[0]) & (np.abs(x[..., 1]) < self.size[1])
            return np.where(inside, A, 0.0)
        a, b = self.size
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        u = ca * x[..., 0] + sa * x[..., 1]
        v = -sa * x[..., 0] + ca * x[..., 1]
        return np.where((u / a) ** 2 + (v / b) ** 2 < 1.0, A, 0.0)

    def radon(self, tau, direction):
        """Closed-form Radon image of the unmasked primitive."""
        d = np.asarray(direction, dtype=float)
        u = np.asarray(tau, dtype=float) - float(d @ np.array(self.center))
        A = self.amplitude
        if self.kind == "disc2d":
            return A * 2.0 * np.sqrt(np.maximum(self.size[0] ** 2 - u * u, 0.0))
        if self.kind == "ball3d":
            return A * math.pi * np.maximum(self.size[0] ** 2 - u * u, 0.0)
        if self.kind.startswith("gaussian"):
            # cut at the effective support, where the profile is below 1e-12
            s = self.size[0]
            mass = math.sqrt(2 * math.pi) * s if self.kind == "gaussian2d" else 2 * math.pi * s * s
            return np.where(np.abs(u) < self.reach, A * mass * np.exp(-u * u / (2 * s * s)), 0.0)
        if self.kind == "ellipse2d":
            a, b = self.size
            ca, sa = math.cos(self.angle), math.sin(self.angle)
            d1 = ca * d[0] + sa * d[1]
            d2 = -sa * d[0] + ca * d[1]
            s2 = (a * d1) ** 2 + (b * d2) ** 2
            return A * 2 * a * b * np.sqrt(np.maximum(s2 - u * u, 0.0)) / s2
        return A * _chord(np.asarray(tau, dtype=float), d, None, self._box_planes())

    def _box_planes(self):
        return SupportMask(
            "box", tuple((c - h, c + h) for c, h in zip(self.center, self.size))
        ).halfplanes()

    def chord(self, tau, direction, planes):
        """Length of the line ``<d, x> = tau`` inside the primitive and ``planes``."""
        d = np.asarray(direction, dtype=float)
        tau = np.asarray(tau, dtype=float)
        if self.kind == "disc2d":
            u = tau - float(d @ np.array(self.center))
            w = np.sqrt(np.maximum(self.size[0] ** 2 - u * u, 0.0))
            sc = float(np.array([-d[1], d[0]]) @ np.array(self.center))
            empty = self.size[0] ** 2 - u * u <= 0
            return _chord(tau, d, (sc - w, sc + w, empty), planes)
        if self.kind == "rectangle2d":
            return _chord(tau, d, None, self._box_planes() + list(planes))
        raise CapabilityError(f"no chord formula for {self.kind}")


def _chord(tau, d, initial, planes):
    """Clip the line x(s) = tau*d + s*d_perp against half-planes, return length."""
    dperp = np.array([-d[1], d[0]])
    if initial is None:
        lo = np.full(tau.shape, -np.inf)
        hi = np.full(tau.shape, np.inf)
        empty = np.zeros(tau.shape, dtype=bool)
    else:
        lo, hi, empty = (np.broadcast_to(v, tau.shape).copy() for v in initial)
    for a, b in planes:
        alpha = float(a @ d) * tau + b
        beta = float(a @ dperp)
        if beta == 0.0:
            empty |= alpha <= 0
            continue
        bound = -alpha / beta
        if beta > 0:
            lo = np.maximum(lo, bound)
        else:
            hi = np.minimum(hi, bound)
    length = np.where(empty, 0.0, np.maximum(hi - lo, 0.0))
    return np.where(np.isfinite(length), length, 0.0)


@dataclass(frozen=True)
class PhantomSpec:
    """An outset function: masked primitives summed, then a global mask."""

    n: int
    primitives: tuple = ()
    global_mask: SupportMask = NO_MASK

    def __post_init__(self):
        if self.n not in (2, 3):
            raise InputError(f"dimension must be 2 or 3, got {self.n}")
        items = []
        for item in self.primitives:
            prim, mask = (item, NO_MASK) if isinstance(item, Primitive) else item
            if prim.n != self.n:
                raise InputError(f"{prim.kind} is {prim.n}D but the phantom is {self.n}D")
            mask.check_dimension(self.n)
            items.append((prim, mask))
        self.global_mask.check_dimension(self.n)
        object.__setattr__(self, "primitives", tuple(items))

    def masks_of(self, index):
        prim, mask = self.primitives[index]
        return [m for m in (mask, self.global_mask) if m.kind != "none"]

    def bounds(self):
        """Bounding box of the support (empty phantom: a degenerate box at 0)."""
        los, his = [], []
        for i, (prim, _) in enumerate(self.primitives):
            lo, hi = prim.bounds()
            for m in self.masks_of(i):
                mlo, mhi = m.bounds(self.n)
                lo, hi = np.maximum(lo, mlo), np.minimum(hi, mhi)
            if np.all(lo < hi):
                los.append(lo)
                his.append(hi)
        if not los:
            return np.zeros(self.n), np.zeros(self.n)
        return np.min(los, axis=0), np.max(his, axis=0)

    @property
    def support_radius(self):
        """Radius of an origin-centred ball containing the support."""
        lo, hi = self.bounds()
        corners = np.maximum(np.abs(lo), np.abs(hi))
        box_r = float(np.linalg.norm(corners))
        ball_r = max(
            (float(np.linalg.norm(p.center)) + p.reach for p, _ in self.primitives),
            default=0.0,
        )
        return min(box_r, ball_r)

    def support_extent(self, direction):
        """Range of ``<direction, x>`` over the support bounding box."""
        lo, hi = self.bounds()
        d = np.asarray(direction, dtype=float)
        low = float(np.sum(np.where(d > 0, d * lo, d * hi)))
        high = float(np.sum(np.where(d > 0, d * hi, d * lo)))
        return low, high


def evaluate(spec, points):
    """Vectorised phantom values at ``points`` of shape ``(..., n)``."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != spec.n:
        raise InputError(f"points have dimension {points.shape[-1]}, phantom has {spec.n}")
    total = np.zeros(points.shape[:-1])
    for i, (prim, _) in enumerate(spec.primitives):
        value = prim.evaluate(points)
        for m in spec.masks_of(i):
            value = np.where(m.contains(points), value, 0.0)
        total = total + value
    return total


def eval_phantom(spec, point):
    point = np.asarray(point, dtype=float)
    if point.shape != (spec.n,):
        raise InputError(f"point must be a {spec.n}-vector, got shape {point.shape}")
    return float(evaluate(spec, point))


def supports_analytic(spec):
    """Whether every (primitive, mask) pair has a closed-form Radon image."""
    for i, (prim, _) in enumerate(spec.primitives):
        kinds = {m.kind for m in spec.masks_of(i)}
        if kinds and not (
            (prim.kind == "disc2d" and kinds == {"quadrant"})
            or (prim.kind == "rectangle2d" and kinds == {"box"})
        ):
            return False
    return True


def analytic_radon(spec, tau, direction):
    """Exact Radon image ``R[f](tau, direction)``; ``tau`` may be an array."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (spec.n,):
        raise InputError(f"direction must be a {spec.n}-vector")
    if abs(float(np.linalg.norm(d)) - 1.0) > 1e-12:
        raise InputError("direction must be a unit vector")
    tau_arr = np.asarray(tau, dtype=float)
    total = np.zeros(tau_arr.shape)
    for i, (prim, _) in enumerate(spec.primitives):
        masks = spec.masks_of(i)
        if not masks:
            total = total + prim.radon(tau_arr, d)
            continue
        kinds = {m.kind for m in masks}
        ok = (prim.kind == "disc2d" and kinds == {"quadrant"}) or (
            prim.kind == "rectangle2d" and kinds == {"box"}
        )
        if not ok:
            raise CapabilityError(
                f"no closed form for {prim.kind} under {sorted(kinds)} mask; "
                "use numeric integration"
            )
        planes = [p for m in masks for p in m.halfplanes()]
        total = total + prim.amplitude * prim.chord(tau_arr, d, planes)
    return total if total.ndim else float(total)


@dataclass(frozen=True)
class RasterGrid:
    """Regular grid given by first/last cell centres and per-axis counts."""

    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        shape = tuple(int(v) for v in self.shape)
        if not (len(lo) == len(hi) == len(shape)):
            raise InputError("raster lo/hi/shape lengths differ")
        if any(c < 1 for c in shape):
            raise InputError(f"raster shape must be positive, got {shape}")
        if any(not a <= b for a, b in zip(lo, hi)):
            raise InputError("raster lo must not exceed hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def square(cls, count, half_width, n=2):
        return cls((-half_width,) * n, (half_width,) * n, (count,) * n)

    @property
    def n(self):
        return len(self.shape)

    @property
    def array_shape(self):
        return self.shape[::-1]

    def axis(self, i):
        if self.shape[i] == 1:
            return np.array([(self.lo[i] + self.hi[i]) / 2])
        return np.linspace(self.lo[i], self.hi[i], self.shape[i])

    def points(self):
        """Cell centres, shape ``(size, n)``, in row-major (x1 fastest) order."""
        mesh = np.meshgrid(*[self.axis(i) for i in reversed(range(self.n))], indexing="ij")
        return np.stack(mesh[::-1], axis=-1).reshape(-1, self.n)


@dataclass(frozen=True)
class Raster:
    grid: RasterGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.array_shape:
            raise InputError(f"raster values {values.shape} do not match grid {self.grid.array_shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def rasterize(spec, grid):
    if grid.n != spec.n:
        raise InputError("raster dimension differs from phantom dimension")
    values = evaluate(spec, grid.points()).reshape(grid.array_shape)
    return Raster(grid, values)


def make_quadrant_phantom(f1, f3):
    """``f1`` restricted to quadrant I plus ``f3`` restricted to quadrant III."""
    if f1.n != 2 or f3.n != 2:
        raise InputError("quadrant phantoms need 2D primitives")
    return PhantomSpec(
        2,
        ((f1, SupportMask("quadrant", quadrant="I")), (f3, SupportMask("quadrant", quadrant="III"))),
    )


# -- JSON --------------------------------------------------------------------

_PARAM_KEYS = {
    "disc2d": ("radius",),
    "ball3d": ("radius",),
    "gaussian2d": ("sigma",),
    "gaussian3d": ("sigma",),
    "ellipse2d": ("semi_axes", "angle"),
    "rectangle2d": ("half_widths",),
}


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise InputError(f"{where} must be an object")
    for key in obj:
        if key not in allowed:
            raise InputError(f"unknown key {key!r} in {where}")


def mask_from_dict(obj, where="mask"):
    _reject_unknown(obj, ("kind", "box", "quadrant"), where)
    kind = obj.get("kind", "none")
    if kind == "box":
        return SupportMask("box", tuple(tuple(b) for b in obj.get("box", ())))
    if kind == "quadrant":
        return SupportMask("quadrant", quadrant=obj.get("quadrant", ""))
    return SupportMask(kind)


def mask_to_dict(mask):
    if mask.kind == "box":
        return {"kind": "box", "box": [list(b) for b in mask.box]}
    if mask.kind == "quadrant":
        return {"kind": "quadrant", "quadrant": mask.quadrant}
    return {"kind": "none"}


def primitive_from_dict(obj, where):
    _reject_unknown(obj, ("kind", "center", "params", "amplitude", "mask"), where)
    for key in ("kind", "center", "params"):
        if key not in obj:
            raise InputError(f"missing key {key!r} in {where}")
    kind = obj["kind"]
    if kind not in _PARAM_KEYS:
        raise InputError(f"unknown primitive kind {kind!r} in {where}")
    params = obj["params"]
    _reject_unknown(params, _PARAM_KEYS[kind], f"{where}.params")
    if kind == "ellipse2d":
        size, angle = params.get("semi_axes"), params.get("angle", 0.0)
    elif kind == "rectangle2d":
        size, angle = params.get("half_widths"), 0.0
    else:
        size, angle = params.get(_PARAM_KEYS[kind][0]), 0.0
    if size is None:
        raise InputError(f"missing size parameter in {where}.params")
    prim = Primitive(kind, tuple(obj["center"]), size, float(obj.get("amplitude", 1.0)), angle)
    mask = mask_from_dict(obj.get("mask", {}), f"{where}.mask")
    return prim, mask


def phantom_from_dict(obj):
    _reject_unknown(obj, ("n", "primitives", "global_mask"), "phantom")
    if "n" not in obj:
        raise InputError("missing key 'n' in phantom")
    items = tuple(
        primitive_from_dict(p, f"primitives[{i}]") for i, p in enumerate(obj.get("primitives", []))
    )
    gmask = mask_from_dict(obj.get("global_mask", {}), "global_mask")
    return PhantomSpec(int(obj["n"]), items, gmask)


def phantom_to_dict(spec):
    prims = []
    for prim, mask in spec.primitives:
        if prim.kind == "ellipse2d":
            params = {"semi_axes": list(prim.size), "angle": prim.angle}
        elif prim.kind == "rectangle2d":
            params = {"half_widths": list(prim.size)}
        else:
            params = {_PARAM_KEYS[prim.kind][0]: prim.size[0]}
        prims.append(
            {
                "kind": prim.kind,
                "center": list(prim.center),
                "params": params,
                "amplitude": prim.amplitude,
                "mask": mask_to_dict(mask),
            }
        )
    return {"n": spec.n, "primitives": prims, "global_mask": mask_to_dict(spec.global_mask)}


def load_phantom(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed phantom JSON: {exc}") from exc
    return phantom_from_dict(obj)


# -- convenience constructors ------------------------------------------------


def disc(center=(0.0, 0.0), radius=1.0, amplitude=1.0):
    return Primitive("disc2d", center, (radius,), amplitude)


def gaussian(center=(0.0, 0.0), sigma=1.0, amplitude=1.0):
    kind = "gaussian2d" if len(center) == 2 else "gaussian3d"
    return Primitive(kind, center, (sigma,), amplitude)


def ball(center=(0.0, 0.0, 0.0), radius=1.0, amplitude=1.0):
    return Primitive("ball3d", center, (radius,), amplitude)


def phantom(*items, n=None, global_mask=NO_MASK):
    """Build a :class:`PhantomSpec` from primitives or ``(primitive, mask)`` pairs."""
    if n is None:
        first = items[0] if items else None
        n = 2 if first is None else (first if isinstance(first, Primitive) else first[0]).n
    return PhantomSpec(n, tuple(items), global_mask)
