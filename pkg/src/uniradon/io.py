"""File formats: sinogram/raster/field CSV, 16-bit PGM, deterministic JSON.

Every float is written with 17 significant digits so that files round-trip
exactly and identical computations give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .phantoms import Raster, RasterGrid
from .radon import AngularGrid, RadialGrid, Sinogram

FLOAT = "%.17g"


def fmt(x):
    return FLOAT % x


def _join(values):
    return ",".join(fmt(v) for v in values)


def _floats(text, where):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


# -- sinograms --------------------------------------------------------------


def write_sinogram(path, s):
    r = s.radial
    if s.n == 2:
        angles = _join(s.angular.angles)
    else:
        angles = ",".join(f"{fmt(p)}|{fmt(t)}" for p, t in s.angular.angles)
    lines = [
        f"# n={s.n}",
        f"# radial={fmt(r.tau_min)},{fmt(r.tau_max)},{r.count}",
        f"# angular={angles}",
        f"# weights={_join(s.angular.weights)}",
        f"# provenance={s.provenance}",
        f"# support_radius={fmt(s.support_radius)}",
    ]
    lines += [_join(row) for row in s.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sinogram(path):
    text = Path(path).read_text().splitlines()
    meta, rows = {}, []
    for lineno, line in enumerate(text, 1):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise InputError(f"{path}:{lineno}: malformed header line")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append(_floats(line, f"{path}:{lineno}"))
    for key in ("n", "radial", "angular"):
        if key not in meta:
            raise InputError(f"{path}: missing '# {key}=' header")
    n = int(meta["n"])
    tmin, tmax, count = meta["radial"].split(",")
    radial = RadialGrid(float(tmin), float(tmax), int(count))
    if n == 2:
        angles = np.array(_floats(meta["angular"], "angular"))
    else:
        angles = np.array([[float(v) for v in item.split("|")] for item in meta["angular"].split(",")])
    if "weights" in meta:
        weights = np.array(_floats(meta["weights"], "weights"))
    elif n == 2:
        weights = np.full(len(angles), 2 * math.pi / len(angles))
    else:
        raise InputError(f"{path}: 3D sinograms need a '# weights=' header")
    support = float(meta.get("support_radius", "inf"))
    values = np.array(rows) if rows else np.zeros((0, radial.count))
    return Sinogram(n, radial, AngularGrid(n, angles, weights), values, meta.get("provenance", "analytic"), support)


# -- rasters and fields -----------------------------------------------------


def _grid_header(grid):
    return f"# grid lo={_join(grid.lo)};hi={_join(grid.hi)};shape={','.join(map(str, grid.shape))}"


def _parse_grid(line):
    parts = dict(item.split("=", 1) for item in line[len("# grid "):].split(";"))
    return RasterGrid(
        _floats(parts["lo"], "lo"), _floats(parts["hi"], "hi"), [int(v) for v in parts["shape"].split(",")]
    )


def _coord_names(n):
    return [f"x{i + 1}" for i in range(n)]


def write_raster(path, raster):
    grid = raster.grid
    pts = grid.points()
    lines = [_grid_header(grid), ",".join(_coord_names(grid.n) + ["value"])]
    lines += [_join(list(p) + [v]) for p, v in zip(pts, raster.values.ravel())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_raster(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# grid "):
        raise InputError(f"{path}: missing '# grid' header")
    grid = _parse_grid(lines[0])
    data = np.array([_floats(line, str(path)) for line in lines[2:] if line.strip()])
    if data.shape != (int(np.prod(grid.shape)), grid.n + 1):
        raise InputError(f"{path}: expected {np.prod(grid.shape)} rows of {grid.n + 1} columns")
    return Raster(grid, data[:, -1].reshape(grid.array_shape))


def write_field(path, field):
    n = field.points.shape[1]
    head = [_grid_header(field.grid)] if field.grid is not None else []
    cols = _coord_names(n) + ["re_fS", "im_fS", "re_fA", "im_fA"]
    lines = head + [",".join(cols)]
    for p, s, a in zip(field.points, field.fS, field.fA):
        lines.append(_join(list(p) + [s.real, s.imag, a.real, a.imag]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_columns(path):
    """Points and the four value columns of a field CSV."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    data = np.array([_floats(line, str(path)) for line in lines[1:]])
    n = data.shape[1] - 4
    return data[:, :n], data[:, n] + 1j * data[:, n + 1], data[:, n + 2] + 1j * data[:, n + 3]


# -- PGM --------------------------------------------------------------------


def write_pgm(path, image):
    """Plain 16-bit PGM of a 2D array, first array row at the bottom.

    The linear scaling is recorded in the header comment and in a JSON
    sidecar ``<path>.json``.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise InputError("PGM output needs a 2D array")
    lo, hi = float(np.min(image)), float(np.max(image))
    span = hi - lo
    levels = np.zeros(image.shape, dtype=int) if span == 0 else np.rint((image - lo) / span * 65535).astype(int)
    h, w = image.shape
    lines = ["P2", f"# min={fmt(lo)} max={fmt(hi)}", f"{w} {h}", "65535"]
    lines += [" ".join(map(str, row)) for row in levels[::-1]]
    Path(path).write_text("\n".join(lines) + "\n")
    write_json(str(path) + ".json", {"min": lo, "max": hi, "maxval": 65535})


def read_pgm(path):
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise InputError(f"{path}: not a plain PGM")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array(tokens[4:], dtype=int).reshape(h, w)[::-1]


# -- JSON ------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))
