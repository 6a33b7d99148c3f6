"""Command-line pipeline: phantom -> sinogram -> reconstruction -> checks.

Exit codes: 0 pass, 1 a check failed, 2 usage or validation error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .angular_support import AngularDomain, admissible, angular_mask, is_canonical_box
from .errors import CapabilityError, InputError, NumericError
from .inversion import KernelSpec, decomposition_report, reconstruct
from .phantoms import PhantomSpec, RasterGrid, SupportMask, load_phantom, rasterize
from .radon import (
    AngularGrid,
    RadialGrid,
    antipodal_check,
    direct_radon_analytic,
    direct_radon_numeric,
    surface_term_check,
)
from .slice_theorem import slice_residual, slice_table

log = logging.getLogger("uniradon")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


# -- argument helpers -------------------------------------------------------


def _angles(text, n):
    """``"360"`` for n=2, ``"64x32"`` (phi x theta) for n=3."""
    parts = text.lower().split("x")
    try:
        counts = [int(p) for p in parts]
    except ValueError:
        raise InputError(f"--angles expects integers, got {text!r}") from None
    if any(c < 1 for c in counts):
        raise InputError("--angles counts must be positive")
    if n == 2:
        if len(counts) != 1:
            raise InputError("2D --angles takes a single count")
        return AngularGrid.full_circle(counts[0])
    if len(counts) != 2:
        raise InputError("3D --angles takes PHIxTHETA, e.g. 64x32")
    return AngularGrid.full_sphere(*counts)


def _intervals(text):
    out = []
    for item in text.split(";"):
        a, sep, b = item.partition(":")
        if not sep:
            raise InputError(f"interval {item!r} must look like a:b")
        out.append((float(a), float(b)))
    return out


def _domain(args, n):
    if args.range == "full":
        return AngularDomain.full(n)
    if n != 2:
        raise CapabilityError("half/custom ranges are two-dimensional")
    if args.range == "half":
        return AngularDomain.half_range()
    if not args.intervals:
        raise InputError("--range custom needs --intervals a:b[;c:d]")
    return AngularDomain(tuple(_intervals(args.intervals)))


def _terms(text):
    names = {"fs": "fS", "fa": "fA"}
    out = []
    for t in text.split(","):
        key = t.strip().lower()
        if key not in names:
            raise InputError(f"unknown term {t!r}; use fs and/or fa")
        out.append(names[key])
    return tuple(out)


def _kernel(args, n):
    if args.mode == "exact":
        return KernelSpec(n=n, mode="exact_limit")
    if args.eps is not None:
        return KernelSpec(n=n, mode="epsilon_kernel", epsilon=args.eps)
    return KernelSpec(n=n, mode="epsilon_kernel", extrapolation="default")


def _raster_grid(args, n):
    if args.grid < 1:
        raise InputError("--grid must be positive")
    if not args.extent > 0:
        raise InputError("--extent must be positive")
    return RasterGrid.square(args.grid, args.extent, n)


def _check_threads(args):
    if args.threads < 1:
        raise InputError("--threads must be at least 1")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out, args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    io.write_json(out / "config.json", cfg)


def _sharp_radius(spec):
    sharp = tuple(item for item in spec.primitives if not item[0].kind.startswith("gaussian"))
    if not sharp:
        return 0.0
    return PhantomSpec(spec.n, sharp, spec.global_mask).support_radius


def _sinogram_from_spec(spec, args, refuse_small_window=True):
    window = args.window
    if not window > 0:
        raise InputError("--window must be positive")
    if refuse_small_window and window <= _sharp_radius(spec):
        raise InputError(
            f"window half-width {window} does not exceed the support radius "
            f"{_sharp_radius(spec):.6g}: boundary exclusion needs vanishing samples at the window edges"
        )
    radial = RadialGrid.symmetric(window, args.radial)
    angular = _angles(args.angles, spec.n)
    if getattr(args, "numeric", False):
        s = direct_radon_numeric(spec, radial, angular, args.step, threads=args.threads)
    else:
        s = direct_radon_analytic(spec, radial, angular)
    edge = float(np.max(np.abs(s.values[:, [0, -1]])))
    if edge > 0:
        peak = float(np.max(np.abs(s.values)))
        log.warning("window truncates smooth tails: edge samples up to %.3g (%.3g of peak)", edge, edge / peak)
    return s


# -- subcommands ------------------------------------------------------------


def cmd_phantom(args):
    spec = load_phantom(args.spec)
    grid = _raster_grid(args, spec.n)
    out = _out_dir(args)
    _echo_config(out, args)
    raster = rasterize(spec, grid)
    io.write_raster(out / "raster.csv", raster)
    if spec.n == 2:
        io.write_pgm(out / "raster.pgm", raster.values)
    return EXIT_OK


def cmd_sinogram(args):
    _check_threads(args)
    spec = load_phantom(args.spec)
    out = _out_dir(args)
    _echo_config(out, args)
    s = _sinogram_from_spec(spec, args)
    io.write_sinogram(out / "sinogram.csv", s)
    io.write_pgm(out / "sinogram.pgm", s.values)
    return EXIT_OK


def cmd_reconstruct(args):
    _check_threads(args)
    timings = {}
    t0 = time.perf_counter()
    spec = load_phantom(args.spec) if args.spec else None
    if args.sinogram:
        s = io.read_sinogram(args.sinogram)
    elif spec is not None:
        s = _sinogram_from_spec(spec, args)
    else:
        raise InputError("reconstruct needs --sinogram or --spec")
    n = s.n
    grid = _raster_grid(args, n)
    domain = _domain(args, n)
    kernel = _kernel(args, n)
    terms = _terms(args.terms)
    if args.double_half_range and abs(domain.measure - math.pi) > 1e-9:
        raise InputError("--double-half-range applies to domains of total measure pi")
    reference = None
    if args.reference:
        reference = io.read_raster(args.reference)
        if reference.grid != grid:
            raise InputError("reference raster grid differs from the reconstruction grid")
    elif spec is not None:
        reference = rasterize(spec, grid)
    out = _out_dir(args)
    _echo_config(out, args)
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    field = reconstruct(s, grid, domain, kernel, terms=terms, threads=args.threads)
    timings["reconstruct"] = time.perf_counter() - t0
    if args.double_half_range:
        field = type(field)(
            field.points,
            2 * field.fS.real + 1j * field.fS.imag,
            2 * field.fA.real + 1j * field.fA.imag,
            field.terms,
            field.kernel,
            field.domain,
            field.c_n,
            field.grid,
        )
    t0 = time.perf_counter()
    io.write_field(out / "field.csv", field)
    if n == 2:
        io.write_pgm(out / "field.pgm", field.as_raster(field.total.real))
    timings["write"] = time.perf_counter() - t0
    metrics = _field_metrics(field, reference)
    metrics["runtime_seconds"] = timings
    io.write_json(out / "metrics.json", metrics)
    print(io.dumps({k: v for k, v in metrics.items() if k != "runtime_seconds"}), end="")
    return EXIT_OK


def _field_metrics(field, reference):
    re_norm = float(np.linalg.norm(field.total.real))
    im_norm = float(np.linalg.norm(field.total.imag))
    fs_norm = float(np.linalg.norm(field.fS))
    fa_norm = float(np.linalg.norm(field.fA))
    metrics = {
        "fa_over_fs": fa_norm / fs_norm if fs_norm > 0 else None,
        "im_over_re": im_norm / re_norm if re_norm > 0 else None,
        "norm_fS": fs_norm,
        "norm_fA": fa_norm,
        "peak_real": float(np.max(field.total.real)),
    }
    if reference is not None:
        report = decomposition_report(field, reference.values)
        metrics["rel_l2_error"] = report.rel_l2_real
        metrics["max_abs_error"] = report.max_abs_error
        metrics["rel_l2_imag"] = report.rel_l2_imag
    return metrics


def cmd_verify(args):
    _check_threads(args)
    spec = load_phantom(args.spec)
    out = _out_dir(args)
    _echo_config(out, args)
    check = args.check
    if check == "antipodal":
        s = _sinogram_from_spec(spec, args)
        value = antipodal_check(s)
        tol = 1e-10 if args.tol is None else args.tol
        result = {"check": check, "deviation": value, "tolerance": tol}
        passed = value <= tol
    elif check == "slice":
        s = _sinogram_from_spec(spec, args)
        directions = [int(k) for k in np.linspace(0, s.angular.size, args.directions, endpoint=False)]
        lam_max = min(args.lambda_max, 1.0 / s.radial.spacing)
        lambdas = np.linspace(-lam_max, lam_max, args.lambdas)
        rows = slice_table(spec, s, directions, lambdas)
        lines = ["direction,lambda,abs_slice,abs_direct,abs_diff"]
        lines += [",".join(io.fmt(v) for v in row) for row in rows]
        (out / "slice_table.csv").write_text("\n".join(lines) + "\n")
        value = slice_residual(spec, s, directions, lambdas)
        print(f"slice_residual={io.fmt(value)}")
        tol = 1e-3 if args.tol is None else args.tol
        result = {"check": check, "slice_residual": value, "tolerance": tol}
        passed = value <= tol
    elif check == "surface":
        s = _sinogram_from_spec(spec, args, refuse_small_window=False)
        weight = [float(v) for v in args.weight.split(",")]
        res = surface_term_check(s, weight)
        tol = 1e-3 if args.tol is None else args.tol
        result = {
            "check": check,
            "boundary_magnitude": res.boundary_magnitude,
            "residual": res.residual,
            "tolerance": tol,
        }
        passed = res.boundary_magnitude == 0.0 and res.residual <= tol
        if res.boundary_magnitude != 0.0:
            print(f"nonzero surface term: boundary magnitude {io.fmt(res.boundary_magnitude)}", file=sys.stderr)
    else:
        result, passed = _verify_modes(spec, args)
    result["passed"] = bool(passed)
    io.write_json(out / "metrics.json", result)
    print(io.dumps(result), end="")
    return EXIT_OK if passed else EXIT_FAIL


def _verify_modes(spec, args):
    s = _sinogram_from_spec(spec, args)
    rng = np.random.default_rng(args.seed)
    targets = rng.uniform(-args.extent, args.extent, size=(args.targets, spec.n))
    exact = reconstruct(s, targets, kernel=KernelSpec(n=spec.n), terms=("fS",), threads=args.threads)
    eps_spec = KernelSpec(n=spec.n, mode="epsilon_kernel", extrapolation="default")
    if args.eps is not None:
        eps_spec = KernelSpec(n=spec.n, mode="epsilon_kernel", epsilon=args.eps)
    eps = reconstruct(s, targets, kernel=eps_spec, terms=("fS",), threads=args.threads)
    diff = np.abs(exact.fS - eps.fS)
    peak = float(np.max(np.abs(exact.fS)))
    tol = 0.01 if args.tol is None else args.tol
    value = float(np.max(diff)) / peak
    result = {
        "check": "modes",
        "max_diff_over_peak": value,
        "max_pointwise_relative": float(np.max(diff / np.abs(exact.fS))),
        "tolerance": tol,
    }
    return result, value <= tol


def cmd_angular_report(args):
    values = [float(v) for v in args.box.split(",")]
    if len(values) != 4:
        raise InputError("--box expects x1min,x1max,x2min,x2max")
    support = SupportMask("box", ((values[0], values[1]), (values[2], values[3])))
    domain = angular_mask(support)
    grid = _angles(args.angles, 2)
    inside = int(np.sum(domain.contains(grid.angles)))
    out = _out_dir(args)
    _echo_config(out, args)
    axes = []
    for name in ("q1", "q2", "t"):
        lo, hi, count = getattr(args, name).split(",")
        axes.append(np.linspace(float(lo), float(hi), int(count)))
    Q1, Q2, T = np.meshgrid(*axes, indexing="ij")
    Q1, Q2, T = Q1.ravel(), Q2.ravel(), T.ravel()
    valid = ~((Q1 == 0) & (Q2 == 0))
    flags = np.zeros(Q1.shape, dtype=bool)
    flags[valid] = admissible(Q1[valid], Q2[valid], T[valid])
    lines = ["q1,q2,t,admissible"]
    lines += [f"{io.fmt(a)},{io.fmt(b)},{io.fmt(c)},{int(f)}" for a, b, c, f in zip(Q1[valid], Q2[valid], T[valid], flags[valid])]
    (out / "admissible.csv").write_text("\n".join(lines) + "\n")
    (a, b), = domain.intervals
    report = [
        f"support box: [{io.fmt(values[0])}, {io.fmt(values[1])}] x [{io.fmt(values[2])}, {io.fmt(values[3])}]",
        f"canonical box: {'yes' if is_canonical_box(support) else 'no (interval generalised by scaling symmetry)'}",
        f"open angular interval: ({io.fmt(a)}, {io.fmt(b)}), endpoints excluded",
        f"grid angles: {grid.size}, strictly inside: {inside}",
        f"admissible samples: {int(flags[valid].sum())} of {int(valid.sum())}",
    ]
    (out / "report.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _common(p, spec_required=True):
    p.add_argument("--spec", required=spec_required, help="phantom JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _sampling(p, window=4.0):
    p.add_argument("--angles", default="360", help="angle count, or PHIxTHETA in 3D")
    p.add_argument("--radial", type=int, default=513, help="radial sample count")
    p.add_argument("--window", type=float, default=window, help="radial half-width")


def _raster(p, extent=1.0):
    p.add_argument("--grid", type=int, default=64, help="raster count per axis")
    p.add_argument("--extent", type=float, default=extent, help="raster half-width")


def build_parser():
    parser = argparse.ArgumentParser(prog="uniradon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="rasterise a phantom")
    _common(p)
    _raster(p)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("sinogram", help="direct Radon transform of a phantom")
    _common(p)
    _sampling(p)
    p.add_argument("--numeric", action="store_true", help="line quadrature instead of closed forms")
    p.add_argument("--step", type=float, default=1e-3)
    p.set_defaults(func=cmd_sinogram)

    p = sub.add_parser("reconstruct", help="universal inverse transform")
    _common(p, spec_required=False)
    _sampling(p)
    _raster(p)
    p.add_argument("--sinogram", help="sinogram CSV (otherwise built from --spec)")
    p.add_argument("--range", choices=("full", "half", "custom"), default="full")
    p.add_argument("--intervals", help="custom open intervals a:b[;c:d] in radians")
    p.add_argument("--terms", default="fs,fa")
    p.add_argument("--mode", choices=("exact", "eps"), default="exact")
    p.add_argument("--eps", type=float, help="single epsilon (default: Richardson over 4 and 2 dtau)")
    p.add_argument("--double-half-range", action="store_true", help="multiply Re by 2 on measure-pi domains")
    p.add_argument("--reference", help="reference raster CSV")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", help="numerical checks")
    p.add_argument("check", choices=("antipodal", "slice", "surface", "modes"))
    _common(p)
    _sampling(p)
    p.add_argument("--extent", type=float, default=1.0, help="target half-width for the modes check")
    p.add_argument("--targets", type=int, default=100)
    p.add_argument("--eps", type=float)
    p.add_argument("--directions", type=int, default=8)
    p.add_argument("--lambdas", type=int, default=7)
    p.add_argument("--lambda-max", type=float, default=3.0)
    p.add_argument("--weight", default="0,0,0,1", help="surface-check polynomial, increasing degree")
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("angular-report", help="angular restriction from box support")
    p.add_argument("--out", required=True)
    p.add_argument("--box", default="-1,1,-1,1")
    p.add_argument("--angles", default="360")
    p.add_argument("--q1", default="-3,3,13")
    p.add_argument("--q2", default="-3,3,13")
    p.add_argument("--t", default="-2,2,9")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_angular_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(io.dumps(exc.diagnostics), file=sys.stderr, end="")
        return EXIT_NUMERIC
    except (InputError, CapabilityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
