import math

import numpy as np
import pytest

from uniradon.angular_support import AngularDomain
from uniradon.errors import CapabilityError, InputError
from uniradon.inversion import (
    KernelSpec,
    ReconstructionField,
    decomposition_report,
    f_A_at,
    f_S_at,
    fa_pair_sums,
    normalization,
    reconstruct,
    regularized_lambda_kernel,
)
from uniradon.phantoms import RasterGrid, ball, disc, gaussian, make_quadrant_phantom, phantom, rasterize
from uniradon.radon import AngularGrid, RadialGrid, direct_radon_analytic

EPS_RICHARDSON = KernelSpec(mode="epsilon_kernel", extrapolation="default")


@pytest.fixture(scope="module")
def ball_sino():
    return direct_radon_analytic(phantom(ball()), RadialGrid.symmetric(2.0, 513), AngularGrid.full_sphere(64, 32))


def test_kernel_examples():
    assert regularized_lambda_kernel(KernelSpec(2, "epsilon_kernel", 1.0), 0.0) == pytest.approx(1.0)
    assert regularized_lambda_kernel(KernelSpec(2, "epsilon_kernel", 1.0), 1.0) == pytest.approx(-0.5j)
    assert regularized_lambda_kernel(KernelSpec(3, "epsilon_kernel", 1.0), 0.0) == pytest.approx(-2j)
    with pytest.raises(CapabilityError):
        regularized_lambda_kernel(KernelSpec(2), 0.0)


def test_kernel_matches_lambda_integral():
    # i^(2-n) int_0^inf lam^(n-1) exp(-i lam (eta - i eps)) d lam, by quadrature
    lam = np.linspace(0, 60, 600001)
    for n, eta in ((2, 0.7), (3, -0.4)):
        spec = KernelSpec(n, "epsilon_kernel", 0.5)
        integrand = lam ** (n - 1) * np.exp(-1j * lam * (eta - 0.5j))
        numeric = (1j ** (2 - n)) * np.sum((integrand[1:] + integrand[:-1]) / 2) * (lam[1] - lam[0])
        assert regularized_lambda_kernel(spec, eta) == pytest.approx(numeric, rel=1e-6)


def test_kernel_spec_invariants(gauss_sino):
    with pytest.raises(InputError):
        KernelSpec(2, "epsilon_kernel", 0.5).resolve(gauss_sino)
    with pytest.raises(InputError):
        KernelSpec(2, window=5.0).resolve(gauss_sino)
    with pytest.raises(InputError):
        KernelSpec(2, mode="fancy")
    H, eps = EPS_RICHARDSON.resolve(gauss_sino)
    d = gauss_sino.radial.spacing
    assert H == 4.0 and eps == (4 * d, 2 * d)


def test_f_S_examples(gauss_sino, ball_sino):
    v = f_S_at(gauss_sino, [0.0, 0.0])
    assert v.real == pytest.approx(1.0, abs=2e-3)
    assert abs(v.imag) <= 1e-10
    assert abs(f_S_at(ball_sino, [0.0, 0.0, 0.0])) <= 1e-3
    zero = gauss_sino.with_values(np.zeros_like(gauss_sino.values))
    assert f_S_at(zero, [0.3, 0.1]) == 0


def test_f_A_examples(ball_sino, offdisc_sino):
    assert f_A_at(ball_sino, [0.0, 0.0, 0.0]).real == pytest.approx(1.0, abs=0.02)
    assert abs(f_A_at(offdisc_sino, [0.2, -0.3])) <= 1e-6
    v = f_A_at(offdisc_sino, [0.0, 0.0], AngularDomain.half_range())
    # closed form: -i/(4 pi) int cos(phi)/sqrt(1 - cos^2(phi)/4) d phi = -i ln(3)/(2 pi)
    assert abs(v.real) <= 1e-12
    assert v.imag == pytest.approx(-math.log(3) / (2 * math.pi), rel=1e-3)
    # regression value of the first run
    assert v.imag == pytest.approx(-0.17487769299933395, rel=1e-9)


def test_fa_pairs_cancel(offdisc_sino):
    for x in ([0.0, 0.0], [0.3, -0.4], [-0.7, 0.2]):
        assert np.max(np.abs(fa_pair_sums(offdisc_sino, x))) <= 1e-10


def test_targets_outside_circle(gauss_sino):
    with pytest.raises(InputError, match="outside"):
        reconstruct(gauss_sino, [[3.0, 3.0]])


def test_reconstruct_examples(gauss_sino):
    grid = RasterGrid.square(64, 2.5)
    field = reconstruct(gauss_sino, grid)
    ref = rasterize(phantom(gaussian()), grid).values.ravel()
    assert np.max(np.abs(field.total - ref)) <= 0.05
    only_a = reconstruct(gauss_sino, grid, terms=("fA",))
    assert np.max(np.abs(only_a.total)) <= 1e-6
    only_s = reconstruct(gauss_sino, grid, terms=("fS",))
    assert np.array_equal(only_s.fS, field.fS)
    assert np.array_equal(only_a.fA, field.fA)
    assert np.allclose(only_s.total, field.total - only_a.total, rtol=0, atol=1e-15)
    assert field.c_n == (2 * math.pi) ** -2


def test_reconstruct_linearity(gauss_sino):
    pts = np.array([[0.1, 0.2], [-1.0, 0.5]])
    base = reconstruct(gauss_sino, pts)
    doubled = reconstruct(gauss_sino.with_values(2 * gauss_sino.values), pts)
    assert np.array_equal(doubled.total, 2 * base.total)
    tripled = reconstruct(gauss_sino.with_values(3 * gauss_sino.values), pts)
    assert np.allclose(tripled.total, 3 * base.total, rtol=1e-14)


def test_reconstruct_thread_independent(gauss_sino):
    pts = np.random.default_rng(1).uniform(-2, 2, size=(300, 2))
    a = reconstruct(gauss_sino, pts, threads=1)
    b = reconstruct(gauss_sino, pts, threads=4)
    assert np.array_equal(a.fS, b.fS) and np.array_equal(a.fA, b.fA)


def test_modes_agree(gauss_sino):
    pts = np.random.default_rng(2).uniform(-2, 2, size=(20, 2))
    exact = reconstruct(gauss_sino, pts).fS
    eps = reconstruct(gauss_sino, pts, kernel=EPS_RICHARDSON).fS
    assert np.max(np.abs(exact - eps)) <= 0.01 * np.max(np.abs(exact))
    single = reconstruct(gauss_sino, pts, kernel=KernelSpec(mode="epsilon_kernel")).fS
    # one epsilon carries its O(eps) smoothing bias; Richardson removes it
    assert np.max(np.abs(exact - single)) > np.max(np.abs(exact - eps))


def test_half_range_identity_at_origin(disc_sino):
    full = f_S_at(disc_sino, [0.0, 0.0])
    half = f_S_at(disc_sino, [0.0, 0.0], AngularDomain.half_range())
    assert half == pytest.approx(0.5 * full, rel=1e-12)


def test_n3_fS_small_inside(ball_sino):
    pts = np.array([[0.3, 0, 0], [0, -0.4, 0.1], [0.2, 0.2, 0.2], [-0.5, 0.1, -0.3]])
    field = reconstruct(ball_sino, pts)
    assert np.all(np.abs(field.fS) <= 1e-3 * np.abs(field.fA))
    eps = reconstruct(ball_sino, pts, kernel=KernelSpec(3, "epsilon_kernel", extrapolation="default"))
    assert np.max(np.abs(eps.fS)) <= 1e-3


def test_decomposition_report_examples(gauss_sino):
    grid = RasterGrid.square(32, 2.0)
    field = reconstruct(gauss_sino, grid)
    ref = field.total.real.copy()
    assert decomposition_report(field, ref).rel_l2_real == 0.0
    assert decomposition_report(field, ref).fa_over_fs <= 1e-3
    zero = decomposition_report(field, np.zeros_like(ref))
    assert not zero.normalized and zero.rel_l2_real == pytest.approx(np.linalg.norm(field.total.real))
    with pytest.raises(InputError):
        decomposition_report(field, ref[:-1])


def test_quadrant_phantom_half_range_fa():
    q = make_quadrant_phantom(disc(amplitude=2.0), disc(amplitude=1.0))
    s = direct_radon_analytic(q, RadialGrid.symmetric(2.0, 513), AngularGrid.full_circle(360))
    grid = RasterGrid.square(64, 1.1)
    ref = rasterize(q, grid).values
    full = decomposition_report(reconstruct(s, grid), ref)
    half = decomposition_report(reconstruct(s, grid, AngularDomain.half_range()), ref)
    assert full.fa_over_fs <= 1e-3
    assert half.fa_over_fs >= 0.01
    assert half.fa_over_fs == pytest.approx(0.8673425685210949, rel=1e-6)


def test_field_invariants(gauss_sino):
    field = reconstruct(gauss_sino, [[0.0, 0.0]])
    with pytest.raises(InputError):
        ReconstructionField(field.points, field.fS, field.fA, field.terms, field.kernel, field.domain, 0.1)
    with pytest.raises(InputError):
        ReconstructionField(field.points, field.fS[:0], field.fA, field.terms, field.kernel, field.domain, field.c_n)
    assert normalization(3) == (2 * math.pi) ** -3
