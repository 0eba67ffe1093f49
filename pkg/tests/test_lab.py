import math

import numpy as np
import pytest

from canceling_lab import algebra, lab
from canceling_lab.fields import SampledField, SupportError, boundary_window, generate, zero_field
from canceling_lab.lab import (
    CertificateMismatchError,
    apply_operator,
    de_figueiredo_expand,
    directional_derivative_l1,
    planar_checks,
    verify_alvino,
    verify_certificate_inequality,
    verify_directional_theorem,
    verify_korn_sobolev,
)

INV_SQRT_PI = 1 / math.sqrt(math.pi)


def grid_field(gen, N=128, L=8.0, vector=False, **params):
    if vector:
        params.setdefault("direction", [1.0, 0.5])
    return generate(gen, 2, (N, N), L / N, **params)


def interior(arr, margin=12):
    return arr[margin:-margin, margin:-margin]


def test_constant_field_has_zero_interior_derivative():
    u = SampledField(boundary_window((64, 64)), 0.1)
    du = lab.derivative_tensor(u)
    assert np.abs(interior(du, 10)).max() == 0.0


def test_gradient_of_linear_field():
    u = SampledField(np.zeros((64, 64)), 0.1)
    x = u.mesh()
    u = u.with_values(x[0] * boundary_window(u.shape))
    au = apply_operator(algebra.preset("gradient", 2), u).values
    assert np.allclose(interior(au, 10), [1.0, 0.0], atol=1e-12)


def test_deformation_of_linear_field_is_sym_m():
    m = np.array([[0.3, -1.0], [2.0, 0.5]])
    proto = SampledField(np.zeros((64, 64)), 0.1)
    x = np.stack(proto.mesh(), axis=-1)
    u = proto.with_values((x @ m.T) * boundary_window(proto.shape)[..., None], kind="vector")
    eu = apply_operator(algebra.preset("deformation", 2), u).values
    mats = np.array([algebra.sym_coordinates_to_matrix(c, 2) for c in interior(eu, 10).reshape(-1, 3)])
    assert np.allclose(mats, 0.5 * (m + m.T), atol=1e-12)


def test_operator_rejects_unsupported_field():
    u = SampledField(np.ones((16, 16)), 0.1)
    with pytest.raises(SupportError):
        apply_operator(algebra.preset("gradient", 2), u)


def test_directional_l1_of_gaussian_matches_closed_form():
    u = grid_field("gaussian_bump", N=400, L=10.0)
    val = directional_derivative_l1(u, [1.0, 0.0], [1.0])
    # int |d1 exp(-|x|^2/2)| = 2 * sqrt(2 pi)
    assert val == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-3)
    doubled = u.with_values(3.0 * u.values)
    assert directional_derivative_l1(doubled, [1.0, 0.0], [1.0]) == pytest.approx(3 * val, rel=1e-14)


def test_directional_theorem_zero_field_is_degenerate():
    rep = verify_directional_theorem(zero_field(2, (16, 16), 0.5), lab.alvino_family(2))
    assert rep.degenerate and rep.ratio is None and rep.csv_row()[3] == "degenerate"


def test_directional_theorem_gaussian_canonical_family():
    ratios = [verify_directional_theorem(grid_field("gaussian_bump", N=N), lab.alvino_family(2)).ratio
              for N in (128, 256)]
    assert abs(ratios[1] / ratios[0] - 1) < 0.05
    # canonical family on a radial Gaussian: ratio = sqrt(pi)/2
    assert ratios[1] == pytest.approx(math.sqrt(math.pi) / 2, rel=2e-3)


def test_directional_rhs_bilinear_rescaling():
    u = grid_field("gaussian_bump", N=64, vector=True)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((2, 2, 2))
    v = rng.standard_normal((2, 2, 2))
    fam = lab.DirectionalFamily(w, v)
    base = verify_directional_theorem(u, fam, with_gamma=False).rhs
    for lam in (2.0, 0.25):
        w2, v2 = w.copy(), v.copy()
        w2[1, 0] *= lam
        v2[1, 0] /= lam
        assert verify_directional_theorem(u, lab.DirectionalFamily(w2, v2), with_gamma=False).rhs == base
    w3, v3 = w.copy(), v.copy()
    w3[0, 1] *= 3.0
    v3[0, 1] /= 3.0
    alt = verify_directional_theorem(u, lab.DirectionalFamily(w3, v3), with_gamma=False).rhs
    assert alt == pytest.approx(base, rel=1e-13)


def test_scale_invariance_of_ratios():
    u = grid_field("gaussian_bump")
    for lam in (0.5, 2.0):
        assert verify_alvino(u.rescaled(lam)).ratio == pytest.approx(verify_alvino(u).ratio, rel=1e-12)
    # resampled: a Gaussian of width 1/lam on the same grid
    wide = verify_alvino(grid_field("gaussian_bump", sigma=1.0)).ratio
    narrow = verify_alvino(grid_field("gaussian_bump", sigma=0.5)).ratio
    assert narrow == pytest.approx(wide, rel=0.02)


def test_translation_is_bit_exact():
    u = grid_field("mollified_ball_indicator", vector=True, radius=2.0, width=0.5)
    s = u.shifted((5, -7))
    assert verify_korn_sobolev(s).lhs == verify_korn_sobolev(u).lhs
    assert verify_korn_sobolev(s).rhs == verify_korn_sobolev(u).rhs


def test_alvino_gaussian_and_balls_against_radial_value():
    # for radial nonincreasing profiles both sides reduce to int |u'| dr: ratio 1/sqrt(pi) in the plane
    g = [verify_alvino(grid_field("gaussian_bump", N=N)).ratio for N in (128, 256)]
    assert abs(g[1] / g[0] - 1) < 0.05 and g[1] == pytest.approx(INV_SQRT_PI, rel=1e-3)
    for width in (1.0, 0.5, 0.25):
        r = verify_alvino(grid_field("mollified_ball_indicator", N=256, radius=2.0, width=width)).ratio
        assert r == pytest.approx(INV_SQRT_PI, rel=0.02)
    assert verify_alvino(zero_field(2, (16, 16), 0.5)).degenerate


def test_korn_examples():
    rigid = generate("rigid_motion_windowed", 2, (128, 128), 8 / 128, radius=2.5, width=1.0)
    du = lab.derivative_tensor(rigid)
    eu = lab.symmetric_gradient(du)
    r = np.sqrt(sum(c ** 2 for c in rigid.mesh()))
    # sym(R) = 0, so Eu lives where the cutoff varies
    assert np.abs(eu[r < 1.2]).max() < 1e-12
    assert np.abs(eu[(r > 1.6) & (r < 2.4)]).max() > 0.1
    assert math.isfinite(verify_korn_sobolev(rigid).ratio)
    grad = generate("gaussian_gradient", 2, (128, 128), 8 / 128)
    assert math.isfinite(verify_korn_sobolev(grad).ratio)
    assert verify_korn_sobolev(zero_field(2, (16, 16), 0.5, dim_v=2)).degenerate


def test_de_figueiredo_expansion():
    e = np.eye(2)
    fam = de_figueiredo_expand(e, np.ones(2))
    assert fam.ell == 1
    fam = de_figueiredo_expand(np.array([[1.0, 0], [0, 1.0], [1, 1.0]]),
                               np.array([[1.0, 0], [0, 1.0], [1, 1.0]]))
    assert fam.ell == 3
    with pytest.raises(algebra.PreconditionError, match=r"\[1, 2\]"):
        de_figueiredo_expand(np.array([[1.0, 0], [1.0, 0], [0, 1.0]]), np.eye(3)[:, :2])
    u = grid_field("gaussian_bump", vector=True)
    assert math.isfinite(verify_directional_theorem(u, fam).ratio)


def test_gradient_certificate_reduces_to_alvino_bit_for_bit():
    op = algebra.preset("gradient", 2)
    cert = algebra.construct_certificate(op)
    for u in (grid_field("gaussian_bump"), grid_field("mollified_ball_indicator", radius=1.5, width=0.75)):
        a = verify_alvino(u)
        c = verify_certificate_inequality(op, cert, u)
        assert (a.lhs, a.rhs) == (c.lhs, c.rhs)


def test_deformation_certificate_inequality_and_tampering():
    op = algebra.preset("deformation", 2)
    cert = algebra.construct_certificate(op)
    u = grid_field("gaussian_bump", vector=True)
    rep = verify_certificate_inequality(op, cert, u)
    assert math.isfinite(rep.ratio) and rep.extras["identity_residual"] < 1e-12
    assert rep.ratio == pytest.approx(verify_korn_sobolev(u).ratio, rel=1e-12)
    bad = algebra.CancelingCertificate(cert.w, cert.v, cert.e.copy(), cert.xi)
    bad.e[0, 0] = 0.0
    with pytest.raises(CertificateMismatchError):
        verify_certificate_inequality(op, bad, u)


def test_planar_checks_examples():
    phi = grid_field("gaussian_bump").values
    u = SampledField(np.stack([phi, np.zeros_like(phi)], -1), 8 / 128, "vector")
    rep = planar_checks(u)
    assert rep.holds
    for name in ("b_diagonal", "b_antidiagonal", "c_fibre_x2", "c_fibre_x1"):
        it = rep.item(name)
        assert it.lhs < it.rhs
    same = planar_checks(u.with_values(np.stack([phi, phi], -1)))
    assert same.holds
    zero = planar_checks(zero_field(2, (32, 32), 0.25, dim_v=2))
    assert all(it.lhs == 0.0 and it.rhs == 0.0 for it in zero.items)


def test_planar_fibre_estimate_against_fine_grid():
    # for u1 = phi, int sup_x2 |phi| dx1 -> int exp(-x1^2/2) = sqrt(2 pi) and int |d2 phi| -> 2 sqrt(2 pi)
    phi = grid_field("gaussian_bump", N=400, L=10.0).values
    u = SampledField(np.stack([phi, np.zeros_like(phi)], -1), 10 / 400, "vector")
    it = planar_checks(u).item("c_fibre_x2")
    assert it.lhs == pytest.approx(math.sqrt(2 * math.pi), rel=1e-3)
    assert it.rhs == pytest.approx(2 * math.sqrt(2 * math.pi), rel=1e-3)
