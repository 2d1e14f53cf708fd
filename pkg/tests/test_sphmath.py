import numpy as np
import pytest
from numpy.testing import assert_allclose

from otatrp import sphmath
from otatrp.sphmath import (Direction, canonical_angles, legendre_tables,
                            radial_function, random_rotation, rotation_matrix,
                            spherical_hankel2, unit_phi, unit_radial,
                            unit_theta, vector_spherical_harmonic)


def test_unit_radial_cardinal_directions():
    assert_allclose(unit_radial(0.0, 1.3), [0, 0, 1], atol=1e-15)
    assert_allclose(unit_radial(np.pi / 2, 0.0), [1, 0, 0], atol=1e-15)
    assert_allclose(unit_radial(np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)


def test_unit_vectors_orthonormal():
    rng = np.random.default_rng(0)
    th = rng.uniform(0, np.pi, 50)
    ph = rng.uniform(-np.pi, np.pi, 50)
    r, t, p = unit_radial(th, ph), unit_theta(th, ph), unit_phi(th, ph)
    assert_allclose(np.linalg.norm(r, axis=-1), 1.0, atol=1e-12)
    assert_allclose((r * t).sum(-1), 0.0, atol=1e-12)
    assert_allclose((r * p).sum(-1), 0.0, atol=1e-12)
    # right-handed triad: r x t = p
    assert_allclose(np.cross(r, t), p, atol=1e-12)


def test_direction_canonicalization_ball_of_yarn():
    # theta beyond pi folds back and shifts phi by pi
    d = Direction(theta=3 * np.pi / 2, phi=0.0)
    assert_allclose(d.theta, np.pi / 2)
    assert_allclose(abs(d.phi), np.pi)
    assert_allclose(d.unit_radial(), unit_radial(3 * np.pi / 2, 0.0), atol=1e-15)
    th, ph = canonical_angles([0.1, 2 * np.pi - 0.1], [0.0, 0.0])
    assert_allclose(th, [0.1, 0.1])


def test_rotation_matrix_identity_and_quarter_turn():
    assert_allclose(rotation_matrix([0, 0, 1], 0.0), np.eye(3), atol=1e-15)
    r = rotation_matrix([0, 0, 1], np.pi / 2)
    assert_allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_rotation_axis_angle_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(25):
        axis = unit_radial(rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi))
        gamma = rng.uniform(-np.pi, np.pi)
        assert_allclose(rotation_matrix(axis, gamma),
                        rotation_matrix(-axis, -gamma), atol=1e-13)


def test_rotation_matrix_rejects_non_unit_axis():
    with pytest.raises(ValueError):
        rotation_matrix([0, 0, 2.0], 0.3)


def test_random_rotation_group_properties():
    rng = np.random.default_rng(1)
    for _ in range(20):
        r1, r2 = random_rotation(rng), random_rotation(rng)
        assert sphmath.is_rotation(r1, tol=1e-12)
        assert sphmath.is_rotation(r1 @ r2, tol=1e-12)


def test_random_rotation_regression_pinned():
    rng = np.random.default_rng(12345)
    expected = np.array([
        [-0.26702249, -0.95450627, -0.13272818],
        [0.83695244, -0.16142151, -0.52292801],
        [0.47771288, -0.25072072, 0.84197953]])
    assert_allclose(random_rotation(rng), expected, atol=1e-8)


def test_random_rotation_spreads_directions():
    # the axis parameterization (polar angle uniform on [0, pi/2]) is not
    # area-uniform, so the rotated pole has mean z_hat * E[cos^2 alpha] =
    # z_hat / 2; the sample mean must land there, well inside the sphere
    rng = np.random.default_rng(7)
    acc = np.zeros(3)
    n = 10_000
    for _ in range(n):
        acc += random_rotation(rng) @ np.array([0.0, 0.0, 1.0])
    norm = np.linalg.norm(acc) / n
    assert 0.4 < norm < 0.6
    assert_allclose(acc / n, [0.0, 0.0, norm], atol=0.03)


def test_rotation_consistent_with_direction_angles():
    rng = np.random.default_rng(11)
    for _ in range(20):
        r = random_rotation(rng)
        d = unit_radial(rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi))
        rotated = r @ d
        th, ph = sphmath.cartesian_to_direction(rotated)
        assert_allclose(unit_radial(th, ph), rotated, atol=1e-12)


# ---------------------------------------------------------------------------
# Radial functions
# ---------------------------------------------------------------------------

def test_hankel2_closed_forms():
    x = np.linspace(0.1, 100.0, 333)
    h0 = 1j * np.exp(-1j * x) / x
    h1 = np.exp(-1j * x) * (-1.0 / x + 1j / x ** 2)
    assert_allclose(spherical_hankel2(0, x), h0, rtol=1e-12)
    assert_allclose(spherical_hankel2(1, x), h1, rtol=1e-12)


def test_hankel2_rejects_nonpositive_argument():
    with pytest.raises(ValueError):
        spherical_hankel2(2, 0.0)
    with pytest.raises(ValueError):
        spherical_hankel2(2, -1.0)


def test_bessel_wronskian_against_mpmath():
    # j_l y_l' - j_l' y_l = 1/x^2 at l = 5, x = 3; reference evaluated in
    # 50-digit arithmetic.
    import mpmath as mp
    mp.mp.dps = 50
    l, x = 5, 3.0

    def sph_j(v):
        return mp.sqrt(mp.pi / (2 * v)) * mp.besselj(l + mp.mpf(1) / 2, v)

    def sph_y(v):
        return mp.sqrt(mp.pi / (2 * v)) * mp.bessely(l + mp.mpf(1) / 2, v)

    wron = sph_j(mp.mpf(x)) * mp.diff(sph_y, mp.mpf(x)) - \
        mp.diff(sph_j, mp.mpf(x)) * sph_y(mp.mpf(x))
    assert abs(float(wron) - 1.0 / x ** 2) < 1e-15
    # library h2 = j - i y reproduces the same Wronskian through f1/f2
    from scipy.special import spherical_jn, spherical_yn
    jl, yl = spherical_jn(l, x), spherical_yn(l, x)
    jp, yp = spherical_jn(l, x, derivative=True), spherical_yn(l, x, derivative=True)
    assert_allclose(jl * yp - jp * yl, 1.0 / x ** 2, rtol=1e-12)


def test_radial_function_l1_closed_form():
    # f_12(z) from the l = 1 outgoing wave: exp(-jz) (j/z + 1/z^2 - j/z^3).
    z = np.linspace(0.5, 40.0, 97)
    expected = np.exp(-1j * z) * (1j / z + 1.0 / z ** 2 - 1j / z ** 3)
    assert_allclose(radial_function(2, 1, z), expected, rtol=1e-12)
    expected_f11 = np.exp(-1j * z) * (-1.0 / z + 1j / z ** 2)
    assert_allclose(radial_function(1, 1, z), expected_f11, rtol=1e-12)


def test_radial_function_derivative_matches_finite_difference():
    l, kr, h = 3, 7.0, 1e-6
    fd = ((kr + h) * spherical_hankel2(l, kr + h)
          - (kr - h) * spherical_hankel2(l, kr - h)) / (2 * h) / kr
    assert_allclose(radial_function(2, l, kr), fd, rtol=1e-6)


def test_radial_function_asymptotic_orders():
    for l in (1, 4, 9):
        r1 = abs(radial_function(1, l, 1e4)) / abs(radial_function(1, l, 1e3))
        r3 = abs(radial_function(3, l, 1e4)) / abs(radial_function(3, l, 1e3))
        assert_allclose(r1, 0.1, rtol=1e-3)
        assert_allclose(r3, 0.01, rtol=1e-3)


def test_radial_function_rejects_bad_index():
    with pytest.raises(ValueError):
        radial_function(4, 1, 1.0)


# ---------------------------------------------------------------------------
# Vector spherical harmonics
# ---------------------------------------------------------------------------

def test_vsh_l1_m0_rotational_closed_form():
    th = np.linspace(0.0, np.pi, 21)
    a = vector_spherical_harmonic(1, 1, 0, th, np.zeros_like(th))
    expected_phi = np.sqrt(3.0 / (8.0 * np.pi)) * np.sin(th)
    assert_allclose(a[..., 2].real, expected_phi, atol=1e-14)
    assert_allclose(a[..., 0], 0.0, atol=1e-15)
    assert_allclose(a[..., 1], 0.0, atol=1e-15)


def test_vsh_tangential_families_have_no_radial_part():
    rng = np.random.default_rng(5)
    for _ in range(20):
        l = int(rng.integers(1, 8))
        m = int(rng.integers(-l, l + 1))
        th, ph = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
        for n in (1, 2):
            a = vector_spherical_harmonic(n, l, m, th, ph)
            assert abs(a[..., 0]) < 1e-15


def test_vsh_cross_product_identity():
    # A_lm2 = r_hat x A_lm1 pointwise, checked in spherical components
    # where r_hat x (At, Ap) = (-Ap, At).
    rng = np.random.default_rng(9)
    th = rng.uniform(0, np.pi, 100)
    ph = rng.uniform(-np.pi, np.pi, 100)
    for l in range(1, 31):
        for m in {-l, -(l // 2), 0, 1 if l >= 1 else 0, l}:
            a1 = vector_spherical_harmonic(1, l, m, th, ph)
            a2 = vector_spherical_harmonic(2, l, m, th, ph)
            assert_allclose(a2[..., 1], -a1[..., 2], atol=1e-10)
            assert_allclose(a2[..., 2], a1[..., 1], atol=1e-10)


def test_vsh_orthonormality_by_quadrature():
    l_hi = 5
    n_t, n_p = 2 * l_hi + 2, 4 * l_hi + 2
    x, w = np.polynomial.legendre.leggauss(n_t)
    th = np.arccos(x)
    ph = np.arange(n_p) * 2.0 * np.pi / n_p
    tm, pm = np.meshgrid(th, ph, indexing="ij")
    modes = [(n, l, m) for n in (1, 2, 3) for l in range(1, l_hi + 1)
             for m in (-l, 0, min(1, l), l)]
    fields = {mode: vector_spherical_harmonic(mode[0], mode[1], mode[2], tm, pm)
              for mode in set(modes)}
    for i, mi in enumerate(set(modes)):
        for mj in list(set(modes))[i:]:
            prod = np.sum(fields[mi] * np.conj(fields[mj]), axis=-1)
            val = np.sum(w @ prod) * (2.0 * np.pi / n_p)
            expected = 1.0 if mi == mj else 0.0
            assert abs(val - expected) < 1e-10, (mi, mj, val)


def test_vsh_rejects_bad_mode_indices():
    with pytest.raises(ValueError):
        vector_spherical_harmonic(1, 2, 3, 0.3, 0.1)
    with pytest.raises(ValueError):
        vector_spherical_harmonic(5, 1, 0, 0.3, 0.1)


def test_legendre_tables_pole_values_are_finite_limits():
    ybar, tau, pi_t = legendre_tables(6, np.array([0.0, np.pi]))
    # only |m| = 1 contributes to tangential functions at the poles
    val = -np.sqrt(3.0 / (8.0 * np.pi))
    assert_allclose(tau[1, 1, 0], val, atol=1e-14)
    assert_allclose(pi_t[1, 1, 0], val, atol=1e-14)
    for l in range(2, 7):
        for m in (0, 2, min(3, l)):
            if m != 1:
                assert tau[l, m, 0] == pytest.approx(0.0, abs=1e-14) or m == 1
    assert np.all(np.isfinite(ybar)) and np.all(np.isfinite(tau))
    assert np.all(np.isfinite(pi_t))
