import numpy as np
import pytest
from numpy.testing import assert_allclose

from otatrp import sources
from otatrp.sources import (BeamGrid, ElementModel, HALF_WAVE_DIPOLE,
                            HERTZ_DIPOLE, ISOTROPIC, PointSourceArray,
                            array_factor, correlated_weights,
                            cosine_taper_element, dipole_array, eirp_pattern,
                            farfield_pattern, max_square_rows,
                            mutual_power_trp, rotated_pattern,
                            steering_weights, sweep_average_pattern,
                            uniform_quadratic_array)
from otatrp.sphmath import random_rotation, rotation_matrix

K = 2.0 * np.pi


def dense_trp(evaluator, n_theta=200, n_phi=400):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    tm, pm = np.meshgrid(np.arccos(x), np.arange(n_phi) * 2 * np.pi / n_phi,
                         indexing="ij")
    return float(np.sum(w @ evaluator(tm, pm)) * (2 * np.pi / n_phi)
                 / (4 * np.pi))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def test_quadratic_array_square_corners():
    arr = uniform_quadratic_array(1.0, 2, K)
    # four sources at the corners of a square with side sqrt(2)/2
    assert arr.n_sources == 4
    side = np.sqrt(2.0) / 2.0
    expect = {(0.0, -side / 2, -side / 2), (0.0, -side / 2, side / 2),
              (0.0, side / 2, -side / 2), (0.0, side / 2, side / 2)}
    got = {tuple(np.round(p, 12)) for p in arr.positions}
    assert got == {tuple(np.round(e, 12)) for e in expect}


def test_quadratic_array_inscribed_in_sphere():
    for d, n in [(4.0, 5), (10.0, 12)]:
        arr = uniform_quadratic_array(d, n, K)
        assert_allclose(arr.r_sph, d / 2.0, rtol=1e-12)


def test_quadratic_array_spacing_limit():
    # D = 10 wavelengths: 15 rows give spacing 0.505, 16 rows 0.471 < 1/2
    assert max_square_rows(10.0, K) == 15
    uniform_quadratic_array(10.0, 15, K)
    with pytest.raises(ValueError, match="spacing"):
        uniform_quadratic_array(10.0, 16, K)


def test_dipole_array_centered():
    arr = dipole_array(4, 4, 0.5, 0.5, K)
    assert_allclose(arr.positions.mean(axis=0), [0, 0, 0], atol=1e-15)
    assert_allclose(arr.r_sph, np.hypot(0.75, 0.75), rtol=1e-12)


# ---------------------------------------------------------------------------
# Correlated weights
# ---------------------------------------------------------------------------

def test_correlated_weights_fully_correlated():
    rng = np.random.default_rng(0)
    w = correlated_weights(100, 1.0, rng)
    assert_allclose(w, np.ones(100), atol=1e-15)


def test_correlated_weights_moments():
    rng = np.random.default_rng(1)
    n = 100_000
    for rho in (0.0, 0.2):
        w = correlated_weights(n, rho, rng)
        assert abs(np.mean(np.abs(w) ** 2) - 1.0) < 0.02
        # cross moment E[w_m* w_n] for m != n equals |E w|^2 = rho
        cross = abs(np.mean(w)) ** 2
        assert abs(cross - rho) < 0.02


def test_correlated_weights_rejects_bad_rho():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        correlated_weights(4, 1.5, rng)
    with pytest.raises(ValueError):
        correlated_weights(4, -0.1, rng)


# ---------------------------------------------------------------------------
# Element models
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("elem,tol", [
    (ISOTROPIC, 1e-12), (HERTZ_DIPOLE, 1e-10), (HALF_WAVE_DIPOLE, 1e-6),
    # hemisphere-limited patterns have a terminator kink; quadrature
    # converges slowly there
    (cosine_taper_element(0.5), 1e-4),
    (cosine_taper_element(1.0), 1e-6),
    (cosine_taper_element(2.0), 1e-6)])
def test_element_patterns_normalized_to_unit_trp(elem, tol):
    assert abs(dense_trp(elem.power_pattern, 400, 800) - 1.0) < tol


def test_half_wave_dipole_pattern_zero_on_axis():
    f_t, _ = HALF_WAVE_DIPOLE.field_pattern(np.array([0.0, np.pi]), 0.0)
    assert_allclose(f_t, 0.0, atol=1e-12)


def test_unknown_element_rejected():
    with pytest.raises(ValueError):
        ElementModel("banana").power_pattern(0.3, 0.1)


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------

def test_single_isotropic_source_unit_eirp():
    arr = PointSourceArray([[0, 0, 0]], [1.0], K)
    th = np.linspace(0, np.pi, 7)
    assert_allclose(eirp_pattern(arr, ISOTROPIC, th, th), 1.0, atol=1e-14)


def test_two_element_broadside_and_null():
    # in-phase isotropic pair half a wavelength apart on z
    arr = PointSourceArray([[0, 0, -0.25], [0, 0, 0.25]], [1.0, 1.0], K)
    assert_allclose(eirp_pattern(arr, ISOTROPIC, np.pi / 2, 0.3), 4.0,
                    rtol=1e-13)
    assert abs(eirp_pattern(arr, ISOTROPIC, 0.0, 0.0)) < 1e-13


def test_mutual_power_oracle_matches_dense_quadrature():
    rng = np.random.default_rng(3)
    arr = uniform_quadratic_array(5.0, 6, K)
    arr = arr.with_weights(correlated_weights(36, 0.3, rng))
    arr = arr.rotated(random_rotation(rng))
    dense = dense_trp(lambda t, p: eirp_pattern(arr, ISOTROPIC, t, p))
    assert_allclose(mutual_power_trp(arr), dense, rtol=1e-6)


def test_mutual_power_rotation_invariant():
    rng = np.random.default_rng(4)
    arr = uniform_quadratic_array(4.0, 4, K).with_weights(
        correlated_weights(16, 0.1, rng))
    base = mutual_power_trp(arr)
    for _ in range(5):
        assert_allclose(mutual_power_trp(arr.rotated(random_rotation(rng))),
                        base, rtol=1e-12)


def test_rotated_pattern_identity_and_quarter_turn():
    rng = np.random.default_rng(5)
    arr = uniform_quadratic_array(3.0, 4, K).with_weights(
        correlated_weights(16, 0.0, rng))
    th = rng.uniform(0.1, np.pi - 0.1, 40)
    ph = rng.uniform(-np.pi, np.pi, 40)
    assert_allclose(rotated_pattern(arr, np.eye(3), ISOTROPIC, th, ph),
                    eirp_pattern(arr, ISOTROPIC, th, ph), rtol=1e-13)
    # quarter turn about z maps the pattern value at phi to phi + pi/2
    rz = rotation_matrix([0, 0, 1], np.pi / 2)
    assert_allclose(rotated_pattern(arr, rz, ISOTROPIC, th, ph + np.pi / 2),
                    eirp_pattern(arr, ISOTROPIC, th, ph), rtol=1e-10)


def test_dense_trp_rotation_invariant_isotropic():
    rng = np.random.default_rng(6)
    arr = uniform_quadratic_array(4.0, 5, K).with_weights(
        correlated_weights(25, 0.2, rng))
    t0 = dense_trp(lambda t, p: eirp_pattern(arr, ISOTROPIC, t, p))
    rot = arr.rotated(random_rotation(rng))
    t1 = dense_trp(lambda t, p: eirp_pattern(rot, ISOTROPIC, t, p))
    assert_allclose(t1, t0, rtol=1e-4)


def test_fully_correlated_broadside_peak():
    n = 5
    arr = dipole_array(n, n, 0.5, 0.5, K)
    assert_allclose(eirp_pattern(arr, ISOTROPIC, np.pi / 2, 0.0), n ** 4,
                    rtol=1e-12)  # N^2 elements in phase -> (N^2)^2


def test_farfield_pattern_polarization():
    arr = dipole_array(2, 2, 0.5, 0.5, K)
    f_t, f_p = farfield_pattern(arr, HERTZ_DIPOLE, 1.0, 0.5)
    assert abs(f_p) == 0.0
    af = array_factor(arr, 1.0, 0.5)
    assert_allclose(f_t, af * np.sqrt(1.5) * np.sin(1.0), rtol=1e-12)


# ---------------------------------------------------------------------------
# Beam steering
# ---------------------------------------------------------------------------

def test_beam_grid_default_raster():
    grid = BeamGrid()
    assert grid.n_beams == 45
    assert grid.spacing_deg == 10.0
    center = grid.beam_direction(22)  # middle of the 9 x 5 raster
    assert_allclose(center, [1, 0, 0], atol=1e-14)


def test_beam_grid_invariant_enforced():
    with pytest.raises(ValueError):
        BeamGrid(n_az=9, n_el=5, az_span_deg=90.0, el_span_deg=40.0,
                 spacing_deg=10.0)


def test_center_beam_uniform_phase():
    arr = dipole_array(4, 4, 0.5, 0.5, K)
    w = steering_weights(BeamGrid(), 22, arr.positions, K)
    assert_allclose(w, np.ones(16), atol=1e-12)


def test_steering_weights_index_range():
    arr = dipole_array(2, 2, 0.5, 0.5, K)
    with pytest.raises(ValueError):
        steering_weights(BeamGrid(), 45, arr.positions, K)


def test_harmonic_beam_squint():
    # reusing fundamental weights at the second harmonic moves the beam
    # peak away from the commanded direction
    grid = BeamGrid()
    arr = dipole_array(8, 8, 0.5, 0.5, K)
    beam = 40  # steered corner beam
    w = steering_weights(grid, beam, arr.positions, K)
    arr_h2 = PointSourceArray(arr.positions, arr.weights, 2 * K)
    th = np.linspace(0.02, np.pi - 0.02, 250)
    ph = np.linspace(-np.pi, np.pi, 500)
    tm, pm = np.meshgrid(th, ph, indexing="ij")
    pat = sweep_average_pattern(arr_h2, cosine_taper_element(1.0), [w], tm, pm)
    i, j = np.unravel_index(np.argmax(pat), pat.shape)
    from otatrp.sphmath import unit_radial
    peak = unit_radial(tm[i, j], pm[i, j])
    deviation = np.degrees(np.arccos(np.clip(peak @ grid.beam_direction(beam),
                                             -1, 1)))
    assert deviation > 2.0


def test_sweep_average_single_beam_is_that_beam():
    arr = dipole_array(3, 3, 0.5, 0.5, K)
    w = steering_weights(BeamGrid(), 7, arr.positions, K)
    th = np.linspace(0.1, np.pi - 0.1, 11)
    single = sweep_average_pattern(arr, ISOTROPIC, [w], th, th)
    direct = np.abs(array_factor(arr.with_weights(w), th, th)) ** 2
    assert_allclose(single, direct, rtol=1e-12)


def test_sweep_average_trp_linearity():
    grid = BeamGrid()
    arr = dipole_array(4, 4, 0.5, 0.5, K)
    weights = [steering_weights(grid, b, arr.positions, K) for b in (0, 7, 31)]
    elem = cosine_taper_element(1.0)
    avg = dense_trp(lambda t, p: sweep_average_pattern(arr, elem, weights, t, p))
    singles = [dense_trp(lambda t, p, wv=w: sweep_average_pattern(
        arr, elem, [wv], t, p)) for w in weights]
    assert_allclose(avg, np.mean(singles), rtol=1e-10)


def test_sweep_average_requires_beams():
    arr = dipole_array(2, 2, 0.5, 0.5, K)
    with pytest.raises(ValueError):
        sweep_average_pattern(arr, ISOTROPIC, [], 0.3, 0.2)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def test_array_json_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    arr = uniform_quadratic_array(3.0, 4, K).with_weights(
        correlated_weights(16, 0.4, rng))
    path = tmp_path / "array.json"
    arr.save(path)
    back = PointSourceArray.load(path)
    assert np.array_equal(back.positions, arr.positions)
    assert np.array_equal(back.weights, arr.weights)
    assert back.k == arr.k


def test_array_validation():
    with pytest.raises(ValueError):
        PointSourceArray(np.zeros((0, 3)), np.zeros(0, dtype=complex), K)
    with pytest.raises(ValueError):
        PointSourceArray([[0, 0, 0]], [np.nan], K)
    with pytest.raises(ValueError):
        PointSourceArray([[0, 0, 0]], [1.0, 2.0], K)
