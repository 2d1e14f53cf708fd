"""Near-field radial power flux, probe modeling and distance criteria.

The true radial power flux uses only tangential field components,
``Re[r_hat . (E_t x H_t*)]``; the far-field shortcut ``|E_t|^2 / Z0``
becomes exact as kr grows.  A finite measurement antenna is modeled as a
flat rectangular aperture tangent to the measurement sphere, sensing the
reaction integral of the incident E field with a separable current taper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphmath import unit_radial, unit_theta, unit_phi, cartesian_to_direction
from .swe import (SweCoefficients, FieldSample, Z0, evaluate_fields, farfield,
                  back_propagate, trp_of)


def flux_true(fs: FieldSample) -> np.ndarray:
    """True radial power flux density, W/m^2 (tangential fields only)."""
    return np.real(fs.e_theta * np.conj(fs.h_phi)
                   - fs.e_phi * np.conj(fs.h_theta))


def flux_farfield_approx(fs: FieldSample) -> np.ndarray:
    """Far-field power flux approximation |E_t|^2 / Z0, W/m^2."""
    return (np.abs(fs.e_theta) ** 2 + np.abs(fs.e_phi) ** 2) / Z0


def flux_sphere_integral(coeffs: SweCoefficients, r: float,
                         approx: bool = False, n_theta: int = None,
                         n_phi: int = None) -> float:
    """Surface integral of radial flux over the sphere of radius r, watts.

    Uses a Gauss-Legendre (cos theta) x uniform (phi) rule sized so the
    band-limited flux of an order-L expansion is integrated exactly.
    """
    l_max = coeffs.l_max
    n_theta = n_theta or 2 * l_max + 2
    n_phi = n_phi or 2 * l_max + 2
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
    tm, pm = np.meshgrid(theta, phi, indexing="ij")
    fs = evaluate_fields(coeffs, r, tm, pm)
    s = flux_farfield_approx(fs) if approx else flux_true(fs)
    return float(np.sum(w @ s) * (2.0 * np.pi / n_phi) * r * r)


def approximation_error_vs_distance(coeffs: SweCoefficients, radii,
                                    delta_r: float = None) -> np.ndarray:
    """|TRP error| in dB of the far-field flux shortcut at each radius.

    Radii inside the exclusion zone r <= source_radius + delta_r (default
    one wavelength) are rejected; the expansion amplifies unphysically
    there.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if delta_r is None:
        delta_r = coeffs.wavelength
    r_min = coeffs.source_radius + delta_r
    if np.any(radii < r_min * (1.0 - 1e-12)):
        raise ValueError(
            f"radius inside the exclusion zone: need r >= {r_min!r}")
    errs = np.empty(len(radii))
    for i, r in enumerate(radii):
        trp_true = flux_sphere_integral(coeffs, r, approx=False)
        trp_ff = flux_sphere_integral(coeffs, r, approx=True)
        errs[i] = abs(10.0 * math.log10(trp_ff / trp_true))
    return errs


def back_propagation_error_vs_distance(coeffs: SweCoefficients,
                                       radii) -> np.ndarray:
    """|TRP change| in dB caused by the adaptive truncation l <= k r."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    total = trp_of(coeffs)
    errs = np.empty(len(radii))
    for i, r in enumerate(radii):
        _, dropped = back_propagate(coeffs, r)
        errs[i] = abs(10.0 * math.log10(max(total - dropped, 1e-300) / total))
    return errs


# ---------------------------------------------------------------------------
# Measurement antenna model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeModel:
    """Flat rectangular aperture probe, boresight toward the EUT.

    The equivalent aperture current is polarized along the local theta
    direction, uniform along the aperture height and either uniform or
    half-cosine tapered across the width (an open-waveguide-like taper).
    The height defaults to a quarter of the width, standing in for the
    vertical taper of a flared horn; only the width enters the distance
    criteria.  ``beta`` is the beamwidth constant HPBW = beta lambda /
    width.
    """

    width: float
    height: float = None
    taper: str = "cosine"
    beta: float = 1.2

    def __post_init__(self):
        if self.height is None:
            object.__setattr__(self, "height", self.width / 4.0)
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError("probe aperture dimensions must be positive")
        if self.taper not in ("uniform", "cosine"):
            raise ValueError(f"unknown taper {self.taper!r}")

    def taper_profile(self, x) -> np.ndarray:
        """Current amplitude across the width coordinate x in [-w/2, w/2]."""
        x = np.asarray(x, dtype=float)
        if self.taper == "uniform":
            return np.ones_like(x)
        return np.cos(np.pi * x / self.width)

    def taper_moment(self) -> float:
        """Area integral of the taper (effective-length-like constant)."""
        if self.taper == "uniform":
            return self.width * self.height
        return (2.0 / np.pi) * self.width * self.height

    def quadrature_nodes(self, wavelength: float) -> tuple:
        """Gauss-Legendre aperture mesh (x1, x2, w2d), >= ceil(8 w/lambda)^2."""
        n_w = max(4, int(math.ceil(8.0 * self.width / wavelength)))
        n_h = max(4, int(math.ceil(8.0 * self.height / wavelength)))
        x1, w1 = np.polynomial.legendre.leggauss(n_w)
        x2, w2 = np.polynomial.legendre.leggauss(n_h)
        x1 = 0.5 * self.width * x1
        w1 = 0.5 * self.width * w1
        x2 = 0.5 * self.height * x2
        w2 = 0.5 * self.height * w2
        xx1, xx2 = np.meshgrid(x1, x2, indexing="ij")
        ww = np.outer(w1, w2)
        return xx1.ravel(), xx2.ravel(), ww.ravel()


def probe_voltage(probe: ProbeModel, coeffs: SweCoefficients, r0: float,
                  theta: float, phi: float,
                  delta_r: float = None) -> complex:
    """Uncalibrated probe voltage at one position on the sphere.

    The aperture lies in the tangent plane at (r0, theta, phi), width along
    the local phi direction and height along theta, and the voltage is the
    taper-weighted aperture integral of the incident E field projected on
    the probe polarization.
    """
    if delta_r is None:
        delta_r = coeffs.wavelength
    if r0 < (coeffs.source_radius + delta_r) * (1.0 - 1e-12):
        raise ValueError(
            f"probe aperture inside the exclusion zone: r0 = {r0!r} must "
            f"reach {coeffs.source_radius + delta_r!r}")
    center = r0 * unit_radial(theta, phi)
    e_w = unit_phi(theta, phi)
    e_h = unit_theta(theta, phi)
    x1, x2, ww = probe.quadrature_nodes(coeffs.wavelength)
    pts = center[None, :] + np.outer(x1, e_w) + np.outer(x2, e_h)
    r_pts = np.linalg.norm(pts, axis=1)
    th_pts, ph_pts = cartesian_to_direction(pts)
    fs = evaluate_fields(coeffs, r_pts, th_pts, ph_pts)
    e_cart = (fs.e_r[:, None] * unit_radial(th_pts, ph_pts)
              + fs.e_theta[:, None] * unit_theta(th_pts, ph_pts)
              + fs.e_phi[:, None] * unit_phi(th_pts, ph_pts))
    e_pol = e_cart @ e_h
    return complex(np.sum(ww * probe.taper_profile(x1) * e_pol))


def calibrate_probe(probe: ProbeModel, reference: SweCoefficients,
                    far_radius: float, n_theta: int = None,
                    n_phi: int = None) -> float:
    """Constant c such that 4 pi r^2 <c |V|^2> recovers the reference TRP.

    Calibration happens in the far field (the radius must exceed both the
    Fraunhofer distance of the reference source and the probe's own minimum
    test distance), where the aperture field is a plane wave and the
    voltage reduces to the taper moment times the incident polarized field.
    """
    lam = reference.wavelength
    d = 2.0 * reference.source_radius
    r_ff = 2.0 * d * d / lam if d > 0.0 else 0.0
    r_min = min_distance_resolution(reference.source_radius, lam, probe.width, lam)
    need = max(r_ff, r_min)
    if far_radius < need * (1.0 - 1e-12):
        raise ValueError(
            f"calibration radius {far_radius!r} below the far-field/probe "
            f"minimum {need!r}")
    l_max = reference.l_max
    n_theta = n_theta or 2 * l_max + 2
    n_phi = n_phi or 2 * l_max + 2
    x, w = np.polynomial.legendre.leggauss(n_theta)
    tm, pm = np.meshgrid(np.arccos(x), np.arange(n_phi) * 2.0 * np.pi / n_phi,
                         indexing="ij")
    f_t, _ = farfield(reference, tm, pm)
    # |E_pol|^2 at the calibration radius; probes are theta-polarized.
    e_pol_sq = Z0 * np.abs(f_t) ** 2 / (4.0 * np.pi * far_radius ** 2)
    v_sq = probe.taper_moment() ** 2 * e_pol_sq
    mean_v_sq = float(np.sum(w @ v_sq) * (2.0 * np.pi / n_phi) / (4.0 * np.pi))
    if mean_v_sq <= 0.0:
        raise ValueError("probe has no response to the reference source")
    return trp_of(reference) / (4.0 * np.pi * far_radius ** 2 * mean_v_sq)


def min_distance_hpbw(r_sph: float, width: float, wavelength: float,
                      beta: float = 1.2) -> float:
    """Minimum test distance from the beamwidth coverage criterion."""
    _require_positive(r_sph=r_sph, width=width, wavelength=wavelength, beta=beta)
    return (r_sph / beta) * width / (wavelength / 2.0)


def min_distance_resolution(r_sph: float, delta_r: float, width: float,
                            wavelength: float) -> float:
    """Minimum test distance resolving the source's angular detail.

    Slightly stricter than the beamwidth criterion for beta near 1.2, so
    this is the bound used by default throughout the probe studies.
    """
    _require_positive(r_sph=r_sph, width=width, wavelength=wavelength)
    if delta_r < 0.0:
        raise ValueError("delta_r must be >= 0")
    return (r_sph + delta_r) * width / (wavelength / 2.0)


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if value <= 0.0:
            raise ValueError(f"{name} must be positive, got {value!r}")


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

#: Aperture efficiency of the cosine-by-uniform taper.
COSINE_APERTURE_EFFICIENCY = 8.0 / np.pi ** 2


@dataclass
class LinkBudgetRow:
    r: float
    width: float
    a_eff: float
    pacc_avg_w: float
    pacc_max_w: float
    distance_ok: bool


def link_budget(trp: float, r_sph: float, delta_r: float, wavelength: float,
                radii, policy="optimal", peak_directivity: float = 100.0,
                aperture_efficiency: float = COSINE_APERTURE_EFFICIENCY) -> list:
    """Accepted-power table versus test distance for a probe sizing policy.

    ``policy`` is either ``"optimal"`` (square probe grown with distance,
    width (lambda/2) r / (R + delta_r), the largest width satisfying the
    resolution criterion) or a fixed width in meters.  The mean accepted
    power is A_eff TRP / (4 pi r^2); the peak uses a schematic source model
    whose peak flux is constant inside the Fraunhofer distance 2 (2R)^2 /
    lambda and directivity-limited beyond it.  Rows below the policy's
    minimum test distance are flagged rather than rejected.
    """
    _require_positive(trp=trp, r_sph=r_sph, wavelength=wavelength)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    r_break = 2.0 * (2.0 * r_sph) ** 2 / wavelength
    rows = []
    for r in radii:
        if policy == "optimal":
            width = (wavelength / 2.0) * r / (r_sph + delta_r)
        else:
            width = float(policy)
        a_eff = aperture_efficiency * width * width
        ok = r >= min_distance_resolution(r_sph, delta_r, width, wavelength) * (1.0 - 1e-12)
        s_avg = trp / (4.0 * np.pi * r * r)
        s_peak = trp * peak_directivity / (4.0 * np.pi * max(r, r_break) ** 2)
        rows.append(LinkBudgetRow(
            r=float(r), width=width, a_eff=a_eff,
            pacc_avg_w=a_eff * s_avg, pacc_max_w=a_eff * s_peak,
            distance_ok=bool(ok)))
    return rows
