"""Synthetic emission sources: point-source arrays, dipole elements, beams.

Arrays live in the yz-plane with broadside along +x unless rotated.  All
element power patterns are normalized so that a unit-weight element radiates
unit total power; array EIRP patterns are then ``|array factor|^2`` times
the element power pattern.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import sici

from .sphmath import unit_radial


@dataclass
class PointSourceArray:
    """Discrete radiators: positions (N, 3) meters, complex weights sqrt(W)."""

    positions: np.ndarray
    weights: np.ndarray
    k: float

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if len(self.weights) != len(self.positions):
            raise ValueError("one weight per source required")
        if len(self.weights) < 1:
            raise ValueError("at least one source required")
        if not (np.all(np.isfinite(self.positions))
                and np.all(np.isfinite(self.weights))):
            raise ValueError("positions and weights must be finite")
        if self.k <= 0.0:
            raise ValueError("wavenumber must be positive")

    @property
    def n_sources(self) -> int:
        return len(self.weights)

    @property
    def r_sph(self) -> float:
        """Radius of the minimum origin-centered enclosing sphere."""
        return float(np.max(np.linalg.norm(self.positions, axis=1)))

    @property
    def r_cyl(self) -> float:
        """Radius of the minimum z-axis-centered enclosing cylinder."""
        return float(np.max(np.linalg.norm(self.positions[:, :2], axis=1)))

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k

    def rotated(self, rot: np.ndarray) -> "PointSourceArray":
        """Array with positions mapped through the rotation matrix."""
        return PointSourceArray(self.positions @ np.asarray(rot).T,
                                self.weights.copy(), self.k)

    def with_weights(self, weights) -> "PointSourceArray":
        return PointSourceArray(self.positions.copy(), weights, self.k)

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "positions": [[float(x) for x in row] for row in self.positions],
            "weights": [[float(w.real), float(w.imag)] for w in self.weights],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PointSourceArray":
        weights = [complex(re, im) for re, im in data["weights"]]
        return cls(np.asarray(data["positions"], dtype=float),
                   np.asarray(weights), float(data["k"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "PointSourceArray":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Element models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementModel:
    """Radiating element pattern, normalized to unit TRP per unit weight.

    Variants: ``isotropic``, ``hertz-dipole`` (z-oriented), ``half-wave-
    dipole`` (z-oriented) and ``cosine-taper`` (power cos(psi)^2q around the
    +x array normal, zero in the back hemisphere; a documented stand-in for
    embedded element patterns).  Field patterns are linearly polarized along
    theta_hat.
    """

    variant: str
    q: float = 1.0

    def field_pattern(self, theta, phi) -> tuple:
        """Complex (f_theta, f_phi) with |f|^2 the element EIRP."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        shape = np.broadcast(theta, phi).shape
        f_phi = np.zeros(shape)
        if self.variant == "isotropic":
            f_theta = np.ones(shape)
        elif self.variant == "hertz-dipole":
            f_theta = np.sqrt(1.5) * np.sin(theta) * np.ones(shape)
        elif self.variant == "half-wave-dipole":
            st = np.sin(theta) * np.ones(shape)
            num = np.cos(0.5 * np.pi * np.cos(theta)) * np.ones(shape)
            f_theta = np.zeros(shape)
            ok = st > 1e-9
            f_theta[ok] = num[ok] / st[ok]
            f_theta *= np.sqrt(_halfwave_peak_directivity())
        elif self.variant == "cosine-taper":
            cos_psi = np.sin(theta) * np.cos(phi) * np.ones(shape)
            f_theta = np.where(
                cos_psi > 0.0,
                np.sqrt(2.0 * (2.0 * self.q + 1.0)) * np.maximum(cos_psi, 0.0) ** self.q,
                0.0)
        else:
            raise ValueError(f"unknown element variant {self.variant!r}")
        return f_theta.astype(complex), f_phi.astype(complex)

    def power_pattern(self, theta, phi) -> np.ndarray:
        """Element EIRP pattern for unit weight (dimensionless gain)."""
        f_t, f_p = self.field_pattern(theta, phi)
        return np.abs(f_t) ** 2 + np.abs(f_p) ** 2


def _halfwave_peak_directivity() -> float:
    # 4 / Cin(2 pi) with Cin the entire cosine integral; about 1.6409.
    _, ci = sici(2.0 * np.pi)
    cin = np.euler_gamma + np.log(2.0 * np.pi) - ci
    return 4.0 / cin


ISOTROPIC = ElementModel("isotropic")
HERTZ_DIPOLE = ElementModel("hertz-dipole")
HALF_WAVE_DIPOLE = ElementModel("half-wave-dipole")


def cosine_taper_element(q: float = 1.0) -> ElementModel:
    return ElementModel("cosine-taper", q=q)


# ---------------------------------------------------------------------------
# Array constructors
# ---------------------------------------------------------------------------

def uniform_quadratic_array(diameter: float, n_row: int, k: float) -> PointSourceArray:
    """Square n_row x n_row unit-weight grid in the yz-plane, inscribed in a
    sphere of the given diameter.

    The element spacing is ``diameter / (sqrt(2) (n_row - 1))`` and must not
    fall below half a wavelength.
    """
    if n_row < 2:
        raise ValueError("a quadratic array needs n_row >= 2")
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    wavelength = 2.0 * np.pi / k
    spacing = diameter / (np.sqrt(2.0) * (n_row - 1))
    if spacing < 0.5 * wavelength * (1.0 - 1e-12):
        raise ValueError(
            f"element spacing {spacing / wavelength:.4f} wavelengths is below "
            f"the half-wavelength minimum (n_row = {n_row}, D = "
            f"{diameter / wavelength:g} wavelengths)")
    side = diameter / np.sqrt(2.0)
    coords = np.linspace(-side / 2.0, side / 2.0, n_row)
    yy, zz = np.meshgrid(coords, coords, indexing="ij")
    pos = np.column_stack([np.zeros(yy.size), yy.ravel(), zz.ravel()])
    return PointSourceArray(pos, np.ones(n_row * n_row, dtype=complex), k)


def max_square_rows(diameter: float, k: float) -> int:
    """Largest row count keeping the quadratic-array spacing >= lambda/2."""
    wavelength = 2.0 * np.pi / k
    return int(math.floor(1.0 + np.sqrt(2.0) * diameter / wavelength + 1e-9))


def dipole_array(n_y: int, n_z: int, dy: float, dz: float, k: float) -> PointSourceArray:
    """Rectangular n_y x n_z unit-weight grid in the yz-plane, centered."""
    if n_y < 1 or n_z < 1:
        raise ValueError("array extents must be >= 1")
    ys = (np.arange(n_y) - (n_y - 1) / 2.0) * dy
    zs = (np.arange(n_z) - (n_z - 1) / 2.0) * dz
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    pos = np.column_stack([np.zeros(yy.size), yy.ravel(), zz.ravel()])
    return PointSourceArray(pos, np.ones(n_y * n_z, dtype=complex), k)


def correlated_weights(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Complex weights with pair correlation rho and unit mean square.

    ``w = sqrt(rho) + (x + j y)/sqrt(2) * sqrt(1 - rho)`` with x, y standard
    normal, so that E[w_m* w_n] is 1 on the diagonal and rho off it.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [0, 1], got {rho!r}")
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    return np.sqrt(rho) + (x + 1j * y) / np.sqrt(2.0) * np.sqrt(1.0 - rho)


# ---------------------------------------------------------------------------
# Pattern evaluation
# ---------------------------------------------------------------------------

def array_factor(arr: PointSourceArray, theta, phi) -> np.ndarray:
    """Complex array factor sum_n w_n exp(j k r_hat . d_n)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast(theta, phi).shape
    dirs = unit_radial(theta, phi).reshape(-1, 3)
    phase = np.exp(1j * arr.k * (dirs @ arr.positions.T))
    return (phase @ arr.weights).reshape(shape)


def eirp_pattern(arr: PointSourceArray, element: ElementModel, theta, phi) -> np.ndarray:
    """EIRP of the array, watts: |array factor|^2 times element gain."""
    af = array_factor(arr, theta, phi)
    return np.abs(af) ** 2 * element.power_pattern(theta, phi)


def farfield_pattern(arr: PointSourceArray, element: ElementModel, theta, phi) -> tuple:
    """Vector far field (f_theta, f_phi) of the array, EIRP normalization."""
    af = array_factor(arr, theta, phi)
    f_t, f_p = element.field_pattern(theta, phi)
    return af * f_t, af * f_p


def rotated_pattern(arr: PointSourceArray, rot: np.ndarray,
                    element: ElementModel, theta, phi) -> np.ndarray:
    """EIRP of the array with source positions rotated by ``rot``.

    Only the positions rotate; the element pattern stays EUT-fixed, which
    matches the isotropic-element use this has in the sampling studies.
    """
    return eirp_pattern(arr.rotated(rot), element, theta, phi)


def mutual_power_trp(arr: PointSourceArray) -> float:
    """Closed-form TRP of an isotropic-element array, watts.

    Integrating |array factor|^2 over the sphere gives the mutual-power
    form ``sum_mn w_m* w_n sinc(k |d_m - d_n|)``, the exact reference used
    to normalize Monte Carlo samples (rotation invariant by construction).
    """
    diff = arr.positions[:, None, :] - arr.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    gram = np.sinc(arr.k * dist / np.pi)
    return float(np.real(np.conj(arr.weights) @ gram @ arr.weights))


# ---------------------------------------------------------------------------
# Beam steering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamGrid:
    """Rectangular beam raster around the +x array normal.

    Azimuth runs in the xy-plane, elevation toward +z; the uniform spacing
    must tile both spans exactly.
    """

    n_az: int = 9
    n_el: int = 5
    az_span_deg: float = 80.0
    el_span_deg: float = 40.0
    spacing_deg: float = 10.0

    def __post_init__(self):
        for count, span in ((self.n_az, self.az_span_deg),
                            (self.n_el, self.el_span_deg)):
            if count < 1:
                raise ValueError("beam counts must be >= 1")
            if abs(self.spacing_deg * (count - 1) - span) > 1e-9:
                raise ValueError(
                    f"spacing {self.spacing_deg} deg x (count {count} - 1) "
                    f"must equal the span {span} deg")

    @property
    def n_beams(self) -> int:
        return self.n_az * self.n_el

    def beam_direction(self, index: int) -> np.ndarray:
        """Unit vector of the commanded beam direction."""
        if not 0 <= index < self.n_beams:
            raise ValueError(f"beam index {index} outside [0, {self.n_beams})")
        i_az, i_el = divmod(index, self.n_el)
        az = np.deg2rad((i_az - (self.n_az - 1) / 2.0) * self.spacing_deg)
        el = np.deg2rad((i_el - (self.n_el - 1) / 2.0) * self.spacing_deg)
        return np.array([np.cos(el) * np.cos(az),
                         np.cos(el) * np.sin(az),
                         np.sin(el)])


def steering_weights(grid: BeamGrid, beam_index: int, positions,
                     k0: float) -> np.ndarray:
    """Conjugate-phase weights pointing a beam at the fundamental wavenumber.

    Reusing these weights at a harmonic ``h k0`` models a device whose
    excitation is frozen while the measurement frequency changes.
    """
    direction = grid.beam_direction(beam_index)
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    return np.exp(-1j * k0 * positions @ direction)


def sweep_average_pattern(arr: PointSourceArray, element: ElementModel,
                          weights_list, theta, phi) -> np.ndarray:
    """Mean power pattern over a list of beam weight vectors, watts."""
    if len(weights_list) < 1:
        raise ValueError("at least one beam required")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast(theta, phi).shape
    dirs = unit_radial(theta, phi).reshape(-1, 3)
    phase = np.exp(1j * arr.k * (dirs @ arr.positions.T))
    acc = np.zeros(phase.shape[0])
    for w in weights_list:
        acc += np.abs(phase @ np.asarray(w, dtype=complex)) ** 2
    acc /= len(weights_list)
    return (acc * element.power_pattern(theta, phi).ravel()).reshape(shape)
