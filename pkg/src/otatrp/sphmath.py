"""Spherical coordinates, rotations and vector wave special functions.

Conventions used throughout the package:

* Standard spherical coordinate system: ``r_hat(theta, phi) =
  (sin(theta)cos(phi), sin(theta)sin(phi), cos(theta))`` with polar angle
  ``theta`` measured from +z and azimuth ``phi`` from +x.
* Time convention ``exp(+j w t)``; outgoing waves therefore carry the
  spherical Hankel function of the second kind ``h_l^(2)``.
* Spherical harmonics are fully orthonormal (unit power integral over the
  sphere) and include the Condon-Shortley phase.

Vector quantities evaluated on the sphere are returned in local spherical
components ordered ``(r, theta, phi)`` unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

TWO_PI = 2.0 * np.pi


def canonical_angles(theta, phi):
    """Map arbitrary angle pairs into theta in [0, pi], phi in [-pi, pi).

    Accepts "ball of yarn" style inputs (theta running over a full turn)
    as well as the textbook ranges.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = np.mod(theta, TWO_PI)
    over = theta > np.pi
    theta = np.where(over, TWO_PI - theta, theta)
    phi = np.where(over, phi + np.pi, phi)
    phi = np.mod(phi + np.pi, TWO_PI) - np.pi
    return theta, phi


@dataclass(frozen=True)
class Direction:
    """A direction on the unit sphere, stored in canonical angle ranges."""

    theta: float
    phi: float

    def __post_init__(self):
        theta, phi = canonical_angles(self.theta, self.phi)
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "phi", float(phi))

    def unit_radial(self) -> np.ndarray:
        return unit_radial(self.theta, self.phi)


def _split_direction(theta, phi):
    if phi is None:
        if not isinstance(theta, Direction):
            raise TypeError("expected a Direction when phi is omitted")
        return theta.theta, theta.phi
    return theta, phi


def unit_radial(theta, phi=None) -> np.ndarray:
    """Radial unit vector(s) r_hat(theta, phi), shape (..., 3)."""
    theta, phi = _split_direction(theta, phi)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def unit_theta(theta, phi=None) -> np.ndarray:
    """Polar unit vector theta_hat, shape (..., 3)."""
    theta, phi = _split_direction(theta, phi)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ct = np.cos(theta)
    return np.stack([ct * np.cos(phi), ct * np.sin(phi), -np.sin(theta)], axis=-1)


def unit_phi(theta, phi=None) -> np.ndarray:
    """Azimuthal unit vector phi_hat, shape (..., 3)."""
    theta, phi = _split_direction(theta, phi)
    phi = np.asarray(phi, dtype=float)
    zeros = np.zeros(np.broadcast(np.asarray(theta), phi).shape)
    return np.stack([-np.sin(phi), np.cos(phi), zeros], axis=-1)


def cartesian_to_direction(v) -> tuple:
    """Angles (theta, phi) of Cartesian vectors, shape (..., 3) -> (...,)."""
    v = np.asarray(v, dtype=float)
    rho = np.hypot(v[..., 0], v[..., 1])
    theta = np.arctan2(rho, v[..., 2])
    phi = np.arctan2(v[..., 1], v[..., 0])
    return theta, phi


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def rotation_matrix(axis, gamma: float) -> np.ndarray:
    """Rotation by angle ``gamma`` (positive sense) about a unit ``axis``.

    Uses the closed Rodrigues form R = I + A sin(gamma) + A^2 (1 - cos(gamma))
    with A the antisymmetric generator of the axis.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError("axis must be a 3-vector")
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"rotation axis must be a unit vector, got |n| = {norm!r}")
    nx, ny, nz = axis
    gen = np.array([[0.0, -nz, ny], [nz, 0.0, -nx], [-ny, nx, 0.0]])
    return np.eye(3) + gen * np.sin(gamma) + (gen @ gen) * (1.0 - np.cos(gamma))


def is_rotation(mat, tol: float = 1e-12) -> bool:
    """True if ``mat`` is orthonormal with determinant +1 within ``tol``."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (3, 3):
        return False
    ortho = np.linalg.norm(mat.T @ mat - np.eye(3))
    return ortho < tol and abs(np.linalg.det(mat) - 1.0) < tol


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Random rotation with axis in the upper hemisphere.

    The axis polar angle is uniform on [0, pi/2], the axis azimuth and the
    rotation angle are uniform on [-pi, pi].  Restricting the axis to the
    upper hemisphere loses nothing because R(n, g) = R(-n, -g).
    """
    alpha = rng.uniform(0.0, np.pi / 2.0)
    beta = rng.uniform(-np.pi, np.pi)
    gamma = rng.uniform(-np.pi, np.pi)
    return rotation_matrix(unit_radial(alpha, beta), gamma)


# ---------------------------------------------------------------------------
# Radial functions
# ---------------------------------------------------------------------------

def spherical_hankel2(l, x):
    """Spherical Hankel function of the second kind h_l^(2)(x), x > 0.

    Outgoing-wave radial dependence under the exp(+j w t) convention.
    ``l`` may be an integer or integer array; broadcasts against ``x``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("spherical_hankel2 requires x > 0")
    return spherical_jn(l, x) - 1j * spherical_yn(l, x)


def radial_function(n: int, l: int, kr):
    """Outgoing radial wave functions for the tangential/radial field terms.

    ``n = 1``: h_l2(kr); ``n = 2``: (kr h_l2(kr))'/kr; ``n = 3``:
    sqrt(l(l+1)) h_l2(kr)/kr.  The n = 2 derivative uses the exact
    recurrence (z h_l)' = z h_{l-1} - l h_l.
    """
    if l < 1:
        raise ValueError("radial_function requires l >= 1")
    kr = np.asarray(kr, dtype=float)
    if np.any(kr <= 0.0):
        raise ValueError("radial_function requires kr > 0")
    if n == 1:
        return spherical_hankel2(l, kr)
    if n == 2:
        return spherical_hankel2(l - 1, kr) - l * spherical_hankel2(l, kr) / kr
    if n == 3:
        return np.sqrt(l * (l + 1.0)) * spherical_hankel2(l, kr) / kr
    raise ValueError(f"radial function index must be 1, 2 or 3, got {n}")


def radial_function_table(l_max: int, kr) -> tuple:
    """Tables f1[l], f2[l], f3[l] for l = 0..l_max (row 0 unused).

    Shape of each table is (l_max + 1,) + shape(kr).
    """
    kr = np.atleast_1d(np.asarray(kr, dtype=float))
    if np.any(kr <= 0.0):
        raise ValueError("radial_function_table requires kr > 0")
    ls = np.arange(l_max + 1)[:, None]
    h = spherical_jn(ls, kr[None, :]) - 1j * spherical_yn(ls, kr[None, :])
    f1 = h
    f2 = np.zeros_like(h)
    f2[1:] = h[:-1] - np.arange(1, l_max + 1)[:, None] * h[1:] / kr[None, :]
    f3 = np.zeros_like(h)
    ws = np.sqrt(np.arange(l_max + 1) * (np.arange(l_max + 1) + 1.0))[:, None]
    f3 = ws * h / kr[None, :]
    return f1, f2, f3


# ---------------------------------------------------------------------------
# Angular functions
# ---------------------------------------------------------------------------

def legendre_tables(l_max: int, theta) -> tuple:
    """Orthonormal theta-dependent harmonic tables for m >= 0.

    Returns ``(ybar, tau, pi)`` with shape (l_max+1, l_max+1) + shape(theta):

    * ``ybar[l, m]``   -- Y_lm(theta, phi) / exp(j m phi), real valued;
    * ``tau[l, m]``    -- d ybar / d theta;
    * ``pi[l, m]``     -- m ybar / sin(theta).

    All three are computed by pole-safe ladder recurrences; no division by
    sin(theta) occurs, so theta = 0 and pi are exact limits.  Negative-m
    values follow from ybar(l,-m) = (-1)^m ybar(l,m), same sign rule for
    tau, opposite for pi.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    st, ct = np.sin(theta), np.cos(theta)
    shape = (l_max + 1, l_max + 1) + theta.shape
    ybar = np.zeros(shape)
    ybar[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, l_max + 1):
        ybar[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * ybar[m - 1, m - 1]
    for m in range(0, l_max):
        ybar[m + 1, m] = np.sqrt(2.0 * m + 3.0) * ct * ybar[m, m]
    for m in range(0, l_max + 1):
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            ybar[l, m] = a * (ct * ybar[l - 1, m] - b * ybar[l - 2, m])

    tau = np.zeros(shape)
    pi_t = np.zeros(shape)
    for l in range(1, l_max + 1):
        for m in range(0, l + 1):
            y_up = ybar[l, m + 1] if m + 1 <= l else 0.0
            y_dn = -ybar[l, 1] if m == 0 else ybar[l, m - 1]
            tau[l, m] = 0.5 * (
                np.sqrt((l - m) * (l + m + 1.0)) * y_up
                - np.sqrt((l + m) * (l - m + 1.0)) * y_dn
            )
            if m >= 1:
                y_up2 = ybar[l - 1, m + 1] if m + 1 <= l - 1 else 0.0
                y_dn2 = ybar[l - 1, m - 1] if m - 1 <= l - 1 else 0.0
                pi_t[l, m] = -0.5 * np.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0)) * (
                    np.sqrt((l - m) * (l - m - 1.0)) * y_up2
                    + np.sqrt((l + m) * (l + m - 1.0)) * y_dn2
                )
    return ybar, tau, pi_t


def _lookup_angular(ybar, tau, pi_t, l: int, m: int):
    """(ybar, tau, pi) at signed m using the negative-m symmetry."""
    if m >= 0:
        return ybar[l, m], tau[l, m], pi_t[l, m]
    s = -1.0 if (-m) % 2 else 1.0
    return s * ybar[l, -m], s * tau[l, -m], -s * pi_t[l, -m]


def vector_spherical_harmonic(n: int, l: int, m: int, theta, phi=None) -> np.ndarray:
    """Orthonormal vector spherical harmonic A_lmn in spherical components.

    Returns a complex array of shape (..., 3) ordered (r, theta, phi):

    * n = 1: rotational tangential harmonic, grad(Y) x r / sqrt(l(l+1));
    * n = 2: gradient tangential harmonic, r grad(Y) / sqrt(l(l+1));
    * n = 3: radial harmonic, r_hat Y.

    The pair satisfies A_lm2 = r_hat x A_lm1 pointwise and the full set is
    orthonormal under the solid-angle inner product.
    """
    if l < 1:
        raise ValueError("vector spherical harmonics require l >= 1")
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    if n not in (1, 2, 3):
        raise ValueError(f"harmonic family index must be 1, 2 or 3, got {n}")
    theta, phi = _split_direction(theta, phi)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    ybar, tau, pi_t = legendre_tables(l, theta)
    y, t, p = _lookup_angular(ybar, tau, pi_t, l, m)
    az = np.exp(1j * m * phi)
    nu = np.sqrt(l * (l + 1.0))
    out = np.zeros(theta.shape + (3,), dtype=complex)
    if n == 1:
        out[..., 1] = 1j * p * az / nu
        out[..., 2] = -t * az / nu
    elif n == 2:
        out[..., 1] = t * az / nu
        out[..., 2] = 1j * p * az / nu
    else:
        out[..., 0] = y * az
    return out
