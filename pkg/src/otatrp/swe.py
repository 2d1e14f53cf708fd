"""Spherical wave expansion of radiated fields.

A radiator is represented by truncated mode coefficients ``a[l, m, n]``
(``n = 1`` rotational/TE, ``n = 2`` gradient/TM) carrying units of sqrt(W),
normalized so the total radiated power is exactly ``sum |a|^2``.  With the
orthonormal angular harmonics of :mod:`otatrp.sphmath` and outgoing radial
functions, the fields at radius ``r >= source_radius`` are

``E_t  = k sqrt(Z0) sum( a1 f1 A1 + a2 f2 A2 )``
``E_r  = k sqrt(Z0) sum( a2 f3 Y )``
``H_t  = j k / sqrt(Z0) sum( a1 f2 A2 + a2 f1 A1 )``
``H_r  = j k / sqrt(Z0) sum( a1 f3 Y )``

The relative ``j`` between E and H makes the pair satisfy Maxwell's
equations; that is what guarantees the surface integral of the true radial
power flux equals ``sum |a|^2`` at every radius (the exact spherical
Wronskian ``Re[-j f1 f2*] = 1/(kr)^2`` does the bookkeeping).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sphmath import legendre_tables, radial_function_table

#: Free space wave impedance, ohms.
FREE_SPACE_IMPEDANCE = 376.730313668

Z0 = FREE_SPACE_IMPEDANCE


def mode_count(l_max: int) -> int:
    """Number of propagating modes for a truncation at ``l_max``."""
    return 2 * (l_max * l_max + 2 * l_max)


def mode_list(l_max: int) -> list:
    """All (l, m, n) triples in canonical flat order (l, then m, then n)."""
    return [
        (l, m, n)
        for l in range(1, l_max + 1)
        for m in range(-l, l + 1)
        for n in (1, 2)
    ]


def fit_order(k: float, r_sph: float, margin: int = 10) -> int:
    """Default truncation order ceil(k R) + margin for a source of radius R."""
    return int(math.ceil(k * r_sph)) + margin


@dataclass
class SweCoefficients:
    """Truncated spherical-mode amplitudes of a radiator.

    ``a`` has shape (2, l_max + 1, 2 l_max + 1); entry ``a[n - 1, l,
    l_max + m]`` is the amplitude of mode (l, m, n) in sqrt(W).  Slots with
    l = 0 or |m| > l must stay zero.
    """

    l_max: int
    k: float
    source_radius: float
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if self.k <= 0.0:
            raise ValueError("wavenumber must be positive")
        if self.source_radius < 0.0:
            raise ValueError("source_radius must be >= 0")
        shape = (2, self.l_max + 1, 2 * self.l_max + 1)
        if self.a is None:
            self.a = np.zeros(shape, dtype=complex)
        else:
            self.a = np.asarray(self.a, dtype=complex)
            if self.a.shape != shape:
                raise ValueError(f"coefficient array must have shape {shape}")
            if not np.all(np.isfinite(self.a)):
                raise ValueError("coefficients must be finite")

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k

    def get(self, l: int, m: int, n: int) -> complex:
        self._check_mode(l, m, n)
        return complex(self.a[n - 1, l, self.l_max + m])

    def set(self, l: int, m: int, n: int, value: complex) -> None:
        self._check_mode(l, m, n)
        self.a[n - 1, l, self.l_max + m] = value

    def _check_mode(self, l, m, n):
        if not (1 <= l <= self.l_max):
            raise ValueError(f"l = {l} outside [1, {self.l_max}]")
        if abs(m) > l:
            raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
        if n not in (1, 2):
            raise ValueError("n must be 1 or 2")

    def trp(self) -> float:
        """Total radiated power sum |a|^2, watts."""
        return float(np.sum(np.abs(self.a) ** 2))

    def truncated(self, l_new: int) -> "SweCoefficients":
        """Copy with all modes above ``l_new`` removed (l_max is kept)."""
        out = SweCoefficients(self.l_max, self.k, self.source_radius, self.a.copy())
        if l_new < self.l_max:
            out.a[:, max(l_new, 0) + 1:, :] = 0.0
        return out

    # -- JSON interchange ---------------------------------------------------

    def to_json_dict(self) -> dict:
        entries = []
        for l in range(1, self.l_max + 1):
            for m in range(-l, l + 1):
                for n in (1, 2):
                    v = self.get(l, m, n)
                    entries.append([l, m, n, v.real, v.imag])
        return {
            "k": self.k,
            "source_radius": self.source_radius,
            "L": self.l_max,
            "entries": entries,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SweCoefficients":
        out = cls(int(data["L"]), float(data["k"]), float(data["source_radius"]))
        for l, m, n, re, im in data["entries"]:
            out.set(int(l), int(m), int(n), complex(re, im))
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "SweCoefficients":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def trp_of(coeffs: SweCoefficients) -> float:
    """Total radiated power of a coefficient set, watts."""
    return coeffs.trp()


@dataclass
class FieldSample:
    """E/H field values (effective values, V/m and A/m) at sphere points.

    Tangential components are given in local (theta, phi) components; all
    entries broadcast to a common shape.
    """

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    e_r: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    h_r: np.ndarray
    h_theta: np.ndarray
    h_phi: np.ndarray


def _chunk_size(l_max: int) -> int:
    # Bound the (l_max+1)^2 x chunk Legendre tables to ~50 MB per array.
    return max(64, int(6.0e6 // ((l_max + 1) * (l_max + 1))))


def _accumulate_sums(a: np.ndarray, l_max: int, theta, phi, f1, f2, f3,
                     want_h: bool = True):
    """Mode sums over a flat point list with per-point radial factors.

    ``f1/f2/f3`` have shape (l_max + 1, npts).  Returns the six raw sums
    (e_t, e_p, e_r, h_t, h_p, h_r) before physical prefactors; the h sums
    are zeros when ``want_h`` is false.
    """
    npts = theta.size
    out = [np.zeros(npts, dtype=complex) for _ in range(6)]
    e_t, e_p, e_r, h_t, h_p, h_r = out
    ybar, tau, pi_t = legendre_tables(l_max, theta)
    ls_all = np.arange(l_max + 1)
    inv_nu = np.zeros(l_max + 1)
    inv_nu[1:] = 1.0 / np.sqrt(ls_all[1:] * (ls_all[1:] + 1.0))

    az1 = np.exp(1j * phi)
    az = np.ones(npts, dtype=complex)
    for m in range(0, l_max + 1):
        if m > 0:
            az = az * az1
        lo = max(1, m)
        ls = slice(lo, l_max + 1)
        y = ybar[ls, m]
        t = tau[ls, m]
        p = pi_t[ls, m]
        for sign in (1, -1):
            if sign < 0 and m == 0:
                break
            mm = sign * m
            a1 = a[0, ls, l_max + mm]
            a2 = a[1, ls, l_max + mm]
            if not (np.any(a1) or np.any(a2)):
                continue
            if sign < 0:
                s = -1.0 if m % 2 else 1.0
                ys, ts, ps = s * y, s * t, -s * p
                azm = np.conj(az)
            else:
                ys, ts, ps = y, t, p
                azm = az
            w1 = (a1 * inv_nu[lo:])[:, None]
            w2 = (a2 * inv_nu[lo:])[:, None]
            c11 = w1 * f1[ls]
            c22 = w2 * f2[ls]
            dot = lambda c, g: np.einsum("lp,lp->p", c, g)
            e_t += azm * (1j * dot(c11, ps) + dot(c22, ts))
            e_p += azm * (-dot(c11, ts) + 1j * dot(c22, ps))
            e_r += azm * dot(a2[:, None] * f3[ls], ys)
            if want_h:
                c12 = w1 * f2[ls]
                c21 = w2 * f1[ls]
                h_t += azm * (dot(c12, ts) + 1j * dot(c21, ps))
                h_p += azm * (1j * dot(c12, ps) - dot(c21, ts))
                h_r += azm * dot(a1[:, None] * f3[ls], ys)
    return e_t, e_p, e_r, h_t, h_p, h_r


def evaluate_fields(coeffs: SweCoefficients, r, theta, phi) -> FieldSample:
    """Evaluate E and H at radius ``r`` (meters) and direction(s).

    ``r`` must not fall below the source radius; the expansion is not a
    valid field representation there.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < coeffs.source_radius * (1.0 - 1e-12)):
        raise ValueError(
            f"fields are undefined below the source radius "
            f"({float(np.min(r))!r} < {coeffs.source_radius!r})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    r, theta, phi = np.broadcast_arrays(r, theta, phi)
    shape = r.shape
    rf, tf, pf = r.ravel(), theta.ravel(), phi.ravel()

    l_max = coeffs.l_max
    sums = [np.empty(rf.size, dtype=complex) for _ in range(6)]
    step = _chunk_size(l_max)
    for i0 in range(0, rf.size, step):
        sl = slice(i0, min(i0 + step, rf.size))
        kr_unique, inv = np.unique(coeffs.k * rf[sl], return_inverse=True)
        f1u, f2u, f3u = radial_function_table(l_max, kr_unique)
        part = _accumulate_sums(coeffs.a, l_max, tf[sl], pf[sl],
                                f1u[:, inv], f2u[:, inv], f3u[:, inv])
        for dst, src in zip(sums, part):
            dst[sl] = src

    ce = coeffs.k * np.sqrt(Z0)
    ch = 1j * coeffs.k / np.sqrt(Z0)
    e_t, e_p, e_r, h_t, h_p, h_r = sums
    return FieldSample(
        r=r, theta=theta, phi=phi,
        e_r=(ce * e_r).reshape(shape),
        e_theta=(ce * e_t).reshape(shape),
        e_phi=(ce * e_p).reshape(shape),
        h_r=(ch * h_r).reshape(shape),
        h_theta=(ch * h_t).reshape(shape),
        h_phi=(ch * h_p).reshape(shape),
    )


def farfield(coeffs: SweCoefficients, theta, phi) -> tuple:
    """Far-field amplitude (f_theta, f_phi) normalized so EIRP = |f|^2.

    The amplitude is the limit of ``sqrt(4 pi / Z0) r exp(+jkr) E_t``; its
    squared magnitude is the equivalent isotropically radiated power in the
    given direction, watts.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    tf, pf = theta.ravel(), phi.ravel()
    l_max = coeffs.l_max

    f_t = np.empty(tf.size, dtype=complex)
    f_p = np.empty(tf.size, dtype=complex)
    step = _chunk_size(l_max)
    ls = np.arange(l_max + 1)
    for i0 in range(0, tf.size, step):
        sl = slice(i0, min(i0 + step, tf.size))
        npts = tf[sl].size
        # Asymptotic radial factors: f1 -> j^(l+1), f2 -> j^l, f3 -> 0.
        g1 = np.repeat((1j ** (ls + 1))[:, None], npts, axis=1)
        g2 = np.repeat((1j ** ls)[:, None], npts, axis=1)
        g3 = np.zeros((l_max + 1, npts), dtype=complex)
        e_t, e_p, _, _, _, _ = _accumulate_sums(
            coeffs.a, l_max, tf[sl], pf[sl], g1, g2, g3, want_h=False)
        f_t[sl], f_p[sl] = e_t, e_p
    s4p = np.sqrt(4.0 * np.pi)
    return (s4p * f_t).reshape(theta.shape), (s4p * f_p).reshape(theta.shape)


def eirp(coeffs: SweCoefficients, theta, phi) -> np.ndarray:
    """Far-field EIRP pattern, watts."""
    f_t, f_p = farfield(coeffs, theta, phi)
    return np.abs(f_t) ** 2 + np.abs(f_p) ** 2


def farfield_mode_basis(l_max: int, theta, phi) -> tuple:
    """Per-mode far-field amplitudes at given points, shape (J, npts).

    Rows follow :func:`mode_list`; a coefficient vector ``c`` in that
    ordering gives the pattern ``f = c @ basis`` with EIRP = |f_theta|^2 +
    |f_phi|^2.  This is the bulk-evaluation path used by the Monte Carlo
    studies.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    phi = np.asarray(phi, dtype=float).ravel()
    ybar, tau, pi_t = legendre_tables(l_max, theta)
    modes = mode_list(l_max)
    b_t = np.zeros((len(modes), theta.size), dtype=complex)
    b_p = np.zeros((len(modes), theta.size), dtype=complex)
    azp = np.exp(1j * np.outer(np.arange(l_max + 1), phi))
    s4p = np.sqrt(4.0 * np.pi)
    for row, (l, m, n) in enumerate(modes):
        nu = np.sqrt(l * (l + 1.0))
        if m >= 0:
            y, t, p = ybar[l, m], tau[l, m], pi_t[l, m]
            az = azp[m]
        else:
            s = -1.0 if (-m) % 2 else 1.0
            y, t, p = s * ybar[l, -m], s * tau[l, -m], -s * pi_t[l, -m]
            az = np.conj(azp[-m])
        if n == 1:
            pref = 1j ** (l + 1)
            b_t[row] = s4p * pref * (1j * p) * az / nu
            b_p[row] = s4p * pref * (-t) * az / nu
        else:
            pref = 1j ** l
            b_t[row] = s4p * pref * t * az / nu
            b_p[row] = s4p * pref * (1j * p) * az / nu
    return b_t, b_p


# ---------------------------------------------------------------------------
# Far-field sampling grids and the inverse (mode fitting)
# ---------------------------------------------------------------------------

@dataclass
class FarFieldGrid:
    """Tangential far-field samples on a Gauss-Legendre x uniform-phi grid.

    ``f_theta``/``f_phi`` have shape (n_theta, n_phi) and use the EIRP
    normalization of :func:`farfield`.  ``weight`` holds the Gauss-Legendre
    weights in cos(theta); phi starts at 0 with uniform step 2 pi / n_phi.
    """

    theta: np.ndarray
    weight: np.ndarray
    phi: np.ndarray
    f_theta: np.ndarray
    f_phi: np.ndarray

    @staticmethod
    def nodes(l_max: int, n_theta: int = None, n_phi: int = None) -> tuple:
        """Quadrature nodes (theta, weights, phi) exact for order ``l_max``."""
        n_theta = n_theta or 2 * l_max + 2
        n_phi = n_phi or 2 * l_max + 2
        x, w = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x[::-1])
        return theta, w[::-1], np.arange(n_phi) * 2.0 * np.pi / n_phi

    @classmethod
    def from_pattern(cls, pattern, l_max: int, n_theta: int = None,
                     n_phi: int = None) -> "FarFieldGrid":
        """Sample ``pattern(theta_mesh, phi_mesh) -> (f_theta, f_phi)``."""
        theta, w, phi = cls.nodes(l_max, n_theta, n_phi)
        tm, pm = np.meshgrid(theta, phi, indexing="ij")
        f_t, f_p = pattern(tm, pm)
        return cls(theta, w, phi, np.asarray(f_t, dtype=complex),
                   np.asarray(f_p, dtype=complex))

    def trp(self) -> float:
        """Quadrature TRP of the sampled pattern, watts."""
        p = np.abs(self.f_theta) ** 2 + np.abs(self.f_phi) ** 2
        return float(np.sum(self.weight @ p) * (2.0 * np.pi / self.phi.size)
                     / (4.0 * np.pi))


def farfield_on_grid(coeffs: SweCoefficients, n_theta: int = None,
                     n_phi: int = None) -> FarFieldGrid:
    """Sample the far field of a coefficient set on its natural grid."""
    return FarFieldGrid.from_pattern(
        lambda t, p: farfield(coeffs, t, p), coeffs.l_max, n_theta, n_phi)


def coeffs_from_farfield(ff: FarFieldGrid, l_max: int, k: float,
                         source_radius: float = None) -> SweCoefficients:
    """Recover mode coefficients from tangential far-field samples.

    Projects onto the tangential harmonics with the asymptotic radial
    factors divided out.  The quadrature (Gauss-Legendre in cos(theta),
    uniform trapezoid in phi) is exact for band-limited patterns, so a
    round trip through :func:`farfield_on_grid` reproduces coefficients to
    machine accuracy.
    """
    n_theta, n_phi = ff.f_theta.shape
    if n_theta < l_max + 1 or n_phi < 2 * l_max + 1:
        raise ValueError(
            f"far-field grid too sparse for order {l_max}: need at least "
            f"{l_max + 1} theta and {2 * l_max + 1} phi samples, got "
            f"{n_theta} x {n_phi}")
    if source_radius is None:
        source_radius = l_max / k

    dphi = 2.0 * np.pi / n_phi
    fhat_t = np.fft.fft(ff.f_theta, axis=1) * dphi
    fhat_p = np.fft.fft(ff.f_phi, axis=1) * dphi

    ybar, tau, pi_t = legendre_tables(l_max, ff.theta)
    out = SweCoefficients(l_max, k, source_radius)
    s4p = np.sqrt(4.0 * np.pi)
    w = ff.weight
    for l in range(1, l_max + 1):
        nu = np.sqrt(l * (l + 1.0))
        for m in range(-l, l + 1):
            if m >= 0:
                y, t, p = ybar[l, m], tau[l, m], pi_t[l, m]
            else:
                s = -1.0 if (-m) % 2 else 1.0
                y, t, p = s * ybar[l, -m], s * tau[l, -m], -s * pi_t[l, -m]
            ft = fhat_t[:, m % n_phi] / s4p
            fp = fhat_p[:, m % n_phi] / s4p
            proj1 = np.sum(w * (-1j * p * ft - t * fp)) / nu
            proj2 = np.sum(w * (t * ft - 1j * p * fp)) / nu
            out.a[0, l, l_max + m] = proj1 * (-1j) ** (l + 1)
            out.a[1, l, l_max + m] = proj2 * (-1j) ** l
    return out


def back_propagate(coeffs: SweCoefficients, r: float) -> tuple:
    """Truncate for evaluation at radius ``r``: keep modes with l <= k r.

    Returns ``(truncated, trp_change)`` where ``trp_change`` is the total
    power removed by the truncation (the back-propagation error budget).
    """
    if r <= coeffs.source_radius:
        raise ValueError("back propagation radius must exceed the source radius")
    l_new = min(coeffs.l_max, int(math.floor(coeffs.k * r)))
    out = coeffs.truncated(l_new)
    return out, coeffs.trp() - out.trp()


def random_mode_coeffs(n_modes: int, rng: np.random.Generator,
                       l_max: int = 12, k: float = 2.0 * np.pi,
                       source_radius: float = None) -> SweCoefficients:
    """Random sparse mode set with complex normal weights and unit TRP.

    ``n_modes`` distinct modes are drawn uniformly from the J = 2(L^2 + 2L)
    available ones; weights are x + j y with x, y standard normal, then the
    set is scaled to exactly unit total radiated power.
    """
    j_total = mode_count(l_max)
    if not 1 <= n_modes <= j_total:
        raise ValueError(f"n_modes must be in [1, {j_total}], got {n_modes}")
    modes = mode_list(l_max)
    picks = rng.choice(j_total, size=n_modes, replace=False)
    weights = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    weights /= np.sqrt(np.sum(np.abs(weights) ** 2))
    if source_radius is None:
        source_radius = l_max / k
    out = SweCoefficients(l_max, k, source_radius)
    for idx, wv in zip(picks, weights):
        l, m, n = modes[idx]
        out.set(l, m, n, complex(wv))
    return out
