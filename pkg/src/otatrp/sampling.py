"""Measurement grids, grid TRP estimators, margins and pattern multiplication.

Two grid families are supported: rectilinear full-sphere grids with
cell-centered polar samples and solid-angle weights computed from
differences of cos(theta) at the cell edges, and sets of two or three
orthogonal great-circle cuts with uniform arc weights.

The sparse-sampling bookkeeping follows the half-wavelength resolution
rule: the reference steps are (lambda/2)/R_sph in theta and
(lambda/2)/R_cyl in phi, and the sparsity factor SF is the used step in
units of the reference step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

MAX_STEP_RAD = np.deg2rad(15.0)


@dataclass(frozen=True)
class ReferenceSteps:
    """Reference angular steps for dense sampling of a given EUT size."""

    dtheta_ref: float
    dphi_ref: float
    r_sph: float
    r_cyl: float
    wavelength: float


def reference_steps(r_sph: float, r_cyl: float, wavelength: float) -> ReferenceSteps:
    """Half-wavelength-resolution angular steps, radians."""
    if r_sph <= 0.0 or r_cyl <= 0.0 or wavelength <= 0.0:
        raise ValueError("radii and wavelength must be positive")
    if r_cyl > r_sph * (1.0 + 1e-12):
        raise ValueError("the enclosing cylinder cannot be wider than the sphere")
    return ReferenceSteps(
        dtheta_ref=(wavelength / 2.0) / r_sph,
        dphi_ref=(wavelength / 2.0) / r_cyl,
        r_sph=r_sph, r_cyl=r_cyl, wavelength=wavelength)


def sparsity_factor(dtheta: float, dphi: float, ref: ReferenceSteps) -> float:
    """SF = max step in units of the reference step; SF > 1 under-samples."""
    if dtheta <= 0.0 or dphi <= 0.0:
        raise ValueError("angular steps must be positive")
    return max(dtheta / ref.dtheta_ref, dphi / ref.dphi_ref)


def sf_max(r_sph: float, wavelength: float) -> float:
    """Sparsity factor of the maximum (15 degree) angular step."""
    return np.pi * r_sph / (6.0 * wavelength)


def _count_from_step(step: float, span: float) -> int:
    n = span / step
    if abs(n - round(n)) > 1e-9:
        raise ValueError(
            f"step {np.rad2deg(step):g} deg does not divide the span "
            f"{np.rad2deg(span):g} deg")
    return int(round(n))


def _warn_above_max(step: float) -> None:
    if step > MAX_STEP_RAD * (1.0 + 1e-9):
        warnings.warn(
            f"angular step {np.rad2deg(step):.3g} deg exceeds the 15 deg "
            f"maximum", stacklevel=3)


@dataclass
class SamplingGrid:
    """Flat point list with quadrature weights for one grid variant.

    ``kind`` is ``"fullsphere"``, ``"cuts2"`` or ``"cuts3"``.  Full-sphere
    weights are solid angles summing to 4 pi; cut points carry arc weights
    summing to 2 pi per cut and ``cut_id`` labels the cut they belong to.
    """

    kind: str
    theta: np.ndarray
    phi: np.ndarray
    weight: np.ndarray
    step_theta: float
    step_phi: float
    cut_id: np.ndarray = None

    @property
    def n_points(self) -> int:
        return len(self.theta)

    @property
    def n_cuts(self) -> int:
        return 0 if self.cut_id is None else int(self.cut_id.max()) + 1

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("theta_deg,phi_deg,weight\n")
            for t, p, w in zip(self.theta, self.phi, self.weight):
                fh.write(f"{np.rad2deg(t)!r},{np.rad2deg(p)!r},{w!r}\n")

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "n_points": self.n_points,
            "step_theta_deg": np.rad2deg(self.step_theta),
            "step_phi_deg": np.rad2deg(self.step_phi),
        }


def full_sphere_grid(dtheta: float, dphi: float = None) -> SamplingGrid:
    """Rectilinear full-sphere grid; steps must divide pi and 2 pi."""
    dphi = dtheta if dphi is None else dphi
    _warn_above_max(max(dtheta, dphi))
    n_theta = _count_from_step(dtheta, np.pi)
    n_phi = _count_from_step(dphi, 2.0 * np.pi)
    return full_sphere_grid_from_counts(n_theta, n_phi)


def full_sphere_grid_from_counts(n_theta: int, n_phi: int) -> SamplingGrid:
    """Cell-centered rectilinear grid with Delta(cos theta) weights."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid counts must be >= 1")
    dtheta = np.pi / n_theta
    dphi = 2.0 * np.pi / n_phi
    edges = np.arange(n_theta + 1) * dtheta
    theta = (np.arange(n_theta) + 0.5) * dtheta
    w_theta = np.cos(edges[:-1]) - np.cos(edges[1:])
    phi = (np.arange(n_phi) + 0.5) * dphi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.repeat(w_theta * dphi, n_phi)
    return SamplingGrid("fullsphere", tt.ravel(), pp.ravel(), ww,
                        step_theta=dtheta, step_phi=dphi)


def _cut_points(cut: str, n: int) -> tuple:
    """(theta, phi) of ``n`` uniform points along a great circle.

    ``horizontal``: the equator, parameter = azimuth from +x.
    ``vertical-xz`` / ``vertical-yz``: full polar turns through the poles,
    parameter measured from +z toward +x (or +y).
    """
    psi = np.arange(n) * 2.0 * np.pi / n
    if cut == "horizontal":
        return np.full(n, np.pi / 2.0), psi.copy()
    if cut == "vertical-xz":
        vec = np.column_stack([np.sin(psi), np.zeros(n), np.cos(psi)])
    elif cut == "vertical-yz":
        vec = np.column_stack([np.zeros(n), np.sin(psi), np.cos(psi)])
    else:
        raise ValueError(f"unknown cut {cut!r}")
    theta = np.arccos(np.clip(vec[:, 2], -1.0, 1.0))
    phi = np.arctan2(vec[:, 1], vec[:, 0])
    return theta, phi


CUT_SEQUENCE = ("horizontal", "vertical-xz", "vertical-yz")


def orthogonal_cuts_grid(n_cuts: int, delta: float) -> SamplingGrid:
    """Two or three orthogonal great-circle cuts with uniform step ``delta``.

    The mandatory pair is one horizontal cut (the equator) plus one full
    vertical turn in the xz-plane; the third cut is the yz-plane turn.
    """
    if n_cuts not in (2, 3):
        raise ValueError("orthogonal cut grids use 2 or 3 cuts")
    _warn_above_max(delta)
    n = _count_from_step(delta, 2.0 * np.pi)
    thetas, phis, cids = [], [], []
    for cid, cut in enumerate(CUT_SEQUENCE[:n_cuts]):
        t, p = _cut_points(cut, n)
        thetas.append(t)
        phis.append(p)
        cids.append(np.full(n, cid))
    return SamplingGrid(
        f"cuts{n_cuts}",
        np.concatenate(thetas), np.concatenate(phis),
        np.full(n_cuts * n, 2.0 * np.pi / n),
        step_theta=delta, step_phi=delta,
        cut_id=np.concatenate(cids))


def build_grid(kind: str, step: float, step_phi: float = None) -> SamplingGrid:
    """Grid factory: ``fullsphere``, ``cuts2`` or ``cuts3`` at given step(s)."""
    if kind == "fullsphere":
        return full_sphere_grid(step, step_phi)
    if kind in ("cuts2", "cuts3"):
        return orthogonal_cuts_grid(int(kind[-1]), step)
    raise ValueError(f"unknown grid kind {kind!r}")


def average_weights(grid: SamplingGrid) -> np.ndarray:
    """Vector v with v . values = angular average over the grid."""
    if grid.kind == "fullsphere":
        return grid.weight / (4.0 * np.pi)
    v = np.empty(grid.n_points)
    for c in range(grid.n_cuts):
        mask = grid.cut_id == c
        v[mask] = 1.0 / (grid.n_cuts * np.count_nonzero(mask))
    return v


def grid_average(values: np.ndarray, grid: SamplingGrid) -> float:
    """Angular average of sampled values over the grid."""
    return float(average_weights(grid) @ np.asarray(values, dtype=float))


def trp_grid(evaluator, grid: SamplingGrid, r0: float = None) -> float:
    """Grid TRP estimate, watts.

    ``evaluator(theta, phi)`` returns EIRP-like values when ``r0`` is None,
    or radial power flux density (W/m^2) at radius ``r0`` otherwise; the
    flux variant applies the 4 pi r0^2 sphere factor.
    """
    vals = np.asarray(evaluator(grid.theta, grid.phi), dtype=float)
    avg = grid_average(vals, grid)
    if r0 is None:
        return avg
    return 4.0 * np.pi * r0 * r0 * avg


def delta_trp_margin(kind: str, sf: float = None, sf_maximum: float = None) -> float:
    """Margin in dB added to a sparse-grid TRP estimate.

    Two cuts carry 2 dB, three cuts 1.5 dB; the full sphere margin rises
    linearly from 0 at SF = 1 to 1 dB at the 15-degree sparsity SF_max.
    """
    if kind == "cuts2":
        return 2.0
    if kind == "cuts3":
        return 1.5
    if kind == "fullsphere":
        if sf is None or sf_maximum is None:
            raise ValueError("full-sphere margin needs sf and sf_maximum")
        if sf <= 1.0 or sf_maximum <= 1.0:
            return 0.0
        return (sf - 1.0) / (sf_maximum - 1.0)
    raise ValueError(f"unknown grid kind {kind!r}")


@dataclass
class TrpEstimate:
    """Grid TRP with its sparsity factor and margin, in linear and dB form."""

    trp_grid_w: float
    sf: float
    margin_db: float
    grid: dict

    def __post_init__(self):
        if self.trp_grid_w < 0.0:
            raise ValueError("grid TRP must be >= 0")
        if self.margin_db < 0.0:
            raise ValueError("margin must be >= 0")

    @property
    def trp_est_w(self) -> float:
        return self.trp_grid_w * 10.0 ** (self.margin_db / 10.0)

    def to_json_dict(self) -> dict:
        return {
            "trp_grid_w": self.trp_grid_w,
            "trp_grid_dbm": watts_to_dbm(self.trp_grid_w),
            "sf": self.sf,
            "margin_db": self.margin_db,
            "trp_est_w": self.trp_est_w,
            "trp_est_dbm": watts_to_dbm(self.trp_est_w),
            "grid": self.grid,
        }


def watts_to_dbm(p: float) -> float:
    return 10.0 * math.log10(p) + 30.0 if p > 0.0 else -math.inf


def estimate_trp(evaluator, grid: SamplingGrid, ref: ReferenceSteps,
                 r0: float = None, with_margin: bool = True) -> TrpEstimate:
    """Grid TRP plus the grid-type margin for the given EUT geometry."""
    sf = sparsity_factor(grid.step_theta, grid.step_phi, ref)
    margin = 0.0
    if with_margin:
        margin = delta_trp_margin(
            grid.kind, sf=sf,
            sf_maximum=sf_max(ref.r_sph, ref.wavelength))
    return TrpEstimate(
        trp_grid_w=trp_grid(evaluator, grid, r0=r0),
        sf=sf, margin_db=margin, grid=grid.summary())


# ---------------------------------------------------------------------------
# Pattern multiplication in the uv-plane
# ---------------------------------------------------------------------------

class TrigInterpolant:
    """Band-limited interpolation of uniform samples on a full turn."""

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 4:
            raise ValueError("need at least 4 uniform samples on the circle")
        self.n = len(samples)
        self.coef = np.fft.rfft(samples) / self.n

    def __call__(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        orders = np.arange(len(self.coef))
        basis = np.exp(1j * np.outer(psi.ravel(), orders))
        scale = np.full(len(self.coef), 2.0)
        scale[0] = 1.0
        if self.n % 2 == 0:
            scale[-1] = 1.0
        out = basis @ (self.coef * scale)
        return np.real(out).reshape(psi.shape)


class PatternMultiplication:
    """uv-plane power pattern rebuilt from two orthogonal cardinal cuts.

    The horizontal input samples the equator uniformly in azimuth from +x;
    the vertical input samples the xz great circle uniformly from +z toward
    +x.  Within each hemisphere (forward: x >= 0) the pattern is modeled as
    ``S(u, v) = S_H(u) S_V(v) / S(0, 0)`` with u = sin(theta) sin(phi) and
    v = cos(theta); the crossover value S(0, 0) is measured in both cuts
    and the two readings must agree within the configured tolerance.
    """

    def __init__(self, horizontal, vertical, crossover_tol_db: float = 0.5):
        self._sh = TrigInterpolant(horizontal)
        self._sv = TrigInterpolant(vertical)
        self.crossover = {}
        for hemi in ("fwd", "bwd"):
            sh0 = float(self._sh(self._phi_angle(0.0, hemi)))
            sv0 = float(self._sv(self._psi_angle(0.0, hemi)))
            if sh0 <= 0.0 or sv0 <= 0.0:
                raise ValueError(
                    f"crossover power must be positive, got horizontal "
                    f"{sh0!r} / vertical {sv0!r} ({hemi})")
            mismatch = abs(10.0 * math.log10(sh0 / sv0))
            if mismatch > crossover_tol_db:
                raise ValueError(
                    f"crossover mismatch {mismatch:.3f} dB exceeds "
                    f"{crossover_tol_db} dB ({hemi}: horizontal {sh0!r}, "
                    f"vertical {sv0!r})")
            self.crossover[hemi] = math.sqrt(sh0 * sv0)

    @staticmethod
    def _phi_angle(u, hemi):
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        phi = np.arcsin(u)
        return phi if hemi == "fwd" else np.pi - phi

    @staticmethod
    def _psi_angle(v, hemi):
        v = np.clip(np.asarray(v, dtype=float), -1.0, 1.0)
        psi = np.arccos(v)
        return psi if hemi == "fwd" else 2.0 * np.pi - psi

    def horizontal_cut(self, u, hemi: str = "fwd") -> np.ndarray:
        return np.maximum(self._sh(self._phi_angle(u, hemi)), 0.0)

    def vertical_cut(self, v, hemi: str = "fwd") -> np.ndarray:
        return np.maximum(self._sv(self._psi_angle(v, hemi)), 0.0)

    def __call__(self, u, v, hemi: str = "fwd") -> np.ndarray:
        return (self.horizontal_cut(u, hemi) * self.vertical_cut(v, hemi)
                / self.crossover[hemi])

    def trp(self, r0: float = 1.0, n_xi: int = 401, n_alpha: int = 720) -> float:
        """TRP of the rebuilt pattern (inputs in EIRP-like units), watts."""
        total = 0.0
        for hemi in ("fwd", "bwd"):
            total += uv_integrate(
                lambda u, v, h=hemi: self(u, v, h), r0=r0,
                n_xi=n_xi, n_alpha=n_alpha)
        return total / (4.0 * np.pi * r0 * r0)


def pattern_multiply(horizontal, vertical,
                     crossover_tol_db: float = 0.5) -> PatternMultiplication:
    """Build the pattern-multiplication evaluator from two cut sample sets."""
    return PatternMultiplication(horizontal, vertical, crossover_tol_db)


def cut_samples(evaluator, n: int, cut: str) -> np.ndarray:
    """Sample an (theta, phi) evaluator along one cardinal cut."""
    theta, phi = _cut_points(cut, n)
    return np.asarray(evaluator(theta, phi), dtype=float)


def uv_integrate(s_uv, r0: float = 1.0, n_xi: int = 401,
                 n_alpha: int = 720) -> float:
    """Hemispheric power integral of a uv-plane flux evaluator.

    Integrates ``s_uv(u, v)`` over the visible disc u^2 + v^2 <= 1 with the
    solid-angle measure du dv / sqrt(1 - u^2 - v^2), using the polar change
    of variables u = sqrt(1 - xi^2) cos(alpha), v = sqrt(1 - xi^2)
    sin(alpha) that removes the edge singularity (composite Simpson in xi,
    trapezoid in alpha).  Returns r0^2 times the solid-angle integral.
    """
    xi = np.linspace(0.0, 1.0, n_xi)
    alpha = np.arange(n_alpha) * 2.0 * np.pi / n_alpha
    rho = np.sqrt(np.clip(1.0 - xi * xi, 0.0, None))
    uu = rho[:, None] * np.cos(alpha)[None, :]
    vv = rho[:, None] * np.sin(alpha)[None, :]
    vals = np.asarray(s_uv(uu, vv), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("uv integrand returned non-finite samples")
    ring = np.mean(vals, axis=1) * 2.0 * np.pi
    return r0 * r0 * float(simpson(ring, x=xi))
