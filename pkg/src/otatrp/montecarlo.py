"""Monte Carlo studies of grid TRP errors and their margins.

Every study draws each statistical sample from its own counter-based RNG
substream (Philox keyed by the master seed and a study tag, counter set to
the sample index), so results are bit-identical for any worker count and
any partitioning of samples across processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import sampling, sources, swe, nearfield
from .sphmath import random_rotation, unit_radial

_MASK64 = (1 << 64) - 1

# Study tags keep the RNG substreams of different studies disjoint.
_STREAM_SMALL = 1
_STREAM_SPARSE = 2


def sample_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based RNG substream for one Monte Carlo sample."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


@dataclass
class EmpiricalCdf:
    """Sorted error samples in dB with nearest-rank percentile queries."""

    samples_db: np.ndarray

    def __post_init__(self):
        self.samples_db = np.sort(np.asarray(self.samples_db, dtype=float))
        if len(self.samples_db) < 1:
            raise ValueError("empty sample set")

    @property
    def n(self) -> int:
        return len(self.samples_db)

    def query(self, p: float) -> float:
        """Nearest-rank percentile, p in (0, 100)."""
        if not 0.0 < p < 100.0:
            raise ValueError("percentile must lie in (0, 100)")
        rank = max(1, int(math.ceil(p / 100.0 * self.n)))
        return float(self.samples_db[rank - 1])

    def median(self) -> float:
        return self.query(50.0)


def cdf_percentile(cdf: EmpiricalCdf, p: float) -> float:
    """Nearest-rank percentile of an empirical error distribution, dB."""
    return cdf.query(p)


def margin_from_percentile(p_db: float) -> float:
    """Margin rule: |low percentile| when it is an underestimate, else 0."""
    return max(0.0, -p_db)


@dataclass
class StudyConfig:
    """Common knobs of the Monte Carlo studies.

    ``sizes`` are EUT diameters in wavelengths, ``sf_list`` the requested
    sparsity factors (steps capped at 15 degrees), ``rho_max`` the upper
    limits of the per-sample correlation draw.  Sub-unity sparsity factors
    are added only for the sizes listed in ``sub1_sizes``.
    """

    kind: str = "sparse"
    n_samples: int = 10_000
    seed: int = 1
    percentile: float = 5.0
    threads: int = 1
    sizes: tuple = (5.0, 10.0, 20.0)
    rho_max: tuple = (0.0, 0.2, 0.5)
    grids: tuple = ("fullsphere", "cuts2", "cuts3")
    sf_list: tuple = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
    sf_sub1: tuple = (0.25, 0.5, 0.75)
    sub1_sizes: tuple = (10.0,)
    harmonics: tuple = (1, 2, 3)
    arrays: tuple = ((1, 4), (4, 4), (8, 8), (12, 12))
    radii_over_lambda: tuple = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 10.0,
                                20.0, 50.0, 1.0e6)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 < self.percentile <= 50.0:
            raise ValueError("percentile must lie in (0, 50]")


def _map_samples(cfg: StudyConfig, ctx_builder, ctx_args, sample_fn,
                 chunk_fn, initializer) -> list:
    """Map per-sample work over indices 0..n_samples - 1, in index order.

    Serial when ``cfg.threads <= 1``, otherwise a process pool.  Results
    depend only on the sample index, so output is identical for any worker
    count.
    """
    n = cfg.n_samples
    if cfg.threads <= 1:
        ctx = ctx_builder(*ctx_args)
        return [sample_fn(ctx, i) for i in range(n)]
    chunk = max(1, math.ceil(n / (cfg.threads * 8)))
    spans = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=cfg.threads, initializer=initializer,
                             initargs=(ctx_args,)) as pool:
        for part in pool.map(chunk_fn, spans):
            out.extend(part)
    return out


# ---------------------------------------------------------------------------
# Small-source study: random sparse mode sets at a fixed truncation
# ---------------------------------------------------------------------------

SMALL_STUDY_GRIDS = ("fullsphere", "cuts2")

_SMALL_CTX = None


def _small_context(seed: int, l_max: int = 12, step_deg: float = 15.0):
    step = np.deg2rad(step_deg)
    grids = {
        "fullsphere": sampling.full_sphere_grid(step),
        "cuts2": sampling.orthogonal_cuts_grid(2, step),
    }
    theta = np.concatenate([grids[n].theta for n in SMALL_STUDY_GRIDS])
    phi = np.concatenate([grids[n].phi for n in SMALL_STUDY_GRIDS])
    b_t, b_p = swe.farfield_mode_basis(l_max, theta, phi)
    slices = {}
    at = 0
    for name in SMALL_STUDY_GRIDS:
        slices[name] = slice(at, at + grids[name].n_points)
        at += grids[name].n_points
    return {
        "seed": seed, "j_total": swe.mode_count(l_max),
        "grids": grids, "slices": slices, "b_t": b_t, "b_p": b_p,
    }


def _small_sample(ctx, index: int) -> list:
    rng = sample_rng(ctx["seed"], _STREAM_SMALL, index)
    j_total = ctx["j_total"]
    n_modes = int(rng.integers(1, j_total + 1))
    picks = rng.choice(j_total, size=n_modes, replace=False)
    w = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    w /= np.sqrt(np.sum(np.abs(w) ** 2))
    f_t = w @ ctx["b_t"][picks]
    f_p = w @ ctx["b_p"][picks]
    eirp = np.abs(f_t) ** 2 + np.abs(f_p) ** 2
    out = []
    for name in SMALL_STUDY_GRIDS:
        avg = sampling.grid_average(eirp[ctx["slices"][name]], ctx["grids"][name])
        out.append(10.0 * math.log10(avg))
    return out


def _init_small_worker(ctx_args):
    global _SMALL_CTX
    _SMALL_CTX = _small_context(*ctx_args)


def _small_chunk(span):
    return [_small_sample(_SMALL_CTX, i) for i in range(span[0], span[1])]


def run_small_source_study(cfg: StudyConfig) -> dict:
    """Grid TRP error CDFs for random mode sets of an electrically small EUT.

    Each sample draws a uniform mode count N <= J = 336 (truncation order
    12), a uniform mode subset and complex normal weights, normalizes to
    exactly unit TRP, and records ``10 log10(TRP_grid)`` on a 15 degree
    full-sphere grid and a 15 degree two-cut grid.  Returns ``{grid:
    EmpiricalCdf}``.
    """
    rows = _map_samples(cfg, _small_context, (cfg.seed,), _small_sample,
                        _small_chunk, _init_small_worker)
    errors = np.asarray(rows, dtype=float)
    return {name: EmpiricalCdf(errors[:, i])
            for i, name in enumerate(SMALL_STUDY_GRIDS)}


# ---------------------------------------------------------------------------
# Large-array sparse-sampling study
# ---------------------------------------------------------------------------

@dataclass
class SparseGridResult:
    grid: str
    sf_requested: float
    sf_actual: float
    sf_caption: float
    d_over_lambda: float
    rho_max: float
    n: int
    p5_db: float
    median_db: float
    delta_trp_db: float


_SPARSE_CTX = None


def _sparse_grid_set(d_over_lambda: float, grids, sf_list) -> list:
    """(kind, sf_requested, grid) for one EUT size; steps capped at 15 deg.

    Steps are rounded to the nearest divisor of the span, so the realized
    sparsity factor can differ slightly from the requested one; both are
    reported.
    """
    ref = sampling.reference_steps(d_over_lambda / 2.0, d_over_lambda / 2.0, 1.0)
    out = []
    for kind in grids:
        for sf in sf_list:
            step = min(sf * ref.dtheta_ref, sampling.MAX_STEP_RAD)
            if kind == "fullsphere":
                grid = sampling.full_sphere_grid_from_counts(
                    max(1, int(round(np.pi / step))),
                    max(1, int(round(2.0 * np.pi / step))))
            else:
                n = max(3, int(round(2.0 * np.pi / step)))
                grid = sampling.orthogonal_cuts_grid(int(kind[-1]),
                                                     2.0 * np.pi / n)
            out.append((kind, sf, grid))
    return out


def _sparse_context(seed: int, d_over_lambda: float, rho_max: float,
                    grids, sf_list):
    k = 2.0 * np.pi  # wavelength 1; all sizes in wavelengths
    if sources.max_square_rows(d_over_lambda, k) < 2:
        raise ValueError(
            f"no feasible row count for D = {d_over_lambda} wavelengths")
    grid_set = _sparse_grid_set(d_over_lambda, grids, sf_list)
    theta = np.concatenate([g.theta for _, _, g in grid_set])
    phi = np.concatenate([g.phi for _, _, g in grid_set])
    dirs = unit_radial(theta, phi)
    # Block-diagonal averaging matrix: one dot product per grid per sample.
    avg = np.zeros((len(grid_set), theta.size))
    at = 0
    for row, (_, _, g) in enumerate(grid_set):
        avg[row, at:at + g.n_points] = sampling.average_weights(g)
        at += g.n_points
    # Per-row-count geometry: y/z coordinates plus the sinc mutual-power
    # Gram matrix used for the exact unit-TRP normalization.
    geom = {}
    for n_row in range(2, 11):
        spacing = d_over_lambda / (np.sqrt(2.0) * (n_row - 1))
        if spacing < 0.5 * (1.0 - 1e-12):
            continue
        side = d_over_lambda / np.sqrt(2.0)
        coords = np.linspace(-side / 2.0, side / 2.0, n_row)
        yy, zz = np.meshgrid(coords, coords, indexing="ij")
        pos = np.column_stack([np.zeros(yy.size), yy.ravel(), zz.ravel()])
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        geom[n_row] = (coords, np.sinc(k * dist / np.pi))
    return {
        "seed": seed, "k": k, "rho_max": rho_max, "geom": geom,
        "grid_set": grid_set, "dirs": dirs, "avg": avg,
    }


def _sparse_sample(ctx, index: int) -> np.ndarray:
    rng = sample_rng(ctx["seed"], _STREAM_SPARSE, index)
    geom = ctx["geom"]
    while True:
        n_row = int(rng.integers(2, 11))
        if n_row in geom:
            break
    rot = random_rotation(rng)
    rho = rng.uniform(0.0, ctx["rho_max"]) if ctx["rho_max"] > 0.0 else 0.0
    coords, gram = geom[n_row]
    w = sources.correlated_weights(n_row * n_row, rho, rng)
    w = w / np.sqrt(float(np.real(np.conj(w) @ gram @ w)))
    # EIRP on all grid points at once; the planar geometry separates the
    # array factor into y and z phase ladders after rotating directions.
    q = ctx["dirs"] @ rot
    k = ctx["k"]
    t_y = np.exp(1j * k * q[:, 1][:, None] * coords[None, :])
    t_z = np.exp(1j * k * q[:, 2][:, None] * coords[None, :])
    af = np.einsum("pi,pi->p", t_y @ w.reshape(n_row, n_row), t_z)
    return 10.0 * np.log10(ctx["avg"] @ np.abs(af) ** 2)


def _init_sparse_worker(ctx_args):
    global _SPARSE_CTX
    _SPARSE_CTX = _sparse_context(*ctx_args)


def _sparse_chunk(span):
    return [_sparse_sample(_SPARSE_CTX, i) for i in range(span[0], span[1])]


def run_large_array_study(cfg: StudyConfig) -> list:
    """Sparse-grid margins for randomly rotated, weakly correlated arrays.

    For every (size, rho_max) combination, draws ``n_samples`` random
    quadratic arrays (uniform row count 2..10 redrawn until the spacing is
    >= lambda/2, random rotation, correlated weights with rho uniform on
    [0, rho_max], exact unit TRP via the sinc mutual-power form) and
    accumulates grid TRP errors for every grid x SF.  The margin is the
    magnitude of the negative part of the configured low percentile.
    """
    results = []
    for d in cfg.sizes:
        sf_list = list(cfg.sf_list)
        if d in cfg.sub1_sizes:
            sf_list = sorted(set(sf_list) | set(cfg.sf_sub1))
        ref = sampling.reference_steps(d / 2.0, d / 2.0, 1.0)
        for rho in cfg.rho_max:
            ctx_args = (cfg.seed, d, rho, tuple(cfg.grids), tuple(sf_list))
            rows = _map_samples(cfg, _sparse_context, ctx_args, _sparse_sample,
                                _sparse_chunk, _init_sparse_worker)
            errors = np.asarray(rows, dtype=float)
            grid_set = _sparse_grid_set(d, cfg.grids, sf_list)
            for col, (kind, sf_req, grid) in enumerate(grid_set):
                cdf = EmpiricalCdf(errors[:, col])
                p_low = cdf.query(cfg.percentile)
                sf_act = sampling.sparsity_factor(
                    grid.step_theta, grid.step_phi, ref)
                results.append(SparseGridResult(
                    grid=kind, sf_requested=sf_req,
                    sf_actual=sf_act, sf_caption=2.0 * sf_act,
                    d_over_lambda=d, rho_max=rho, n=cdf.n,
                    p5_db=p_low, median_db=cdf.median(),
                    delta_trp_db=margin_from_percentile(p_low)))
    return results


# ---------------------------------------------------------------------------
# Beam sweeping study
# ---------------------------------------------------------------------------

@dataclass
class BeamSweepRow:
    harmonic: int
    grid: str
    sf_requested: float
    sf_actual: float
    beam: str
    trp_dense_w: float
    err_db: float


@dataclass
class BeamTrpRow:
    harmonic: int
    beam_index: int
    trp_w: float
    trp_rel_mean_db: float


def beam_sweep_stand_in(k0: float = 2.0 * np.pi) -> tuple:
    """Stand-in beam-steered device for the sweep study.

    An 8 x 8 grid with 0.7 wavelength spacing in the yz-plane, a broad
    cosine-taper element (q = 0.5) and the default 9 x 5 beam raster with
    conjugate-phase steering at the fundamental.  The spacing and element
    width were chosen so the stand-in reproduces the reported sweep
    phenomenology: a roughly 2 dB two-cut overestimate of the sweep
    average next to order-10 dB individual-beam errors.
    """
    lam0 = 2.0 * np.pi / k0
    arr = sources.dipole_array(8, 8, 0.7 * lam0, 0.7 * lam0, k0)
    elem = sources.cosine_taper_element(q=0.5)
    beam_grid = sources.BeamGrid()
    weights = [sources.steering_weights(beam_grid, b, arr.positions, k0)
               for b in range(beam_grid.n_beams)]
    return arr, elem, beam_grid, weights


def _beam_eirps(arr: sources.PointSourceArray, elem: sources.ElementModel,
                weights, theta, phi) -> np.ndarray:
    """Per-beam EIRP matrix (n_beams, npts) from one shared phase matrix."""
    dirs = unit_radial(theta, phi).reshape(-1, 3)
    phase = np.exp(1j * arr.k * (dirs @ arr.positions.T))
    gain = elem.power_pattern(np.asarray(theta).ravel(), np.asarray(phi).ravel())
    out = np.empty((len(weights), dirs.shape[0]))
    for b, w in enumerate(weights):
        out[b] = np.abs(phase @ w) ** 2 * gain
    return out


def run_beam_sweep_study(cfg: StudyConfig) -> tuple:
    """Per-beam and sweep-average grid TRP errors at harmonic frequencies.

    The stand-in array reuses its fundamental-frequency steering weights at
    every harmonic (frozen excitation, scaled wavenumber).  Returns
    ``(sweep_rows, beam_trp_rows)``.
    """
    k0 = 2.0 * np.pi
    arr, elem, _, weights = beam_sweep_stand_in(k0)
    r_sph = arr.r_sph
    sweep_rows, beam_rows = [], []
    for h in cfg.harmonics:
        k_h = h * k0
        arr_h = sources.PointSourceArray(arr.positions, arr.weights, k_h)
        lam_h = 2.0 * np.pi / k_h
        ref = sampling.reference_steps(r_sph, arr.r_cyl, lam_h)

        # Dense reference TRP per beam on a Gauss-Legendre sphere.
        l_band = swe.fit_order(k_h, r_sph)
        n_t, n_p = 2 * l_band + 2, 2 * l_band + 2
        x, gl_w = np.polynomial.legendre.leggauss(n_t)
        tm, pm = np.meshgrid(np.arccos(x),
                             np.arange(n_p) * 2.0 * np.pi / n_p, indexing="ij")
        eirps = _beam_eirps(arr_h, elem, weights, tm, pm)
        per_beam_dense = np.einsum(
            "t,btp->b", gl_w, eirps.reshape(len(weights), n_t, n_p)
        ) * (2.0 * np.pi / n_p) / (4.0 * np.pi)
        mean_trp = float(np.mean(per_beam_dense))
        for b, t in enumerate(per_beam_dense):
            beam_rows.append(BeamTrpRow(
                harmonic=h, beam_index=b, trp_w=float(t),
                trp_rel_mean_db=10.0 * math.log10(t / mean_trp)))

        # Grid estimates: one concatenated point set per harmonic.
        grid_set = _sparse_grid_set_for_beams(ref, cfg)
        theta = np.concatenate([g.theta for _, _, g in grid_set])
        phi = np.concatenate([g.phi for _, _, g in grid_set])
        eirps_g = _beam_eirps(arr_h, elem, weights, theta, phi)
        at = 0
        for kind, sf, grid in grid_set:
            sl = slice(at, at + grid.n_points)
            at += grid.n_points
            sf_act = sampling.sparsity_factor(grid.step_theta, grid.step_phi, ref)
            per_beam_grid = np.array([
                sampling.grid_average(eirps_g[b, sl], grid)
                for b in range(len(weights))])
            for b in range(len(weights)):
                sweep_rows.append(BeamSweepRow(
                    harmonic=h, grid=kind, sf_requested=sf, sf_actual=sf_act,
                    beam=str(b), trp_dense_w=float(per_beam_dense[b]),
                    err_db=10.0 * math.log10(per_beam_grid[b] / per_beam_dense[b])))
            sweep_rows.append(BeamSweepRow(
                harmonic=h, grid=kind, sf_requested=sf, sf_actual=sf_act,
                beam="sweep", trp_dense_w=mean_trp,
                err_db=10.0 * math.log10(
                    float(np.mean(per_beam_grid)) / mean_trp)))
    return sweep_rows, beam_rows


def _sparse_grid_set_for_beams(ref: sampling.ReferenceSteps,
                               cfg: StudyConfig) -> list:
    out = []
    for kind in cfg.grids:
        if kind == "cuts3":
            continue  # the sweep study compares full sphere and two cuts
        for sf in cfg.sf_list:
            step = min(sf * ref.dtheta_ref, sampling.MAX_STEP_RAD)
            if kind == "fullsphere":
                grid = sampling.full_sphere_grid_from_counts(
                    max(1, int(round(np.pi / step))),
                    max(1, int(round(2.0 * np.pi / step))))
            else:
                n = max(3, int(round(2.0 * np.pi / step)))
                grid = sampling.orthogonal_cuts_grid(2, 2.0 * np.pi / n)
            out.append((kind, sf, grid))
    return out


# ---------------------------------------------------------------------------
# Near-field error study
# ---------------------------------------------------------------------------

@dataclass
class NearFieldRow:
    array: str
    kind: str  # "flux-approx" or "back-propagation"
    r_over_lambda: float
    r_minus_r_over_lambda: float
    err_db: float


def run_nearfield_error_study(cfg: StudyConfig) -> list:
    """Flux-approximation and back-propagation TRP errors versus distance.

    Vertical short-dipole arrays (half-wavelength spaced, unit weights) are
    fitted to spherical modes from their analytic far fields; at each
    radius the far-field flux shortcut is compared against the true flux
    integral, and the truncation l <= k r against the full mode set.
    """
    k = 2.0 * np.pi
    rows = []
    for (n_y, n_z) in cfg.arrays:
        arr = sources.dipole_array(n_y, n_z, 0.5, 0.5, k)
        r_sph = arr.r_sph
        l_fit = swe.fit_order(k, r_sph)
        ff = swe.FarFieldGrid.from_pattern(
            lambda t, p: sources.farfield_pattern(arr, sources.HERTZ_DIPOLE, t, p),
            l_fit)
        coeffs = swe.coeffs_from_farfield(ff, l_fit, k, source_radius=r_sph)
        radii = r_sph + np.asarray(cfg.radii_over_lambda, dtype=float)
        err_ff = nearfield.approximation_error_vs_distance(coeffs, radii)
        err_bp = nearfield.back_propagation_error_vs_distance(coeffs, radii)
        label = f"{n_y}x{n_z}"
        for r, e_f, e_b in zip(radii, err_ff, err_bp):
            rows.append(NearFieldRow(label, "flux-approx", r, r - r_sph, e_f))
            rows.append(NearFieldRow(label, "back-propagation", r, r - r_sph, e_b))
    return rows
