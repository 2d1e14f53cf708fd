"""Command-line front end: one-off TRP estimates, studies and plot data.

Outputs are UTF-8 CSV/JSON files with deterministic content for a given
seed, plus a JSON run manifest carrying everything needed to reproduce the
run bit-identically (the manifest itself also records wall time).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, montecarlo, nearfield, sampling, sources, swe

EXIT_BAD_INPUT = 2
EXIT_INFEASIBLE = 3


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(path: Path, command: str, config: dict, seed,
                   outputs: list, t_start: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": time.time() - t_start,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


# ---------------------------------------------------------------------------
# Pattern sources for `estimate`
# ---------------------------------------------------------------------------

BUILTIN_PATTERNS = {
    # EIRP-like evaluators (4 pi r^2 S_r at unit radius).
    "case-a": lambda t, p: 4.0 * np.pi * np.sin(t) ** 2,
    "case-b": lambda t, p: 4.0 * np.pi * np.sin(t) ** 2 * np.cos(p) ** 2,
    "isotropic": lambda t, p: np.ones(np.broadcast(t, p).shape),
}

BUILTIN_GEOMETRY = {
    # (r_sph, r_cyl, wavelength) used for sparsity bookkeeping.
    "case-a": (1.0, 1.0, 1.0),
    "case-b": (1.0, 1.0, 1.0),
    "isotropic": (1.0, 1.0, 1.0),
}


def _load_pattern(args):
    """Returns (evaluator, r_sph, r_cyl, wavelength, label)."""
    if args.builtin:
        geo = BUILTIN_GEOMETRY[args.builtin]
        return (BUILTIN_PATTERNS[args.builtin],) + geo + (args.builtin,)
    path = Path(args.source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit2(f"cannot read source file {path}: {exc}")
    if "entries" in data:
        try:
            coeffs = swe.SweCoefficients.from_json_dict(data)
        except (KeyError, ValueError) as exc:
            raise SystemExit2(f"malformed mode-coefficient file: {exc}")
        lam = coeffs.wavelength
        rs = max(coeffs.source_radius, lam / 100.0)
        return (lambda t, p: swe.eirp(coeffs, t, p), rs, rs, lam,
                f"swe:{path.name}")
    if "positions" in data:
        try:
            arr = sources.PointSourceArray.from_json_dict(data)
        except (KeyError, ValueError) as exc:
            raise SystemExit2(f"malformed array file: {exc}")
        elem = sources.ElementModel(args.element) if args.element else sources.ISOTROPIC
        lam = arr.wavelength
        rs = max(arr.r_sph, lam / 100.0)
        rc = max(arr.r_cyl, lam / 100.0)
        return (lambda t, p: sources.eirp_pattern(arr, elem, t, p),
                rs, rc, lam, f"array:{path.name}")
    raise SystemExit2(
        f"source file {path} is neither a mode-coefficient nor an array file")


class SystemExit2(Exception):
    """Bad input; mapped to exit code 2."""


class SystemExit3(Exception):
    """Infeasible request; mapped to exit code 3."""


def cmd_estimate(args) -> int:
    t0 = time.time()
    evaluator, r_sph, r_cyl, lam, label = _load_pattern(args)
    ref = sampling.reference_steps(r_sph, r_cyl, lam)
    try:
        if args.step_deg:
            # explicit steps must tile the spans exactly
            grid = sampling.build_grid(args.grid, np.deg2rad(args.step_deg))
        else:
            step = ref.dtheta_ref * args.sf
            if args.grid == "fullsphere":
                grid = sampling.full_sphere_grid_from_counts(
                    max(1, int(round(np.pi / step))),
                    max(1, int(round(2.0 * np.pi / step))))
            else:
                n = max(3, int(round(2.0 * np.pi / step)))
                grid = sampling.orthogonal_cuts_grid(int(args.grid[-1]),
                                                     2.0 * np.pi / n)
    except ValueError as exc:
        raise SystemExit3(str(exc))
    est = sampling.estimate_trp(evaluator, grid, ref,
                                with_margin=not args.no_margin)
    report = est.to_json_dict()
    report["source"] = label

    if args.pm:
        if args.grid != "cuts2":
            raise SystemExit2("pattern multiplication needs --grid cuts2")
        n_pm = max(8, int(round(360.0 / args.pm_step_deg)))
        s_h = sampling.cut_samples(evaluator, n_pm, "horizontal")
        s_v = sampling.cut_samples(evaluator, n_pm, "vertical-xz")
        try:
            pm = sampling.pattern_multiply(s_h, s_v)
        except ValueError as exc:
            raise SystemExit2(f"pattern multiplication rejected: {exc}")
        report["trp_pm_w"] = pm.trp()
        report["trp_pm_dbm"] = sampling.watts_to_dbm(report["trp_pm_w"])

    text = json.dumps(report, indent=2)
    print(text)
    outputs = []
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(text + "\n", encoding="utf-8")
        outputs.append(out / "estimate.json")
        write_manifest(out / "manifest.json", "estimate", vars(args) | {},
                       None, outputs, t0)
    return 0


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def _study_config(args) -> montecarlo.StudyConfig:
    cfg_kwargs = {}
    if args.config:
        try:
            cfg_kwargs = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit2(f"cannot read config file: {exc}")
        unknown = set(cfg_kwargs) - set(montecarlo.StudyConfig.__dataclass_fields__)
        if unknown:
            raise SystemExit2(f"unknown config keys: {sorted(unknown)}")
        for key in ("sizes", "rho_max", "grids", "sf_list", "sf_sub1",
                    "sub1_sizes", "harmonics", "arrays", "radii_over_lambda"):
            if key in cfg_kwargs:
                cfg_kwargs[key] = tuple(
                    tuple(v) if isinstance(v, list) else v
                    for v in cfg_kwargs[key])
    cfg_kwargs["kind"] = args.kind
    if args.samples is not None:
        cfg_kwargs["n_samples"] = args.samples
    cfg_kwargs["seed"] = args.seed
    if args.threads is not None:
        cfg_kwargs["threads"] = args.threads
    try:
        return montecarlo.StudyConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        raise SystemExit2(f"bad study config: {exc}")


def cmd_study(args) -> int:
    t0 = time.time()
    cfg = _study_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    if args.kind == "small":
        cdfs = montecarlo.run_small_source_study(cfg)
        cdf_rows, summary_rows = [], []
        for name, cdf in cdfs.items():
            for i, err in enumerate(cdf.samples_db):
                cdf_rows.append([name, float(err), (i + 1) / cdf.n])
            p = cdf.query(cfg.percentile)
            summary_rows.append([name, cdf.n, p, cdf.median(),
                                 montecarlo.margin_from_percentile(p)])
            print(f"small-source {name}: p{cfg.percentile:g} = {p:+.3f} dB, "
                  f"margin = {montecarlo.margin_from_percentile(p):.3f} dB")
        write_csv(out / "small_cdf.csv", ["grid", "err_db", "cdf"], cdf_rows)
        write_csv(out / "small_summary.csv",
                  ["grid", "n", f"p{cfg.percentile:g}_db", "median_db",
                   "delta_trp_db"], summary_rows)
        outputs += [out / "small_cdf.csv", out / "small_summary.csv"]

    elif args.kind == "sparse":
        results = montecarlo.run_large_array_study(cfg)
        rows = [[r.grid, r.sf_requested, r.sf_actual, r.sf_caption,
                 r.d_over_lambda, r.rho_max, r.n, r.p5_db, r.median_db,
                 r.delta_trp_db] for r in results]
        write_csv(out / "sparse_margins.csv",
                  ["grid", "sf_requested", "sf_actual", "sf_caption",
                   "d_over_lambda", "rho_max", "n", "p5_db", "median_db",
                   "delta_trp_db"], rows)
        outputs.append(out / "sparse_margins.csv")
        worst = {}
        for r in results:
            worst[r.grid] = max(worst.get(r.grid, 0.0), r.delta_trp_db)
        for grid, val in worst.items():
            print(f"sparse {grid}: worst margin {val:.3f} dB")

    elif args.kind == "beamsweep":
        sweep_rows, beam_rows = montecarlo.run_beam_sweep_study(cfg)
        write_csv(out / "beamsweep_errors.csv",
                  ["harmonic", "grid", "sf_requested", "sf_actual", "beam",
                   "trp_dense_w", "err_db"],
                  [[r.harmonic, r.grid, r.sf_requested, r.sf_actual, r.beam,
                    r.trp_dense_w, r.err_db] for r in sweep_rows])
        write_csv(out / "beamsweep_trp.csv",
                  ["harmonic", "beam_index", "trp_w", "trp_rel_mean_db"],
                  [[r.harmonic, r.beam_index, r.trp_w, r.trp_rel_mean_db]
                   for r in beam_rows])
        outputs += [out / "beamsweep_errors.csv", out / "beamsweep_trp.csv"]
        for h in cfg.harmonics:
            sweeps = [abs(r.err_db) for r in sweep_rows
                      if r.harmonic == h and r.beam == "sweep"
                      and r.grid == "cuts2"]
            if sweeps:
                print(f"beamsweep h={h}: two-cut sweep-average max |err| = "
                      f"{max(sweeps):.3f} dB")

    elif args.kind == "nearfield":
        rows = montecarlo.run_nearfield_error_study(cfg)
        write_csv(out / "nearfield_errors.csv",
                  ["array", "kind", "r_over_lambda", "r_minus_r_over_lambda",
                   "err_db"],
                  [[r.array, r.kind, r.r_over_lambda, r.r_minus_r_over_lambda,
                    r.err_db] for r in rows])
        outputs.append(out / "nearfield_errors.csv")
        arrays = sorted({r.array for r in rows})
        for a in arrays:
            ff = max(r.err_db for r in rows
                     if r.array == a and r.kind == "flux-approx")
            bp = max(r.err_db for r in rows
                     if r.array == a and r.kind == "back-propagation")
            print(f"nearfield {a}: max flux-approx err {ff:.4f} dB, "
                  f"max back-propagation err {bp:.3e} dB")
    else:
        raise SystemExit2(f"unknown study kind {args.kind!r}")

    write_manifest(out / "manifest.json", f"study {args.kind}",
                   {k: v for k, v in vars(args).items() if k != "func"},
                   cfg.seed, outputs, t0)
    return 0


# ---------------------------------------------------------------------------
# Plot data reshaping
# ---------------------------------------------------------------------------

def _read_csv(path: Path) -> tuple:
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def cmd_plotdata(args) -> int:
    t0 = time.time()
    path = Path(args.study_output)
    if not path.exists():
        raise SystemExit2(f"no such study output: {path}")
    header, rows = _read_csv(path)
    cols = {name: i for i, name in enumerate(header)}
    series_rows = []
    try:
        if "sf_requested" in cols and "delta_trp_db" in cols:
            for r in rows:
                series = (f"{r[cols['grid']]}-D{r[cols['d_over_lambda']]}"
                          f"-rho{r[cols['rho_max']]}")
                series_rows.append(
                    [series, float(r[cols["sf_actual"]]),
                     float(r[cols["delta_trp_db"]])])
        elif "cdf" in cols:
            for r in rows:
                series_rows.append([r[cols["grid"]], float(r[cols["err_db"]]),
                                    float(r[cols["cdf"]])])
        elif "r_over_lambda" in cols:
            for r in rows:
                series = f"{r[cols['array']]}-{r[cols['kind']]}"
                series_rows.append([series, float(r[cols["r_over_lambda"]]),
                                    float(r[cols["err_db"]])])
        elif "beam" in cols:
            for r in rows:
                series = (f"h{r[cols['harmonic']]}-{r[cols['grid']]}"
                          f"-beam{r[cols['beam']]}")
                series_rows.append([series, float(r[cols["sf_actual"]]),
                                    float(r[cols["err_db"]])])
        else:
            raise SystemExit2(f"unrecognized study output schema: {header}")
    except (ValueError, IndexError) as exc:
        raise SystemExit2(f"unrecognized study output schema: {exc}")

    out = Path(args.out) if args.out else path.with_name(path.stem + "_plot.csv")
    write_csv(out, ["series", "x", "y"], series_rows)
    print(f"wrote {out}")
    outputs = [out]
    if args.svg:
        svg_path = out.with_suffix(".svg")
        _write_svg(svg_path, series_rows)
        outputs.append(svg_path)
        print(f"wrote {svg_path}")
    write_manifest(out.parent / (out.stem + "_manifest.json"), "plotdata",
                   {k: v for k, v in vars(args).items() if k != "func"},
                   None, outputs, t0)
    return 0


def _write_svg(path: Path, series_rows: list, width: int = 640,
               height: int = 420) -> None:
    """Minimal line chart, one polyline per series."""
    by_series = {}
    for s, x, y in series_rows:
        by_series.setdefault(s, []).append((x, y))
    xs = [x for _, x, _ in series_rows]
    ys = [y for _, _, y in series_rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    spanx = (x1 - x0) or 1.0
    spany = (y1 - y0) or 1.0
    pad = 40
    def sx(x):
        return pad + (x - x0) / spanx * (width - 2 * pad)
    def sy(y):
        return height - pad - (y - y0) / spany * (height - 2 * pad)
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for i, (name, pts) in enumerate(sorted(by_series.items())):
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        color = palette[i % len(palette)]
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"><title>{name}'
                     f'</title></polyline>')
    parts.append("</svg>")
    path.write_text("\n".join(parts), encoding="utf-8")


# ---------------------------------------------------------------------------
# SWE utilities
# ---------------------------------------------------------------------------

def cmd_swe(args) -> int:
    if args.swe_cmd == "fit":
        try:
            arr = sources.PointSourceArray.load(args.array)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise SystemExit2(f"cannot load array: {exc}")
        elem = sources.ElementModel(args.element)
        l_max = args.order or swe.fit_order(arr.k, arr.r_sph)
        ff = swe.FarFieldGrid.from_pattern(
            lambda t, p: sources.farfield_pattern(arr, elem, t, p), l_max)
        coeffs = swe.coeffs_from_farfield(ff, l_max, arr.k,
                                          source_radius=arr.r_sph)
        coeffs.save(args.out)
        print(f"fitted order {l_max}, TRP = {coeffs.trp()!r} W -> {args.out}")
        return 0
    if args.swe_cmd == "eval":
        try:
            coeffs = swe.SweCoefficients.load(args.coeffs)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise SystemExit2(f"cannot load coefficients: {exc}")
        thetas = np.deg2rad(np.arange(0.0, 180.1, args.step_deg))
        phis = np.deg2rad(np.arange(0.0, 360.0, args.step_deg))
        tm, pm = np.meshgrid(thetas, phis, indexing="ij")
        try:
            fs = swe.evaluate_fields(coeffs, args.radius, tm, pm)
        except ValueError as exc:
            raise SystemExit3(str(exc))
        from .nearfield import flux_true, flux_farfield_approx
        s_true = np.asarray(flux_true(fs)).reshape(tm.shape)
        s_ff = np.asarray(flux_farfield_approx(fs)).reshape(tm.shape)
        rows = []
        for i in range(tm.shape[0]):
            for j in range(tm.shape[1]):
                rows.append([np.rad2deg(tm[i, j]), np.rad2deg(pm[i, j]),
                             float(s_true[i, j]), float(s_ff[i, j])])
        write_csv(Path(args.out), ["theta_deg", "phi_deg", "s_true", "s_ff"],
                  rows)
        print(f"wrote {args.out}")
        return 0
    if args.swe_cmd == "roundtrip":
        try:
            coeffs = swe.SweCoefficients.load(args.coeffs)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise SystemExit2(f"cannot load coefficients: {exc}")
        ff = swe.farfield_on_grid(coeffs)
        back = swe.coeffs_from_farfield(ff, coeffs.l_max, coeffs.k,
                                        coeffs.source_radius)
        err = float(np.max(np.abs(back.a - coeffs.a)))
        scale = float(np.max(np.abs(coeffs.a))) or 1.0
        print(f"round-trip max coefficient error: {err!r} "
              f"(relative {err / scale!r})")
        return 0
    raise SystemExit2(f"unknown swe subcommand {args.swe_cmd!r}")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otatrp",
        description="Over-the-air TRP assessment toolbox: grid estimators, "
                    "Monte Carlo studies and near-field probe analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="one-off grid TRP estimate")
    src = p_est.add_mutually_exclusive_group(required=True)
    src.add_argument("--source", help="SWE or array JSON file")
    src.add_argument("--builtin", choices=sorted(BUILTIN_PATTERNS),
                     help="built-in analytic test pattern")
    p_est.add_argument("--element", choices=["isotropic", "hertz-dipole",
                                             "half-wave-dipole"],
                       help="element model for array sources")
    p_est.add_argument("--grid", choices=["fullsphere", "cuts2", "cuts3"],
                       default="fullsphere")
    step = p_est.add_mutually_exclusive_group()
    step.add_argument("--step-deg", type=float, help="angular step, degrees")
    step.add_argument("--sf", type=float, default=1.0,
                      help="sparsity factor (default 1)")
    p_est.add_argument("--pm", action="store_true",
                       help="add a pattern-multiplication estimate (cuts2)")
    p_est.add_argument("--pm-step-deg", type=float, default=1.0)
    p_est.add_argument("--no-margin", action="store_true")
    p_est.add_argument("--out", help="directory for estimate.json + manifest")
    p_est.set_defaults(func=cmd_estimate)

    p_study = sub.add_parser("study", help="run a Monte Carlo study")
    p_study.add_argument("kind", choices=["small", "sparse", "beamsweep",
                                           "nearfield"])
    p_study.add_argument("--config", help="JSON config file")
    p_study.add_argument("--samples", type=int)
    p_study.add_argument("--seed", type=int, required=True)
    p_study.add_argument("--threads", type=int)
    p_study.add_argument("--out", default="study_out")
    p_study.set_defaults(func=cmd_study)

    p_plot = sub.add_parser("plotdata", help="reshape study output for plotting")
    p_plot.add_argument("study_output")
    p_plot.add_argument("--out")
    p_plot.add_argument("--svg", action="store_true")
    p_plot.set_defaults(func=cmd_plotdata)

    p_swe = sub.add_parser("swe", help="mode-coefficient utilities")
    swe_sub = p_swe.add_subparsers(dest="swe_cmd", required=True)
    p_fit = swe_sub.add_parser("fit", help="fit modes to an array far field")
    p_fit.add_argument("array")
    p_fit.add_argument("--element", default="hertz-dipole",
                       choices=["isotropic", "hertz-dipole", "half-wave-dipole"])
    p_fit.add_argument("--order", type=int)
    p_fit.add_argument("--out", default="coeffs.json")
    p_eval = swe_sub.add_parser("eval", help="evaluate flux on a sphere")
    p_eval.add_argument("coeffs")
    p_eval.add_argument("--radius", type=float, required=True)
    p_eval.add_argument("--step-deg", type=float, default=5.0)
    p_eval.add_argument("--out", default="flux.csv")
    p_rt = swe_sub.add_parser("roundtrip", help="far-field round-trip check")
    p_rt.add_argument("coeffs")
    p_swe.set_defaults(func=cmd_swe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except SystemExit3 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
