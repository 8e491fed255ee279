"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .io import (
    SPECTRA_COLUMNS,
    RunConfig,
    RunRecord,
    config_from_dict,
    ingest_spectra,
    ingest_splittings,
    load_config,
    spectra_rows,
    write_csv,
    to_plain,
    write_json,
)

log = logging.getLogger("nvefield")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    """Argument errors count as configuration errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", type=Path, help="YAML run configuration", **d)
    p.add_argument("--seed", type=int, help="override the first configured seed", **d)
    p.add_argument("--out-dir", type=Path, help="output directory (overrides output_dir)", **d)
    p.add_argument("--threads", type=int, help="worker threads for detuning grids", **({"default": argparse.SUPPRESS} if suppress else {"default": 1}))
    p.add_argument("--quiet", action="store_true", help="only report warnings and errors", **d)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nvefield", description="Ensemble NV electrometry toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("field-dist", "calibrate the analytic law and sample internal fields")
    p.add_argument("--rho-c-ppm", type=float, help="charge density (default: config sample.rho_c)")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--method", choices=["body", "mode"], default="body", help="calibration rule")
    p.add_argument("--exact", action="store_true", help="use the all-charges sphere sampler")
    p.add_argument("--out", type=Path, help="sample CSV (default: <out-dir>/field_dist.csv)")

    p = add("spectrum", "synthesize ODMR spectra")
    p.add_argument("--detuning-ghz", type=_floats, default=[0.0], help="comma-separated")
    p.add_argument("--preset", choices=["5K", "40K", "55K", "100K", "custom"], default="custom",
                   help="temperature preset; custom uses the configured broadening")
    p.add_argument("--kind", choices=["total", "resonant", "offresonant"], default="total")
    p.add_argument("--half-width", type=float, help="MHz (default 60 for presets, 15 otherwise)")
    p.add_argument("--step", type=float, help="MHz (default 0.06 for presets, 0.03 otherwise)")
    p.add_argument("--out", type=Path, help="CSV (default: <out-dir>/spectra.csv)")

    p = add("fluorescence", "configuration fractions and relative fluorescence against detuning")
    p.add_argument("--detuning-min", type=float, default=-700.0, help="GHz")
    p.add_argument("--detuning-max", type=float, default=700.0, help="GHz")
    p.add_argument("--detuning-step", type=float, default=10.0, help="GHz")
    p.add_argument("--out", type=Path, help="CSV (default: <out-dir>/fluorescence.csv)")

    p = add("fit", "fit excited-state susceptibilities")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="CSV detuning_ghz,pi_perp_mhz,pi_perp_err_mhz")
    src.add_argument("--spectra", type=Path, help="CSV detuning_ghz,mw_offset_mhz,signal")
    src.add_argument("--synthetic", action="store_true", help="noisy splittings from the configured model")
    p.add_argument("--sigma", type=float, default=0.1, help="MHz error for --spectra and --synthetic")
    p.add_argument("--scan", type=Path, help="CSV rho_c_ppm,kappa_ih_mhz for the systematic grid")
    p.add_argument("--out", type=Path, help="JSON (default: <out-dir>/fit.json)")

    p = add("sensitivity", "sensitivity budget against NV density")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--rho-nv-ppm", type=_floats, help="comma-separated (default: reference density)")
    grp.add_argument("--sweep", type=_floats, metavar="MIN,MAX,N", help="log-spaced density sweep")
    p.add_argument("--kappa0e-ghz", type=float, choices=[10.0, 100.0], help="intrinsic optical width")
    p.add_argument("--volume-mm3", type=float, help="illumination volume")
    p.add_argument("--out", type=Path, help="CSV (default: <out-dir>/sensitivity.csv)")

    p = add("bias-field", "bias field that lifts one NV group clear of the other three")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--rho-nv-ppm", type=_floats, help="comma-separated; uses the optical linewidth model")
    grp.add_argument("--gamma-e-mhz", type=float, help="optical linewidth given directly")
    p.add_argument("--kappa0e-ghz", type=float, choices=[10.0, 100.0], help="intrinsic optical width")
    p.add_argument("--chi-e-perp", type=float, default=1.4, help="MHz/(V/cm)")
    p.add_argument("--chi-e-par", type=float, default=0.7, help="MHz/(V/cm)")

    p = add("theory", "orbital-model susceptibility estimates")
    p.add_argument("--orbitals", type=Path, help="YAML file with OrbitalInputs fields")

    p = add("reproduce", "regenerate figure and table bundles")
    p.add_argument("which", nargs="?", default="all", choices=["all", "fig2b", "fig3", "table_sens"])
    return ap


# -- commands ---------------------------------------------------------------


def _cmd_field_dist(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .constants import as_density
    from .field import FieldDistribution, calibrate, sample_field_fast, sample_field_mc, windowed_ks_distance

    rho = as_density(cfg.sample.rho_c if args.rho_c_ppm is None else args.rho_c_ppm)
    if rho.value_ppm <= 0:
        raise ConfigError("--rho-c-ppm must be positive")
    if args.samples < 1000:
        raise ConfigError("--samples must be at least 1000")
    cal = calibrate(rho, seed, n_samples=args.samples, method=args.method)
    dist = FieldDistribution(rho.scaled(cal.ratio), rho)
    # an independent stream from the one used for calibration
    sampler = sample_field_mc if args.exact else sample_field_fast
    fv = sampler(rho, rng_seed=[seed, 1], n_samples=args.samples)
    mags = fv.magnitude
    csv_path = args.out or out / "field_dist.csv"
    rec.add(write_csv(csv_path, ["E_vcm", "E_par_vcm", "E_perp_vcm"], zip(mags, fv.e_parallel, fv.e_perp),
                      cfg, seed), out)
    edges = np.linspace(0.0, 6.0 * dist.e0, 201)
    hist, _ = np.histogram(mags, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dens = hist / (mags.size * np.diff(edges))
    pdf_path = csv_path.with_name(csv_path.stem + "_pdf.csv")
    rec.add(write_csv(pdf_path, ["E_vcm", "pdf_analytic", "pdf_monte_carlo"], zip(centers, dist.pdf(centers), dens),
                      cfg, seed), out)
    summary = {
        "rho_c_ppm": rho.value_ppm,
        "rho_eff_ppm": dist.rho_eff.value_ppm,
        "rho_eff_ratio": cal.ratio,
        "calibration_method": cal.method,
        "e_ref_vcm": dist.e_ref,
        "e0_vcm": dist.e0,
        "chi_g_e0_mhz": cfg.sample.chi_g_perp * dist.e0 * 1e-6,
        "ks_window": windowed_ks_distance(mags, dist, 0.3 * dist.e0, 3.0 * dist.e0),
        "samples": args.samples,
    }
    rec.add(write_json(csv_path.with_suffix(".json"), summary, cfg, seed), out)
    return summary


def _cmd_spectrum(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .spectrum import PRESETS, SpectrumModel, symmetric_grid

    p, b = cfg.sample, cfg.broadening
    preset = args.preset != "custom"
    if preset:
        b = PRESETS[args.preset].broadening
        p = replace(p, epsilon_c=PRESETS[args.preset].epsilon_c)
    half = args.half_width if args.half_width is not None else (60.0 if preset else 15.0)
    step = args.step if args.step is not None else (0.06 if preset else 0.03)
    if not (half > 0 and 0 < step < half):
        raise ConfigError("--half-width and --step must satisfy 0 < step < half-width")
    omega = symmetric_grid(half, step)
    model = SpectrumModel(p)
    fn = {"total": model.total_spectrum, "resonant": model.resonant_spectrum,
          "offresonant": model.offresonant_spectrum}[args.kind]
    items = _map(args.threads, lambda d: (d, fn(d, b, omega)), args.detuning_ghz)
    path = args.out or out / "spectra.csv"
    rec.add(write_csv(path, SPECTRA_COLUMNS, spectra_rows(items), cfg, seed,
                      {"kind": args.kind, "preset": args.preset}), out)
    return {"path": str(path), "detunings_ghz": [d for d, _ in items], "points_per_spectrum": int(omega.size)}


def _cmd_fluorescence(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .spectrum import SpectrumModel

    if not (args.detuning_step > 0 and args.detuning_max >= args.detuning_min):
        raise ConfigError("need --detuning-step > 0 and --detuning-max >= --detuning-min")
    n = int(math.floor((args.detuning_max - args.detuning_min) / args.detuning_step + 1e-9)) + 1
    det = args.detuning_min + args.detuning_step * np.arange(n)
    model = SpectrumModel(cfg.sample)

    def row(d):
        f = model.config_fractions(d)
        return (float(d), model.fluorescence(d), f.f_resonant, f.f_offresonant)

    rows = _map(args.threads, row, det)
    path = args.out or out / "fluorescence.csv"
    rec.add(write_csv(path, ["detuning_ghz", "rel_fluorescence", "f_r", "f_or"], rows, cfg, seed), out)
    best = max(rows, key=lambda r: r[1])
    return {"path": str(path), "max_rel_fluorescence": best[1], "at_detuning_ghz": best[0],
            "resonant_enhancement_at_max": model.resonant_enhancement(best[0])}


def _read_scan(path):
    from .io import read_table

    rows = [(r["rho_c_ppm"], r["kappa_ih_mhz"]) for _, r in read_table(path, ["rho_c_ppm", "kappa_ih_mhz"])]
    if not rows:
        raise DataError(f"{path}: empty systematic grid")
    for rho, k in rows:
        if not (rho > 0 and k >= 0):
            raise DataError(f"{path}: grid needs rho_c_ppm > 0 and kappa_ih_mhz >= 0")
    return rows


def _cmd_fit(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .fitting import (
        DEFAULT_DETUNINGS,
        PeakSummary,
        SplittingModel,
        confidence_region,
        extract_peak_splitting,
        fit_susceptibilities,
        synthesize_splittings,
        systematic_scan,
    )

    if not args.sigma > 0:
        raise ConfigError("--sigma must be positive")
    grid = _read_scan(args.scan) if args.scan else None
    model = SplittingModel(cfg.sample, cfg.broadening)
    if args.data:
        det, pi, err = ingest_splittings(args.data)
        data = [PeakSummary(float(p), float(e), detuning=float(d)) for d, p, e in zip(det, pi, err)]
    elif args.spectra:
        data = [PeakSummary(extract_peak_splitting(spec, d).pi_perp, args.sigma, detuning=d)
                for d, spec in ingest_spectra(args.spectra)]
    else:
        data = synthesize_splittings(DEFAULT_DETUNINGS, cfg.sample.chi_e_perp, cfg.sample.chi_e_par,
                                     args.sigma, rng_seed=seed, model=model)
    fit = fit_susceptibilities(data, model=model)
    ell = confidence_region(fit)
    failures = []
    if grid:
        _, _, failures = systematic_scan(data, grid, cfg.sample, cfg.broadening, central=fit)
    summary = {
        "chi_e_perp": fit.chi_e_perp,
        "chi_e_par": fit.chi_e_par,
        "cov": fit.covariance,
        "chi2_nu": fit.chi2_reduced,
        "stat_err_2sigma": fit.stat_err_2sigma,
        "sys_spread": fit.systematic_spread,
        "scan_failures": [{"rho_c_ppm": g[0], "kappa_ih_mhz": g[1], "error": e} for g, e in failures],
        "n_obs": fit.n_obs,
        "ellipse_semi_axes": ell.semi_axes,
        "ellipse_angle_rad": ell.angle,
        "delta_chi2": ell.delta_chi2,
        "degenerate": fit.degenerate,
        "condition_number": fit.condition_number,
    }
    path = args.out or out / "fit.json"
    rows = [(d.detuning, d.pi_perp, d.pi_perp_err, m)
            for d, m in zip(data, model([d.detuning for d in data], fit.chi_e_perp, fit.chi_e_par))]
    rec.add(write_csv(path.with_name(path.stem + "_residuals.csv"),
                      ["detuning_ghz", "pi_perp_mhz", "pi_perp_err_mhz", "pi_fit_mhz"], rows, cfg, seed), out)
    rec.add(write_json(path, summary, cfg, seed), out)
    return summary


def _protocol(args, cfg: RunConfig):
    pr = cfg.protocol
    changes = {}
    if getattr(args, "kappa0e_ghz", None) is not None:
        # keep the count-rate calibration tied to the configured reference
        changes.update(kappa0_e=args.kappa0e_ghz, r0_reference=pr.r0)
    if getattr(args, "volume_mm3", None) is not None:
        if not args.volume_mm3 > 0:
            raise ConfigError("--volume-mm3 must be positive")
        changes["illumination_volume"] = args.volume_mm3
    return replace(pr, **changes) if changes else pr


def _cmd_sensitivity(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .sensitivity import ROW_HEADER, density_sweep, sensitivity_breakdown

    pr = _protocol(args, cfg)
    path = args.out or out / "sensitivity.csv"
    if args.sweep:
        if len(args.sweep) != 3 or args.sweep[2] != int(args.sweep[2]):
            raise ConfigError("--sweep expects MIN,MAX,N with integer N")
        sw = density_sweep(args.sweep[0], args.sweep[1], int(args.sweep[2]), pr)
        rec.add(write_csv(path, ROW_HEADER, [r.as_row() for r in sw.rows], cfg, seed), out)
        summary = {"slope_low_density": sw.slope_low, "slope_high_density": sw.slope_high,
                   "slope_conventional_high_density": sw.slope_conventional_high,
                   "min_eta_total": float(sw.eta.min()),
                   "rho_at_min_eta_ppm": float(sw.densities[int(np.argmin(sw.eta))])}
    else:
        dens = args.rho_nv_ppm or [pr.reference_density]
        if any(not d > 0 for d in dens):
            raise ConfigError("--rho-nv-ppm values must be positive")
        rows = [sensitivity_breakdown(r, pr) for r in dens]
        rec.add(write_csv(path, ROW_HEADER, [r.as_row() for r in rows], cfg, seed), out)
        summary = {"rows": [dict(zip(ROW_HEADER, r.as_row())) for r in rows]}
    rec.add(write_json(path.with_suffix(".json"), summary, cfg, seed), out)
    return summary


def _cmd_bias_field(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .sensitivity import optical_linewidth, required_bias_field

    if not (args.chi_e_perp > 0 and args.chi_e_par > 0):
        raise ConfigError("--chi-e-perp and --chi-e-par must be positive")
    if args.gamma_e_mhz is not None:
        if not args.gamma_e_mhz >= 0:
            raise ConfigError("--gamma-e-mhz must be non-negative")
        pairs = [(None, args.gamma_e_mhz)]
    else:
        pr = _protocol(args, cfg)
        if any(not d > 0 for d in args.rho_nv_ppm):
            raise ConfigError("--rho-nv-ppm values must be positive")
        pairs = [(d, optical_linewidth(d, pr)) for d in args.rho_nv_ppm]
    rows = [{"rho_nv_ppm": d, "gamma_e_mhz": g,
             "bias_v_per_cm": required_bias_field(g, args.chi_e_perp, args.chi_e_par)} for d, g in pairs]
    return {"rows": rows}


def _cmd_theory(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .theory import OrbitalInputs, comparison_markdown, comparison_table, excited_dipoles_from_orbitals

    inp = OrbitalInputs()
    if args.orbitals:
        try:
            doc = yaml.safe_load(Path(args.orbitals).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read {args.orbitals}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{args.orbitals}: parse error: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("orbitals: top level must be a mapping")
        known = set(OrbitalInputs.__dataclass_fields__)
        for k in doc:
            if k not in known:
                raise ConfigError(f"orbitals.{k}: unknown key")
        if "zN_z1_offsets" in doc:
            doc["zN_z1_offsets"] = tuple(doc["zN_z1_offsets"])
        try:
            inp = OrbitalInputs(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"orbitals: {exc}") from None
    rows = comparison_table(inp)
    out.mkdir(parents=True, exist_ok=True)
    md = out / "theory.md"
    md.write_text(comparison_markdown(rows))
    rec.add(md, out)
    summary = {"inputs": asdict(inp), "dipoles_e_angstrom": asdict(excited_dipoles_from_orbitals(inp)), "table": rows}
    rec.add(write_json(out / "theory.json", summary, cfg, seed), out)
    return summary


def _cmd_reproduce(args, cfg: RunConfig, out: Path, seed: int, rec: RunRecord):
    from .reproduce import StageError, reproduce_figures

    try:
        result = reproduce_figures(args.which, cfg, out, seed, args.threads)
    except StageError as exc:
        raise (NumericalError if isinstance(exc.original, NumericalError) else ConfigError)(str(exc)) from exc
    for f in sorted(out.rglob("*")):
        if f.is_file() and f.name != "run_record.json":
            rec.add(f, out)
    return result


COMMANDS = {
    "field-dist": _cmd_field_dist,
    "spectrum": _cmd_spectrum,
    "fluorescence": _cmd_fluorescence,
    "fit": _cmd_fit,
    "sensitivity": _cmd_sensitivity,
    "bias-field": _cmd_bias_field,
    "theory": _cmd_theory,
    "reproduce": _cmd_reproduce,
}


def _map(threads, fn, items):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _resolve(args) -> tuple[RunConfig, Path, int]:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = replace(cfg, seeds=(args.seed,) + tuple(cfg.seeds[1:]))
    out = Path(args.out_dir) if args.out_dir else Path(cfg.output_dir)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return cfg, out, cfg.seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.quiet:
        warnings.simplefilter("ignore")
    try:
        cfg, out, seed = _resolve(args)
        rec = RunRecord(args.command, cfg.snapshot(), list(cfg.seeds))
        t0 = time.perf_counter()
        result = COMMANDS[args.command](args, cfg, out, seed, rec)
        rec.wall_clock_s = time.perf_counter() - t0
        if rec.outputs:
            rec.write(out / "run_record.json")
        print(json.dumps(to_plain(result), indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
