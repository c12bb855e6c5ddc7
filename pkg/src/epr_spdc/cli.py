"""Command-line interface: ``epr-spdc <command> --config FILE --out DIR``.

Exit codes: 0 success, 1 validation breach (or failed computation), 2 config error.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import instrument, moments, oracle, specfun
from .config import load_config
from .crystal import walk_off_length
from .errors import ConfigError, PreconditionError

EXIT_OK, EXIT_BREACH, EXIT_CONFIG = 0, 1, 2
LT_REFERENCE_MM = 0.186
LT_TOLERANCE = 0.02
FLOAT_FMT = "{:.12g}"

UNCERTAINTY_COLUMNS = [
    "beam_id", "w0_mm", "z_c_mm", "z_mm", "dx1_mm", "dy1_mm", "dkx1_per_mm", "dky1_per_mm",
    "product_x", "product_y", "quad_error",
]
ZSWEEP_COLUMNS = ["z_mm", "gap_mm", "dx1_mm", "dy1_mm", "quad_error"]


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT.format(float(v))


def write_csv(path, schema, header, rows):
    """Write rows in the package CSV schema (schema line, header, ``%.12g`` floats)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={schema} version=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _log(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_uncertainties(cfg, out_dir):
    """One row per configured beam; returns the CSV path."""
    crystal = cfg.crystal()
    grid = cfg.grid()
    rows = []
    for beam in cfg.beams:
        t0 = time.perf_counter()
        res = moments.uncertainties(cfg.field(beam, crystal), z=cfg.z, grid=grid)
        rows.append([
            beam.beam_id, beam.w0, beam.z_c, cfg.z, res.dx1, res.dy1, res.dkx1, res.dky1,
            res.product_x, res.product_y, res.quad_error,
        ])
        _log(f"beam {beam.beam_id}: dx1={res.dx1:.6g} dy1={res.dy1:.6g} mm "
             f"dkx1={res.dkx1:.6g} dky1={res.dky1:.6g} /mm ({time.perf_counter() - t0:.1f} s)")
    return write_csv(os.path.join(out_dir, "uncertainties.csv"), "uncertainties",
                     UNCERTAINTY_COLUMNS, rows)


def _sweep_beam(cfg):
    if cfg.sweep_beam is not None:
        return cfg.beam(cfg.sweep_beam)
    if not cfg.beams:
        raise ConfigError("zsweep needs at least one beam under [pump] beams", None, "beams")
    return cfg.beams[0]


def cmd_zsweep(cfg, out_dir, z_values=None):
    """Position uncertainties versus the observation plane; returns the CSV path."""
    z_values = cfg.sweep_z() if z_values is None else np.asarray(z_values, float)
    if np.any(z_values <= cfg.L):
        raise PreconditionError(f"every z must exceed the crystal length L={cfg.L} mm")
    beam = _sweep_beam(cfg) if len(z_values) else None
    field = cfg.field(beam) if beam is not None else None
    grid = cfg.grid()
    rows = []
    for z in z_values:
        res = moments.uncertainties(field, z=float(z), grid=grid)
        rows.append([z, z - cfg.L, res.dx1, res.dy1, res.quad_error])
        _log(f"z={z:.6g} mm: dx1={res.dx1:.6g} dy1={res.dy1:.6g} mm")
    return write_csv(os.path.join(out_dir, "zsweep.csv"), "zsweep", ZSWEEP_COLUMNS, rows)


def cmd_profiles(cfg, out_dir, plane, beam_id):
    """Raw and aperture-convolved profiles with fitted curves; returns the written paths."""
    if plane not in ("image", "fourier"):
        raise ConfigError("plane must be 'image' or 'fourier'", None, "plane")
    beam = cfg.beam(beam_id)
    field = cfg.field(beam)
    det = cfg.detectors()
    point = instrument.Detectors(None, None, det.focal_length, det.lambda_nm)
    fitter = instrument.fit_sech if plane == "image" else instrument.fit_gaussian
    raws = instrument.predicted_detection_profiles(field, plane, point)
    convs = instrument.predicted_detection_profiles(field, plane, det)
    paths, summary = [], []
    for axis in ("x", "y"):
        raw, conv = raws[axis], convs[axis]
        # the raw slice lives on its own grid; put it on the convolved grid
        raw_on = np.interp(conv.coords, raw.coords, raw.density, left=0.0, right=0.0)
        fit = fitter(conv)
        fitted = fit.evaluate(conv.coords)
        name = f"profile_{plane}_beam{beam.beam_id}_{axis}1.csv"
        paths.append(write_csv(
            os.path.join(out_dir, name), "detection_profile",
            [f"{axis}1_mm", "raw_density", "convolved_density", "fitted_density"],
            zip(conv.coords, raw_on, conv.density, fitted),
        ))
        sigma_k = det.position_to_wavevector(fit.sigma) if plane == "fourier" else np.nan
        summary.append([beam.beam_id, axis + "1", fit.amplitude, fit.sigma, sigma_k, fit.center,
                        fit.residual_rms, int(fit.converged), fit.iterations])
    paths.append(write_csv(
        os.path.join(out_dir, f"fit_{plane}_beam{beam.beam_id}.csv"), "fit_result",
        ["beam_id", "axis", "amplitude", "sigma_mm", "sigma_per_mm", "center_mm",
         "residual_rms", "converged", "iterations"],
        summary,
    ))
    return paths


def cmd_fit(path, out_dir, model):
    """Fit an external profile CSV (``# schema=profile``) and write the result row."""
    axis, units, coords, values = instrument.read_profile_csv(path)
    fitter = instrument.fit_sech if model == "sech" else instrument.fit_gaussian
    fit = fitter((coords, values))
    stem = os.path.splitext(os.path.basename(path))[0]
    return write_csv(
        os.path.join(out_dir, f"fit_{stem}.csv"), "fit_result",
        ["axis", "model", "amplitude", f"sigma_{units}", f"center_{units}", "residual_rms",
         "converged", "iterations"],
        [[axis, model, fit.amplitude, fit.sigma, fit.center, fit.residual_rms,
          int(fit.converged), fit.iterations]],
    )


def _specfun_checks(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    z = rng.uniform(-4, 4, n) + 1j * rng.uniform(-4, 4, n)
    err = np.max(np.abs(specfun.erf_complex(z) - oracle.erf_series_oracle(z))
                 / np.maximum(np.abs(oracle.erf_series_oracle(z)), 1.0))
    out.append(oracle.Comparison("erf_complex max err", float(err), 0.0, float(err), 1e-12))
    x = rng.uniform(-30, 30, n)
    ref = oracle.sinc_oracle(x)
    err = np.max(np.abs(specfun.sinc(x) - ref))
    out.append(oracle.Comparison("sinc max abs err", float(err), 0.0, float(err), 1e-12))
    zi = 1j * rng.uniform(0.01, 30, n) * rng.choice([-1, 1], n)
    ref = oracle.ei_series_oracle(zi)
    err = np.max(np.abs(specfun.ei_complex(zi) - ref) / np.abs(ref))
    out.append(oracle.Comparison("ei_complex max rel err", float(err), 0.0, float(err), 1e-10))
    x1 = rng.uniform(1e-3, 50, n)
    x2 = x1 * rng.uniform(1.001, 3, n)
    sub = slice(0, 50)  # the QAWO oracle costs ~ms per point
    ref = oracle.ei_difference_oracle(x1[sub], x2[sub])
    err = np.max(np.abs(specfun.ei_difference(x1[sub], x2[sub]) - ref) / np.abs(ref))
    out.append(oracle.Comparison("ei_difference max rel err", float(err), 0.0, float(err),
                                 1e-10))
    return out


def cmd_validate(cfg, out_dir, quick=False):
    """Run the oracle suite; returns ``(comparisons, csv_path)``."""
    comps = _specfun_checks()
    if not quick:
        crystal = cfg.crystal()
        comps.append(oracle.compare("walk_off_lt_mm", walk_off_length(crystal), LT_REFERENCE_MM,
                                    LT_TOLERANCE))
        for beam in cfg.beams:
            field = cfg.field(beam, crystal)
            ref = oracle.coefficient_oracle(crystal, field.beam, cfg.z)
            tag = f"beam{beam.beam_id}"
            comps.append(oracle.compare(f"{tag}_b1", field.b1(cfg.z), ref.b1, 1e-12))
            comps.append(oracle.compare(f"{tag}_b2", field.b2(cfg.z), ref.b2, 1e-12))
            comps.append(oracle.compare(f"{tag}_beta_sq", field.beta_sq, ref.beta_sq, 1e-12))
            q_grid, _ = oracle.default_grids(field, cfg.dft_points)
            err = oracle.gaussian_stub_error(field.b1(cfg.z), q_grid)
            comps.append(oracle.Comparison(f"{tag}_gaussian_stub_dft", err, 0.0, err,
                                           cfg.dft_tolerance))
            err = oracle.dft_relative_error(field, cfg.z, *oracle.default_grids(
                field, cfg.dft_points))
            comps.append(oracle.Comparison(f"{tag}_fourier_dft", err, 0.0, err,
                                           cfg.dft_tolerance))
        # conditional moments: first and last beam, every axis
        grid = cfg.grid()
        picks = [cfg.beams[0], cfg.beams[-1]] if len(cfg.beams) > 1 else list(cfg.beams)
        for beam in picks:
            field = cfg.field(beam, crystal)
            res = moments.uncertainties(field, z=cfg.z, grid=grid)
            for axis, value in zip(("x", "y", "kx", "ky"), (res.dx1, res.dy1, res.dkx1, res.dky1)):
                ref = oracle.moment_quadrature_oracle(field, axis, (0.0, 0.0), z=cfg.z)
                comps.append(oracle.compare(f"beam{beam.beam_id}_std_{axis}1", value, ref,
                                            cfg.oracle_tolerance))
    path = os.path.join(out_dir, "validation.csv")
    oracle.write_comparison_csv(path, comps)
    return comps, path


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="epr-spdc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (INI)")
    common.add_argument("--out", default=None, help="output directory (overrides [output])")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("uncertainties", parents=[common], help="per-beam uncertainty table")
    sub.add_parser("zsweep", parents=[common], help="position uncertainties versus z")
    pr = sub.add_parser("profiles", parents=[common], help="predicted detection profiles")
    pr.add_argument("--plane", choices=("image", "fourier"), default=None)
    pr.add_argument("--beam", type=int, default=None, help="beam id (default: first)")
    va = sub.add_parser("validate", parents=[common], help="oracle comparison suite")
    va.add_argument("--quick", action="store_true", help="special-function oracles only")
    fi = sub.add_parser("fit", help="fit an external profile CSV")
    fi.add_argument("profile", help="CSV with '# schema=profile version=1'")
    fi.add_argument("--model", choices=("sech", "gaussian"), default="sech")
    fi.add_argument("--out", default=".", help="output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            os.makedirs(args.out, exist_ok=True)
            print(cmd_fit(args.profile, args.out, args.model))
            return EXIT_OK
        cfg = load_config(args.config)
        out_dir = args.out or cfg.output_dir
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "uncertainties":
            print(cmd_uncertainties(cfg, out_dir))
        elif args.command == "zsweep":
            print(cmd_zsweep(cfg, out_dir))
        elif args.command == "profiles":
            beam_id = args.beam if args.beam is not None else _sweep_beam(cfg).beam_id
            for path in cmd_profiles(cfg, out_dir, args.plane or cfg.plane, beam_id):
                print(path)
        elif args.command == "validate":
            comps, path = cmd_validate(cfg, out_dir, quick=args.quick)
            failed = [c for c in comps if not c.passed]
            for c in comps:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.quantity}: "
                      f"err={c.rel_error:.3g} tol={c.tolerance:.3g}")
            print(f"{len(comps) - len(failed)}/{len(comps)} passed; report: {path}")
            return EXIT_BREACH if failed else EXIT_OK
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except (PreconditionError, ValueError, RuntimeError) as exc:
        _log(f"error: {exc}")
        return EXIT_BREACH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
