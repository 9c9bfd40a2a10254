"""Command-line front end.

Eight verbs: two pricers (``price-european``, ``price-american``), the
boundary extractor, four property scans (``scan-alpha``,
``scan-convexity``, ``converge-bermudan``, ``residual``), and the Monte
Carlo cross-check (``mc-check``).  Every run writes a manifest holding
the fully resolved configuration and library versions; re-running from
that manifest reproduces each artifact byte for byte (simulation seeds
included).

Configuration precedence: command-line flag > FMLSLAB_OUTPUT_DIR
environment variable (output directory only) > --config JSON file >
built-in defaults.

Exit codes: 0 success, 1 a checked property failed, 2 configuration
error (including malformed config JSON, which produces no artifacts),
3 numerical-accuracy or convergence failure.  Failures also leave a
machine-readable ``error.json`` in the output directory when one
exists, and always print the same record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from . import __version__, figures
from .config import RunConfig, load_json_config, resolve_config
from .density import get_table
from .errors import (
    ConfigurationError,
    ContractSupportError,
    ConvergenceError,
    DomainError,
    NumericalAccuracyError,
)
from .european import price_put
from .exercise import american_price, extract_boundary, smooth_pasting_report
from .fractional import european_residual
from .mc import sample_stable
from .reports import (
    bermudan_convergence_table,
    mc_agreement_report,
    residual_report,
    scan_alpha,
    scan_convexity,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_PROPERTY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

_CONFIG_ERRORS = (ConfigurationError, DomainError)
_NUMERICAL_ERRORS = (NumericalAccuracyError, ConvergenceError,
                     ContractSupportError)


# -- argument parsing --------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="JSON configuration file")
    parser.add_argument("--output-dir", metavar="DIR",
                        help="artifact directory (beats FMLSLAB_OUTPUT_DIR)")
    parser.add_argument("--format", choices=("csv", "json"),
                        help="data artifact format")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering")
    parser.add_argument("--alpha", type=float, help="tail index in (1, 2]")
    parser.add_argument("--sigma", type=float, help="volatility scale")
    parser.add_argument("--rate", type=float, help="risk-free rate")
    parser.add_argument("--strike", type=float, help="strike price")
    parser.add_argument("--expiry", type=float, help="years to expiry")


def _add_lattice(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--level", type=int,
                        help="exercise-date doublings for the lattice")
    parser.add_argument("--step", type=float, help="log-price grid step")
    parser.add_argument("--width", type=float, help="log-price half-width")
    parser.add_argument("--tol", type=float,
                        help="refinement tolerance (fraction of strike)")
    parser.add_argument("--max-level", type=int,
                        help="refinement level cap")


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmlslab",
        description="pricing laboratory for puts under a heavy-tailed "
                    "log-stable model",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    verbs = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    p = verbs.add_parser("price-european", help="closed-form European puts")
    _add_common(p)
    p.add_argument("--spot", type=float, action="append", metavar="S",
                   help="spot to price (repeatable; default: scan spots)")
    p.add_argument("--time", type=float, default=0.0,
                   help="valuation time (default 0)")

    p = verbs.add_parser("price-american",
                         help="American puts by dyadic refinement")
    _add_common(p)
    _add_lattice(p)
    p.add_argument("--spot", type=float, action="append", metavar="S",
                   help="spot to price (repeatable; default: scan spots)")

    p = verbs.add_parser("boundary", help="early exercise boundary")
    _add_common(p)
    _add_lattice(p)

    p = verbs.add_parser("scan-alpha",
                         help="price monotonicity across the tail index")
    _add_common(p)
    _add_lattice(p)
    p.add_argument("--alphas", type=_comma_floats, metavar="A1,A2,...",
                   help="ascending tail indices")
    p.add_argument("--spots", type=_comma_floats, metavar="S1,S2,...",
                   help="spots to sweep")
    p.add_argument("--kind", choices=("european", "american", "both"),
                   help="which pricer(s) to sweep")

    p = verbs.add_parser("scan-convexity",
                         help="convexity in the underlying across time")
    _add_common(p)
    _add_lattice(p)
    p.add_argument("--kind", choices=("european", "american", "both"),
                   help="which pricer(s) to audit")
    p.add_argument("--times", type=_comma_floats, metavar="T1,T2,...",
                   help="European time slices")
    p.add_argument("--s-min", type=float, help="spot grid lower edge")
    p.add_argument("--s-max", type=float, help="spot grid upper edge")
    p.add_argument("--s-points", type=int, help="spot grid size")

    p = verbs.add_parser("converge-bermudan",
                         help="value ladder over exercise-date doublings")
    _add_common(p)
    _add_lattice(p)
    p.add_argument("--n-max", type=int, help="deepest doubling level")
    p.add_argument("--spot", type=float, help="spot to track (default strike)")

    p = verbs.add_parser("residual", help="pricing-equation residual audit")
    _add_common(p)
    p.add_argument("--time", type=float,
                   help="audit time (default half of expiry)")
    p.add_argument("--n", type=int, default=501,
                   help="base grid resolution (refined to 2n-1)")

    p = verbs.add_parser("mc-check", help="Monte Carlo cross-validation")
    _add_common(p)
    p.add_argument("--paths", type=int, help="simulation paths")
    p.add_argument("--seed", type=int, help="stream seed")
    p.add_argument("--antithetic", action="store_const", const=True,
                   help="pair each path with its reflection")
    p.add_argument("--spot", type=float, help="spot to price (default strike)")
    p.add_argument("--dump-draws", metavar="PATH",
                   help="write raw draws (.npy, or CSV otherwise)")

    return parser


_FLAG_MAP = {
    "output_dir": ("output", "directory"),
    "format": ("output", "format"),
    "alpha": ("model", "alpha"),
    "sigma": ("model", "sigma"),
    "rate": ("model", "rate"),
    "strike": ("option", "strike"),
    "expiry": ("option", "expiry"),
    "level": ("grid", "level"),
    "step": ("grid", "step"),
    "width": ("grid", "width"),
    "tol": ("grid", "tol"),
    "max_level": ("grid", "max_level"),
    "n_max": ("grid", "n_max"),
    "alphas": ("scan", "alphas"),
    "spots": ("scan", "spots"),
    "kind": ("scan", "kind"),
    "times": ("scan", "times"),
    "s_min": ("scan", "s_min"),
    "s_max": ("scan", "s_max"),
    "s_points": ("scan", "s_points"),
    "paths": ("mc", "n_paths"),
    "seed": ("mc", "seed"),
    "antithetic": ("mc", "antithetic"),
}


def _flag_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    for attr, (section, key) in _FLAG_MAP.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if getattr(args, "no_figures", False):
        overrides.setdefault("output", {})["figures"] = False
    return overrides


def _resolve(args: argparse.Namespace) -> RunConfig:
    file_config = load_json_config(args.config) if args.config else None
    return resolve_config(file_config=file_config,
                          flag_overrides=_flag_overrides(args),
                          env=os.environ)


# -- artifact writers --------------------------------------------------------

def _write_rows(outdir: Path, stem: str, rows: list, fmt: str) -> Path:
    """Dump rows of plain scalars as CSV (column order = first seen) or JSON."""
    if fmt == "json":
        path = outdir / f"{stem}.json"
        path.write_text(json.dumps(rows, indent=2) + "\n")
        return path
    fieldnames: list[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    path = outdir / f"{stem}.csv"
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, restval="")
        writer.writeheader()
        for row in rows:
            clean = {k: ("" if v is None or (isinstance(v, float) and v != v)
                         else v) for k, v in row.items()}
            writer.writerow(clean)
    return path


def _write_report(outdir: Path, stem: str, report) -> Path:
    path = outdir / f"{stem}_report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return path


def _write_manifest(outdir: Path, verb: str, cfg: RunConfig, extra: dict) -> None:
    manifest = {
        "command": verb,
        "config": cfg.resolved,
        "extra": extra,
        "versions": {
            "fmlslab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
            "python": platform.python_version(),
        },
    }
    (outdir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")


def _emit_error(exc: Exception, code: int, outdir: Path | None) -> int:
    record = {"error": type(exc).__name__, "message": str(exc),
              "exit_code": code}
    suggestion = getattr(exc, "suggestion", None)
    if suggestion:
        record["suggestion"] = suggestion
    text = json.dumps(record, indent=2) + "\n"
    if outdir is not None and outdir.is_dir():
        (outdir / "error.json").write_text(text)
    sys.stderr.write(text)
    return code


def _spot_line(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.s_min, cfg.s_max, cfg.s_points)


# -- verb handlers -----------------------------------------------------------

def _run_price_european(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    spots = extra["spots"] or list(cfg.scan_spots)
    t = extra["time"]
    values = price_put(np.asarray(spots, dtype=float), t, cfg.model, cfg.option)
    rows = [{"S": s, "K": cfg.option.strike, "t": t, "alpha": cfg.model.alpha,
             "sigma": cfg.model.sigma, "rate": cfg.model.rate,
             "price": float(v)} for s, v in zip(spots, values)]
    _write_rows(outdir, "price_european", rows, cfg.output_format)
    if cfg.figures:
        line = _spot_line(cfg)
        curve = price_put(line, t, cfg.model, cfg.option)
        figures.price_curve_figure(
            line, {f"european t={t:g}": curve}, cfg.option.strike,
            outdir / "price_european.png",
            title=f"European put, tail index {cfg.model.alpha:g}")
    return EXIT_OK


def _converged_surface(cfg: RunConfig):
    return american_price(cfg.tol, cfg.model, cfg.option, grid=cfg.grid,
                          max_level=cfg.max_level)


def _run_price_american(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    spots = extra["spots"] or list(cfg.scan_spots)
    surface, level = _converged_surface(cfg)
    rows = [{"S": s, "K": cfg.option.strike, "alpha": cfg.model.alpha,
             "price": float(surface.value_at(s)), "level": level,
             "achieved_increment": surface.achieved_increment}
            for s in spots]
    _write_rows(outdir, "price_american", rows, cfg.output_format)
    if cfg.figures:
        line = _spot_line(cfg)
        curves = {
            "american": surface.value_at(line),
            "european": price_put(line, 0.0, cfg.model, cfg.option),
        }
        figures.price_curve_figure(
            line, curves, cfg.option.strike, outdir / "price_american.png",
            title=f"American put, tail index {cfg.model.alpha:g}")
    return EXIT_OK


def _run_boundary(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    surface, level = _converged_surface(cfg)
    bounds = extract_boundary(surface)
    pasting = smooth_pasting_report(surface, bounds)
    rows = [{"t": b.t, "s_star": b.s_star, "x_star": b.x_star,
             "value_match_error": b.value_match_error,
             "value_match_tol": b.value_match_tol,
             "pasting_gap": b.pasting_gap} for b in bounds]
    _write_rows(outdir, "boundary", rows, cfg.output_format)
    summary = {
        "level": level,
        "within_tol": bool(pasting.within_tol),
        "max_value_match_error": pasting.max_value_match_error,
        "max_pasting_gap": pasting.max_pasting_gap,
        "median_pasting_gap": pasting.median_pasting_gap,
        "below_strike": bool(all(b.s_star < cfg.option.strike
                                 for b in bounds if not b.absent)),
    }
    (outdir / "boundary_report.json").write_text(
        json.dumps(summary, indent=2) + "\n")
    if cfg.figures:
        figures.boundary_figure(
            [(b.t, b.s_star) for b in bounds if not b.absent],
            cfg.option.strike, outdir / "boundary.png")
    passed = summary["within_tol"] and summary["below_strike"]
    return EXIT_OK if passed else EXIT_PROPERTY_FAILED


def _run_scan_alpha(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    report = scan_alpha(cfg.scan_alphas, cfg.scan_kind, cfg.scan_spots, cfg)
    _write_rows(outdir, "scan_alpha", list(report.details), cfg.output_format)
    _write_report(outdir, "scan_alpha", report)
    if cfg.figures:
        figures.alpha_scan_figure(report.details, outdir / "scan_alpha.png")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILED


def _run_scan_convexity(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    report = scan_convexity(cfg.scan_kind, _spot_line(cfg), cfg.scan_times, cfg)
    _write_rows(outdir, "scan_convexity", list(report.details),
                cfg.output_format)
    _write_report(outdir, "scan_convexity", report)
    if cfg.figures:
        figures.convexity_figure(report.details, outdir / "scan_convexity.png")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILED


def _run_converge_bermudan(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    report = bermudan_convergence_table(range(0, cfg.n_max + 1), cfg,
                                        spot=extra["spot"])
    _write_rows(outdir, "converge_bermudan", list(report.details),
                cfg.output_format)
    _write_report(outdir, "converge_bermudan", report)
    if cfg.figures:
        figures.convergence_figure(report.details,
                                   outdir / "converge_bermudan.png")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILED


def _run_residual(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    n = extra["n"]
    if n < 16:
        raise ConfigurationError(f"base resolution must be at least 16, got {n}")
    t = extra["time"]
    report = residual_report(cfg, t=t, resolutions=(n, 2 * n - 1))
    _write_rows(outdir, "residual", list(report.details), cfg.output_format)
    _write_report(outdir, "residual", report)
    grid, res = european_residual(cfg.model, cfg.option,
                                  0.5 * cfg.option.expiry if t is None else t,
                                  n=n)
    profile = [{"x": float(x), "residual": float(r)}
               for x, r in zip(grid.x, res)]
    _write_rows(outdir, "residual_profile", profile, cfg.output_format)
    if cfg.figures:
        figures.residual_figure(grid.x, res, outdir / "residual.png")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILED


def _run_mc_check(cfg: RunConfig, extra: dict, outdir: Path) -> int:
    report = mc_agreement_report(cfg, spot=extra["spot"])
    _write_rows(outdir, "mc_check", list(report.details), cfg.output_format)
    _write_report(outdir, "mc_check", report)
    draws = None
    if extra["dump_draws"]:
        draws = sample_stable(cfg.model.alpha, cfg.mc.n_paths, cfg.mc.seed)
        target = Path(extra["dump_draws"])
        if not target.is_absolute():
            target = outdir / target
        if target.suffix == ".npy":
            np.save(target, draws)
        else:
            np.savetxt(target, draws, fmt="%r", header="draw", comments="")
    if cfg.figures:
        if draws is None:
            draws = sample_stable(cfg.model.alpha,
                                  min(cfg.mc.n_paths, 100_000), cfg.mc.seed)
        figures.mc_histogram_figure(draws, get_table(cfg.model.alpha),
                                    outdir / "mc_check.png")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILED


_HANDLERS = {
    "price-european": _run_price_european,
    "price-american": _run_price_american,
    "boundary": _run_boundary,
    "scan-alpha": _run_scan_alpha,
    "scan-convexity": _run_scan_convexity,
    "converge-bermudan": _run_converge_bermudan,
    "residual": _run_residual,
    "mc-check": _run_mc_check,
}


def _extra_args(args: argparse.Namespace) -> dict:
    """Verb arguments that are not part of the resolved configuration."""
    extra = {}
    if args.verb in ("price-european", "price-american"):
        extra["spots"] = getattr(args, "spot", None)
    if args.verb in ("converge-bermudan", "mc-check"):
        extra["spot"] = getattr(args, "spot", None)
    if args.verb in ("price-european", "residual"):
        extra["time"] = getattr(args, "time", None)
    if args.verb == "residual":
        extra["n"] = args.n
    if args.verb == "mc-check":
        extra["dump_draws"] = args.dump_draws
    return extra


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG_ERROR

    try:
        cfg = _resolve(args)
    except _CONFIG_ERRORS as exc:
        # configuration never resolved: report to stderr, touch nothing
        return _emit_error(exc, EXIT_CONFIG_ERROR, None)

    extra = _extra_args(args)
    outdir = Path(cfg.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _emit_error(exc, EXIT_CONFIG_ERROR, None)

    _write_manifest(outdir, args.verb, cfg, extra)
    try:
        return _HANDLERS[args.verb](cfg, extra, outdir)
    except _CONFIG_ERRORS as exc:
        return _emit_error(exc, EXIT_CONFIG_ERROR, outdir)
    except _NUMERICAL_ERRORS as exc:
        return _emit_error(exc, EXIT_NUMERICAL_ERROR, outdir)


if __name__ == "__main__":
    sys.exit(main())
