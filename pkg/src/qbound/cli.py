"""Command-line interface: spectra, ratio maps, optimal states, bounds and fits."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import OptimalPrecisionModel, make_solver, ratio_grid
from .fock import PHASE_CONVENTION
from .geo import (
    InterferometerConfig,
    csv_strain_density,
    fundamental_strain_density,
    rescale_power,
    squeezing_db_to_r,
)
from .optimize import OptimizerOptions, csv_optimal_squeezing
from .qfi import phase_bound_mean_n, qfi_bound_fixed_n
from .store import (
    RATIO_SCHEMA,
    RESIDUAL_SCHEMA,
    SPECTRUM_SCHEMA,
    format_table,
    load_measured_spectrum,
    write_table,
)

logger = logging.getLogger("qbound")

CACHE_ENV = "QBOUND_CACHE"
CONFIG_KEYS = {
    "lambda0_nm", "arm_length_m", "power_at_bs_w", "power_measured_w", "eta", "eta_in",
    "mirror_transmissivity", "squeezing_db", "cache_path",
}


# built-in config names; both resolve to the shipped GEO 600 parameter set
BUILTIN_CONFIGS = ("geo600", "paper")


class UsageError(Exception):
    pass


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment.  ``geo600`` names the shipped file."""
    if str(path) in BUILTIN_CONFIGS:
        text = resources.files("qbound").joinpath("data/geo600.conf").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _overrides(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"--set: unknown key {key!r}")
        out[key] = value
    return out


def build_config(values):
    """InterferometerConfig plus a provenance record from merged config values."""
    v = {k: float(x) for k, x in values.items() if k != "cache_path"}
    eta_in = v.get("eta_in", 1.0)
    provenance = {}
    if "power_at_bs_w" in v:
        power = v["power_at_bs_w"]
        provenance["power_provenance"] = "power_at_bs_w given directly"
    elif "power_measured_w" in v:
        power = rescale_power(v["power_measured_w"], eta_in)
        provenance["power_provenance"] = f"power_measured_w / eta_in = {v['power_measured_w']:g} / {eta_in:g}"
    else:
        raise UsageError("config needs power_at_bs_w or power_measured_w")
    try:
        cfg = InterferometerConfig(
            lambda0=v.get("lambda0_nm", 1064.0) * 1e-9,
            arm_length_l=v.get("arm_length_m", 1200.0),
            power_p=power,
            mirror_transmissivity_t=v.get("mirror_transmissivity", 0.019),
            eta=v.get("eta", 0.62),
            eta_in=eta_in,
            squeezing_r=squeezing_db_to_r(v.get("squeezing_db", 0.0)),
        )
    except ValueError as exc:
        raise UsageError(f"invalid interferometer config: {exc}") from exc
    provenance.update(
        lambda0_m=cfg.lambda0, arm_length_m=cfg.arm_length_l, power_at_bs_w=cfg.power_p,
        mirror_transmissivity=cfg.mirror_transmissivity_t, eta=cfg.eta, eta_in=cfg.eta_in,
        squeezing_db=v.get("squeezing_db", 0.0),
    )
    return cfg, provenance


def load_run_config(args):
    values = read_config_file(args.config) if args.config else {}
    values.update(_overrides(getattr(args, "set", None)))
    return values


def resolve_cache(args, values=None):
    if getattr(args, "cache", None):
        return args.cache
    if os.environ.get(CACHE_ENV):
        return os.environ[CACHE_ENV]
    return (values or {}).get("cache_path")


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text, encoding="utf-8", newline="\n")


def _write_rows(rows, schema, output):
    if output in (None, "-"):
        sys.stdout.write(format_table(rows, schema))
    else:
        write_table(rows, schema, output)


def _write_meta(meta, output):
    """Metadata goes to a ``.meta.json`` sidecar, or to stderr for stdout tables."""
    if output in (None, "-"):
        print("metadata: " + json.dumps(meta, sort_keys=True), file=sys.stderr)
    else:
        Path(str(output) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _log_grid(lo, hi, points):
    if points < 1:
        raise UsageError("--points must be >= 1")
    if not 0 < lo <= hi:
        raise UsageError("need 0 < min <= max")
    if points == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def _db_label(db):
    return f"csv_{db:g}dB"


def cmd_spectra(args):
    values = load_run_config(args)
    base, provenance = build_config(values)
    freqs = _log_grid(args.freq_min, args.freq_max, args.points)
    dbs = args.squeezing_db if args.squeezing_db else [float(values.get("squeezing_db", 10.0))]
    rows = []
    curves = []
    for db in dbs:
        cfg = base.with_squeezing_db(db)
        curves.append((_db_label(db), [p.delta_h for p in csv_strain_density(freqs, cfg)]))
    if args.fundamental:
        curves.append(("fundamental", [p.delta_h for p in fundamental_strain_density(freqs, base)]))
    for i, f in enumerate(freqs):
        for label, vals in curves:
            rows.append((float(f), vals[i], label))
    if args.overlay:
        try:
            spectrum = load_measured_spectrum(args.overlay)
        except (OSError, ValueError) as exc:
            raise UsageError(f"overlay: {exc}") from exc
        rows.extend((f, h, "measured") for f, h in spectrum.points)
    _write_rows(rows, SPECTRUM_SCHEMA, args.output)
    meta = {
        "config": provenance,
        "curves": [c[0] for c in curves],
        "phase_convention": PHASE_CONVENTION,
        "units": {"frequency": "Hz", "delta_h": "1/sqrt(Hz)"},
    }
    _write_meta(meta, args.output)
    logger.info("power at beam splitter %.6g W (%s)", base.power_p, provenance["power_provenance"])


def _options(args):
    return OptimizerOptions(
        restarts=args.restarts, tolerance=args.tolerance, seed=args.seed,
    )


def ratio_map_grid(args):
    if not 0 < args.loss_min <= args.loss_max < 1:
        raise UsageError("losses must satisfy 0 < loss-min <= loss-max < 1")
    ns = _log_grid(args.n_min, args.n_max, args.n_points)
    # direct optimization only accepts integer photon numbers
    ns = sorted({float(round(n)) if n <= args.direct_cap else float(n) for n in ns})
    if args.loss_points == 1:
        losses = [args.loss_min]
    else:
        losses = list(np.linspace(args.loss_min, args.loss_max, args.loss_points))
    return ns, losses


def cmd_ratio_map(args):
    ns, losses = ratio_map_grid(args)
    cache = resolve_cache(args)
    points = ratio_grid(ns, losses, _options(args), direct_cap=args.direct_cap, cache_path=cache)
    _write_rows([(p.n_mean, p.loss, p.ratio) for p in points], RATIO_SCHEMA, args.output)
    flagged = [
        [p.n_mean, p.loss] for p in points
        if not csv_optimal_squeezing(p.n_mean, 1.0 - p.loss).approximation_valid
    ]
    _write_meta(
        {
            "phase_convention": PHASE_CONVENTION,
            "direct_cap": args.direct_cap,
            "paths": [p.path for p in points],
            "csv_approximation_invalid": flagged,
        },
        args.output,
    )


def cmd_optimal_state(args):
    if not 0 < args.eta <= 1:
        raise UsageError("--eta must lie in (0, 1]")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    result = make_solver(_options(args), resolve_cache(args))(args.n, args.eta)
    lines = [
        f"n = {result.n}",
        f"eta = {result.eta:.6g}",
        f"phase_convention = {PHASE_CONVENTION}",
        "coefficients = " + " ".join(f"{c:.6g}" for c in result.coeffs),
        f"qfi_rad^-2 = {result.qfi:.10g}",
        f"delta_phi_rad = {result.delta_phi:.10g}",
        f"converged = {str(result.converged).lower()}",
    ]
    if args.eta < 1:
        bound = qfi_bound_fixed_n(args.n, args.eta)
        lines += [f"bound_qfi_rad^-2 = {bound:.10g}", f"bound_saturation = {result.qfi / bound:.10g}"]
    else:
        lines += ["bound_qfi_rad^-2 = n/a (requires eta < 1)", "bound_saturation = n/a"]
    _emit("\n".join(lines) + "\n", None)


def cmd_bound(args):
    lines = []
    values = load_run_config(args) if args.config else {}
    if args.eta is not None:
        values["eta"] = str(args.eta)
    if args.n_mean is not None:
        if args.eta is None:
            raise UsageError("--n-mean needs --eta")
        try:
            bound = phase_bound_mean_n(args.n_mean, args.eta)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        lines.append(f"delta_phi_bound_rad = {bound:.6g}")
    if args.config:
        if args.frequency is None:
            raise UsageError("--config needs --frequency for the strain bound")
        cfg, _ = build_config(values)
        try:
            point = fundamental_strain_density(args.frequency, cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        lines.append(f"frequency_hz = {args.frequency:g}")
        lines.append(f"delta_h_bound_per_sqrt_hz = {point.delta_h:.6g}")
    if not lines:
        raise UsageError("give --n-mean/--eta and/or --config/--frequency")
    _emit("\n".join(lines) + "\n", None)


def _parse_range(text):
    for sep in ("..", ":", ","):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return int(lo), int(hi)
    raise UsageError(f"--n-range expects LO..HI, got {text!r}")


def cmd_fit(args):
    lo, hi = _parse_range(args.n_range)
    if hi - lo + 1 < 3:
        raise UsageError("the fit needs at least 3 photon numbers")
    if not 0 < args.eta < 1:
        raise UsageError("--eta must lie in (0, 1)")
    model = OptimalPrecisionModel(
        eta=args.eta, direct_cap=hi, fit_range=(lo, hi), restarts=args.restarts,
        tolerance=args.tolerance, seed=args.seed, cache_path=resolve_cache(args),
    )
    model.fit()
    fit = model.extrapolation_
    solver = model.solver_
    rows = []
    for n in range(lo, hi + 1):
        d = solver(n, args.eta).delta_phi
        pred = float(fit.predict(n))
        rows.append((n, d, pred, abs(pred - d) / d))
    text = (
        f"eta = {args.eta:.6g}\nn_range = {lo}..{hi}\n"
        f"a = {fit.a:.10g}\nb = {fit.b:.10g}\nc = {fit.c:.10g}\n"
        f"max_relative_residual = {fit.max_relative_residual:.6g}\n"
    )
    _emit(text, None)
    if args.output:
        write_table(rows, RESIDUAL_SCHEMA, args.output)
    else:
        sys.stdout.write(format_table(rows, RESIDUAL_SCHEMA))


def cmd_chart(args):
    import csv

    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    with open(args.input, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != set(SPECTRUM_SCHEMA):
        raise UsageError("chart expects a spectra table")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in dict.fromkeys(r["curve"] for r in rows):
        sel = [r for r in rows if r["curve"] == label]
        ax.loglog([float(r["frequency_hz"]) for r in sel], [float(r["delta_h_per_sqrt_hz"]) for r in sel], label=label)
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("strain noise [1/sqrt(Hz)]")
    ax.legend()
    fig.savefig(args.output, format="svg", metadata={"Date": None})
    plt.close(fig)


def _add_optimizer_flags(p):
    p.add_argument("--restarts", type=int, default=8, help="optimizer multi-starts (count)")
    p.add_argument("--tolerance", type=float, default=1e-9, help="relative objective tolerance (dimensionless)")
    p.add_argument("--seed", type=int, default=0, help="random seed for restarts")
    p.add_argument("--cache", default=None, help=f"cache file (JSON lines); overrides ${CACHE_ENV}")


def build_parser():
    parser = argparse.ArgumentParser(prog="qbound", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectra", help="strain noise spectral densities vs frequency")
    p.add_argument("--config", default="geo600", help="config file, or 'geo600' for the shipped parameter set")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--freq-min", type=float, default=100.0, help="lowest frequency [Hz]")
    p.add_argument("--freq-max", type=float, default=6000.0, help="highest frequency [Hz]")
    p.add_argument("--points", type=int, default=200, help="log-spaced frequency points (count)")
    p.add_argument("--squeezing-db", type=float, action="append", help="squeezing level [dB]; repeatable")
    p.add_argument("--fundamental", action=argparse.BooleanOptionalAction, default=True,
                   help="include the loss-limited bound curve")
    p.add_argument("--overlay", help="measured spectrum: two columns [Hz, 1/sqrt(Hz)]")
    p.add_argument("--output", help="output table path (default: stdout)")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("ratio-map", help="optimal-state vs CSV precision ratio grid")
    p.add_argument("--n-min", type=float, default=1.0, help="smallest mean photon number [photons]")
    p.add_argument("--n-max", type=float, default=1e24, help="largest mean photon number [photons]")
    p.add_argument("--n-points", type=int, default=25, help="log-spaced photon numbers (count)")
    p.add_argument("--loss-min", type=float, default=0.05, help="smallest loss 1-eta (fraction)")
    p.add_argument("--loss-max", type=float, default=0.5, help="largest loss 1-eta (fraction)")
    p.add_argument("--loss-points", type=int, default=4, help="linearly spaced losses (count)")
    p.add_argument("--direct-cap", type=int, default=60, help="largest directly optimized N [photons]")
    p.add_argument("--output", help="output table path (default: stdout)")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_ratio_map)

    p = sub.add_parser("optimal-state", help="optimal N-photon probe under loss")
    p.add_argument("--n", type=int, required=True, help="total photon number [photons]")
    p.add_argument("--eta", type=float, required=True, help="power transmission of each arm (fraction)")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_optimal_state)

    p = sub.add_parser("bound", help="loss-limited phase and strain bounds")
    p.add_argument("--n-mean", type=float, help="mean photon number [photons]")
    p.add_argument("--eta", type=float, help="power transmission (fraction); overrides the config")
    p.add_argument("--config", help="config file, or 'geo600' for the shipped parameter set")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--frequency", type=float, help="signal frequency [Hz]")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("fit", help="fit the large-N extrapolation to direct optima")
    p.add_argument("--eta", type=float, required=True, help="power transmission (fraction)")
    p.add_argument("--n-range", default="30..60", help="photon numbers LO..HI [photons]")
    p.add_argument("--output", help="residual table path (default: stdout)")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("chart", help="render a spectra table as an SVG line chart")
    p.add_argument("--input", required=True, help="spectra table (CSV)")
    p.add_argument("--output", required=True, help="SVG output path")
    p.set_defaults(func=cmd_chart)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
