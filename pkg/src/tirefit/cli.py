"""Command-line front end: preprocess, fit, study and sobol workflows.

Settings merge in increasing precedence: built-in defaults, a config
file (TOML or JSON, via --config), then command-line flags. Every
successful run writes a config-echo JSON next to its outputs; running
again with --config <echo> reproduces the outputs byte-identically for
seeded workflows.

Exit codes: 0 ok, 2 input/schema error, 3 insufficient data,
4 optimization failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from . import pipeline as pl
from . import preprocess as pp
from .errors import (
    EmptyDataset,
    InsufficientCalibrationData,
    InsufficientLinearData,
    NonFiniteObjective,
    SchemaError,
    TirefitError,
)
from .fitting import SviConfig, fit_nelder_mead, fit_svi, posterior_samples
from .sensitivity import default_slip_grid, sobol_indices
from .study import StudyConfig, run_study, write_curves_csv, write_study_csv
from .tire_model import REFERENCE_PARAMS, ParamBounds, TireParams
from .vehicle_dynamics import VehicleParams

log = logging.getLogger("tirefit")

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_INSUFFICIENT = 3
EXIT_OPTIMIZATION = 4


# ---------------------------------------------------------------------------
# plumbing

def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config_file(path) -> dict:
    if str(path).endswith(".toml"):
        import tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def merge_settings(defaults: dict, config_path, args: argparse.Namespace,
                   flag_names: list[str]) -> dict:
    """defaults <- config file <- explicitly passed flags."""
    merged = dict(defaults)
    if config_path:
        file_cfg = load_config_file(config_path)
        for key, value in file_cfg.items():
            if key == "artifact_version":   # echo metadata, not a setting
                continue
            if key not in defaults:
                raise SchemaError(f"unknown config field {key!r}")
            merged[key] = value
    for name in flag_names:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


def write_echo(settings: dict, out_path) -> None:
    doc = dict(settings)
    doc["artifact_version"] = __version__
    atomic_write(out_path, json.dumps(doc, indent=2) + "\n")


def fail(code: int, error: str, message: str, **extra) -> int:
    payload = {"error": error, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load_bounds(spec) -> ParamBounds:
    if spec is None:
        return ParamBounds()
    if isinstance(spec, dict):
        return ParamBounds.from_dict(spec)
    if os.path.exists(spec):
        return ParamBounds.from_dict(load_config_file(spec))
    return ParamBounds.from_dict(json.loads(spec))


def _load_center(spec) -> TireParams:
    if spec is None:
        return REFERENCE_PARAMS
    if os.path.exists(spec):
        return TireParams.from_json(open(spec).read())
    return TireParams.from_json(spec)


# ---------------------------------------------------------------------------
# subcommands

PREPROCESS_DEFAULTS = {
    "log": None, "vehicle": None, "sidecar": None, "out_dir": ".",
    "target_rate": pp.DEFAULT_TARGET_RATE, "blanking": pp.DEFAULT_BLANKING_S,
    "linear_cut": pp.DEFAULT_LINEAR_CUT, "thin_radius": pp.DEFAULT_THIN_RADIUS,
}


def cmd_preprocess(args) -> int:
    settings = merge_settings(PREPROCESS_DEFAULTS, args.config, args,
                              list(PREPROCESS_DEFAULTS))
    if not settings["log"] or not settings["vehicle"]:
        return fail(EXIT_SCHEMA, "SchemaError",
                    "preprocess requires a log CSV and a vehicle config")
    for key in ("log", "vehicle"):
        if not os.path.exists(settings[key]):
            return fail(EXIT_SCHEMA, "SchemaError",
                        f"file not found: {settings[key]}", field=key)
    try:
        vp = VehicleParams.from_file(settings["vehicle"])
        sensor_log, _meta = pl.read_log_csv(settings["log"], settings["sidecar"])
        pipeline_settings = pl.PipelineSettings(
            target_rate=settings["target_rate"], blanking_s=settings["blanking"],
            linear_cut=settings["linear_cut"], thin_radius=settings["thin_radius"])
        result = pl.process_log(sensor_log, vp, pipeline_settings)
    except (SchemaError, ValueError) as exc:
        return fail(EXIT_SCHEMA, type(exc).__name__, str(exc))
    except (InsufficientCalibrationData, InsufficientLinearData) as exc:
        return fail(EXIT_INSUFFICIENT, type(exc).__name__, str(exc))

    out_dir = settings["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    for key, ds in result.datasets.items():
        path = os.path.join(out_dir, f"dataset_{key}.csv")
        ds.write_csv(path)
        sh, sv = result.shifts[key]
        atomic_write(path.replace(".csv", ".shifts.json"),
                     json.dumps({"Sh": sh, "Sv": sv}) + "\n")
        log.info("wrote %s (%d samples)", path, len(ds))
    atomic_write(os.path.join(out_dir, "offset_report.json"),
                 json.dumps(result.offsets.to_dict(), indent=2) + "\n")
    write_echo(settings, os.path.join(out_dir, "preprocess.config.json"))
    return EXIT_OK


FIT_DEFAULTS = {
    "dataset": None, "method": "svi", "output": "result.json",
    "seed": 0, "bounds": None, "fixed_c": None, "steps": 3000,
    "mc_samples": 8, "learning_rate": 0.01, "posterior_count": 1000,
    "shifts": None, "trace": False,
}


def cmd_fit(args) -> int:
    settings = merge_settings(FIT_DEFAULTS, args.config, args, list(FIT_DEFAULTS))
    if not settings["dataset"]:
        return fail(EXIT_SCHEMA, "SchemaError", "fit requires a dataset CSV")
    if not os.path.exists(settings["dataset"]):
        return fail(EXIT_SCHEMA, "SchemaError",
                    f"file not found: {settings['dataset']}", field="dataset")
    try:
        dataset = pp.AxleDataset.read_csv(settings["dataset"])
        bounds = _load_bounds(settings["bounds"])
    except (ValueError, SchemaError) as exc:
        return fail(EXIT_SCHEMA, type(exc).__name__, str(exc))

    sh = sv = 0.0
    shifts_path = settings["shifts"] or \
        str(settings["dataset"]).replace(".csv", ".shifts.json")
    if os.path.exists(shifts_path):
        shift_doc = json.load(open(shifts_path))
        sh, sv = shift_doc.get("Sh", 0.0), shift_doc.get("Sv", 0.0)

    try:
        if settings["method"] == "nelder-mead":
            result = fit_nelder_mead(dataset, bounds=bounds,
                                     fixed_c=settings["fixed_c"], sh=sh, sv=sv)
        elif settings["method"] == "svi":
            cfg = SviConfig(steps=settings["steps"],
                            mc_samples=settings["mc_samples"],
                            learning_rate=settings["learning_rate"],
                            seed=settings["seed"], bounds=bounds,
                            fixed_c=settings["fixed_c"])
            result = fit_svi(dataset, cfg, sh=sh, sv=sv)
        else:
            return fail(EXIT_SCHEMA, "SchemaError",
                        f"unknown method {settings['method']!r}", field="method")
    except (EmptyDataset, NonFiniteObjective) as exc:
        return fail(EXIT_OPTIMIZATION, type(exc).__name__, str(exc))

    atomic_write(settings["output"],
                 result.to_json(include_trace=settings["trace"]) + "\n")
    if result.method == "svi" and settings["posterior_count"] > 0:
        rng = np.random.default_rng(settings["seed"] + 1)
        draws = posterior_samples(result, settings["posterior_count"], rng)
        lines = ["b,c,d,e"]
        lines += [",".join(repr(float(v)) for v in row) for row in draws]
        atomic_write(str(settings["output"]).replace(".json", "")
                     + ".posterior.csv", "\n".join(lines) + "\n")
    write_echo(settings, str(settings["output"]) + ".config.json")
    log.info("fit (%s) written to %s", result.method, settings["output"])
    return EXIT_OK


STUDY_DEFAULTS = {
    "truth": None, "levels": list(StudyConfig().excitation_levels),
    "n_points": 500, "noise_slip": 0.002, "noise_force": 0.02, "seed": 0,
    "steps": 3000, "mc_samples": 8, "learning_rate": 0.01,
    "output": "study.csv", "curves_output": "curves.csv",
}


def cmd_study(args) -> int:
    settings = merge_settings(STUDY_DEFAULTS, args.config, args,
                              list(STUDY_DEFAULTS))
    try:
        truth = _load_center(settings["truth"])
        config = StudyConfig(
            truth=truth, excitation_levels=tuple(settings["levels"]),
            n_points=settings["n_points"], noise_slip=settings["noise_slip"],
            noise_force=settings["noise_force"], seed=settings["seed"],
            svi=SviConfig(steps=settings["steps"],
                          mc_samples=settings["mc_samples"],
                          learning_rate=settings["learning_rate"],
                          seed=settings["seed"]))
    except (ValueError, KeyError) as exc:
        return fail(EXIT_SCHEMA, type(exc).__name__, str(exc),
                    field="levels" if "level" in str(exc) else "config")
    rows = run_study(config)
    write_study_csv(rows, settings["output"])
    write_curves_csv(rows, settings["curves_output"])
    write_echo(settings, str(settings["output"]) + ".config.json")
    failures = [r for r in rows if r.error]
    if failures:
        log.warning("%d of %d rows carry an error flag", len(failures), len(rows))
    return EXIT_OK


SOBOL_DEFAULTS = {
    "center": None, "perturbation": 0.1, "grid_points": 200,
    "grid_min": 1e-3, "grid_max": 1.0, "samples": 4096, "seed": 0,
    "output": "sobol.csv",
}


def cmd_sobol(args) -> int:
    settings = merge_settings(SOBOL_DEFAULTS, args.config, args,
                              list(SOBOL_DEFAULTS))
    try:
        center = _load_center(settings["center"])
        grid = default_slip_grid(settings["grid_points"],
                                 settings["grid_min"], settings["grid_max"]) \
            if settings["grid_min"] > 0 else \
            np.linspace(settings["grid_min"], settings["grid_max"],
                        settings["grid_points"])
        result = sobol_indices(center, perturbation=settings["perturbation"],
                               slip_grid=grid, n_samples=settings["samples"],
                               seed=settings["seed"])
    except (ValueError, KeyError) as exc:
        return fail(EXIT_SCHEMA, type(exc).__name__, str(exc))
    result.write_csv(settings["output"])
    write_echo(settings, str(settings["output"]) + ".config.json")
    flagged = int(result.zero_variance.sum())
    if flagged:
        log.info("%d grid points flagged as zero-variance", flagged)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tirefit",
        description="Magic Formula tire parameter and uncertainty estimation")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--json-logs", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="telemetry CSV -> per-axle datasets")
    p.add_argument("log", nargs="?")
    p.add_argument("--config")
    p.add_argument("--vehicle")
    p.add_argument("--sidecar")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--target-rate", dest="target_rate", type=float)
    p.add_argument("--blanking", type=float)
    p.add_argument("--linear-cut", dest="linear_cut", type=float)
    p.add_argument("--thin-radius", dest="thin_radius", type=float)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="fit a dataset with nelder-mead or svi")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--config")
    p.add_argument("--method", choices=["svi", "nelder-mead"])
    p.add_argument("--output")
    p.add_argument("--seed", type=int)
    p.add_argument("--bounds")
    p.add_argument("--fixed-c", dest="fixed_c", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--posterior-count", dest="posterior_count", type=int)
    p.add_argument("--shifts")
    p.add_argument("--trace", action="store_const", const=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("study", help="simulative excitation study")
    p.add_argument("--config")
    p.add_argument("--truth")
    p.add_argument("--levels", type=float, nargs="+")
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--noise-slip", dest="noise_slip", type=float)
    p.add_argument("--noise-force", dest="noise_force", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--output")
    p.add_argument("--curves-output", dest="curves_output")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("sobol", help="total Sobol indices over a slip grid")
    p.add_argument("--config")
    p.add_argument("--center")
    p.add_argument("--perturbation", type=float)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--grid-min", dest="grid_min", type=float)
    p.add_argument("--grid-max", dest="grid_max", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sobol)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.INFO
    if args.json_logs:
        logging.basicConfig(
            level=level,
            format='{"level": "%(levelname)s", "logger": "%(name)s", '
                   '"message": "%(message)s"}')
    else:
        logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SchemaError as exc:
        return fail(EXIT_SCHEMA, "SchemaError", str(exc))
    except TirefitError as exc:
        return fail(EXIT_OPTIMIZATION, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
