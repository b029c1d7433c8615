"""Simulative excitation study: fit synthetic data truncated at several
maximum slip levels and record parameter estimates and uncertainties.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fitting import SviConfig, fit_nelder_mead, fit_svi
from .preprocess import AxleDataset
from .tire_model import REFERENCE_PARAMS, ParamBounds, TireParams, evaluate_batch

DEFAULT_LEVELS = (0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.15, 0.20,
                  0.30, 0.50, 0.75, 1.00)
HIGHLIGHT_LEVELS = (0.02, 0.08, 0.75)
REFERENCE_GRID = np.linspace(0.0, 1.0, 500)


def worker_count() -> int:
    """Internal parallelism cap, overridable via TIREFIT_THREADS."""
    env = os.environ.get("TIREFIT_THREADS")
    if env:
        return max(1, int(env))
    return 1


@dataclass(frozen=True)
class StudyConfig:
    truth: TireParams = REFERENCE_PARAMS
    excitation_levels: tuple = DEFAULT_LEVELS
    n_points: int = 500
    noise_slip: float = 0.002
    noise_force: float = 0.02
    seed: int = 0
    svi: SviConfig = field(default_factory=SviConfig)
    bounds: ParamBounds = field(default_factory=ParamBounds)

    def __post_init__(self):
        levels = tuple(self.excitation_levels)
        if list(levels) != sorted(levels) or not all(0 < lv <= 1 for lv in levels):
            raise ValueError("levels must be ascending within (0, 1]")
        object.__setattr__(self, "excitation_levels", levels)


@dataclass
class StudyRow:
    level: float
    method: str
    mean: np.ndarray
    std: np.ndarray           # zeros for the point fitter
    mse: float
    error: str = ""


def generate_synthetic(truth: TireParams, level: float, n_points: int,
                       noise_slip: float, noise_force: float,
                       rng: np.random.Generator) -> AxleDataset:
    """Noisy samples of the truth curve up to the given excitation level.

    The force is computed at the true slip; noise then corrupts the
    recorded slip and the force independently (errors-in-variables).
    """
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    slip_true = np.linspace(-level, level, n_points)
    force = evaluate_batch(truth, slip_true)
    slip_rec = slip_true + rng.normal(0.0, noise_slip, n_points) if noise_slip \
        else slip_true
    force = force + rng.normal(0.0, noise_force, n_points) if noise_force \
        else force
    return AxleDataset(excitation=slip_rec, force_coeff=force)


def _reference_mse(mean: np.ndarray, truth: TireParams) -> float:
    fitted = TireParams.from_vector(mean)
    ref = evaluate_batch(replace(truth, Sh=0.0, Sv=0.0), REFERENCE_GRID)
    return float(np.mean((evaluate_batch(fitted, REFERENCE_GRID) - ref) ** 2))


def _run_level(config: StudyConfig, idx: int, level: float) -> list[StudyRow]:
    rng = np.random.default_rng([config.seed, idx])
    data = generate_synthetic(config.truth, level, config.n_points,
                              config.noise_slip, config.noise_force, rng)
    rows = []
    try:
        nm = fit_nelder_mead(data, bounds=config.bounds)
        rows.append(StudyRow(level=level, method="nelder-mead", mean=nm.mean,
                             std=np.zeros(4), mse=_reference_mse(nm.mean, config.truth)))
    except Exception as exc:
        rows.append(StudyRow(level=level, method="nelder-mead",
                             mean=np.full(4, np.nan), std=np.full(4, np.nan),
                             mse=np.nan, error=str(exc)))
    try:
        svi_cfg = replace(config.svi, bounds=config.bounds,
                          seed=config.svi.seed * 10_000 + idx)
        svi = fit_svi(data, svi_cfg)
        rows.append(StudyRow(level=level, method="svi", mean=svi.mean,
                             std=svi.std(), mse=_reference_mse(svi.mean, config.truth)))
    except Exception as exc:
        rows.append(StudyRow(level=level, method="svi",
                             mean=np.full(4, np.nan), std=np.full(4, np.nan),
                             mse=np.nan, error=str(exc)))
    return rows


def run_study(config: StudyConfig) -> list[StudyRow]:
    """Fit every excitation level with both methods.

    Per-level RNG streams are derived from (seed, level index), so the
    result does not depend on scheduling; levels run in parallel up to
    the TIREFIT_THREADS cap. Fitter failures are recorded per row.
    """
    levels = list(enumerate(config.excitation_levels))
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda iv: _run_level(config, *iv), levels))
    else:
        chunks = [_run_level(config, i, lv) for i, lv in levels]
    return [row for chunk in chunks for row in chunk]


def write_study_csv(rows: list[StudyRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "method", "b_mean", "c_mean", "d_mean", "e_mean",
                    "b_std", "c_std", "d_std", "e_std", "mse", "error_flag"])
        for r in rows:
            w.writerow([repr(float(r.level)), r.method]
                       + [repr(float(v)) for v in r.mean]
                       + [repr(float(v)) for v in r.std]
                       + [repr(float(r.mse)), r.error])


def write_curves_csv(rows: list[StudyRow], path,
                     levels=HIGHLIGHT_LEVELS) -> None:
    """Dense fitted curves for the highlighted levels, for plotting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "method", "slip", "force_coeff"])
        for r in rows:
            if r.error or not any(np.isclose(r.level, lv) for lv in levels):
                continue
            curve = evaluate_batch(TireParams.from_vector(r.mean), REFERENCE_GRID)
            for s, f in zip(REFERENCE_GRID, curve):
                w.writerow([repr(float(r.level)), r.method,
                            repr(float(s)), repr(float(f))])
