"""Variance-based sensitivity of the tire curve to its coefficients.

A Saltelli paired-matrix estimator yields first-order, closed
second-order and (from those two) total indices. Interactions above
second order are deliberately not estimated; the total index reported
here is S_T_i = (V_i + sum_{j != i} V_ij) / V(y).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .kernels import mf_eval_params
from .tire_model import TireParams

ZERO_VARIANCE_EPS = 1e-14
DEFAULT_PERTURBATION = 0.1
DEFAULT_N_SAMPLES = 4096
PARAM_NAMES = ("B", "C", "D", "E")


def default_slip_grid(n: int = 200, lo: float = 1e-3, hi: float = 1.0) -> np.ndarray:
    """Log-spaced slip values resolving both linear region and sliding tail."""
    return np.logspace(np.log10(lo), np.log10(hi), n)


@dataclass
class SaltelliIndices:
    first: np.ndarray      # (k,)
    second: np.ndarray     # (k, k) symmetric, zero diagonal
    total: np.ndarray      # (k,) first- plus second-order aggregate
    variance: float


def saltelli_indices(func, lows, highs, n_samples: int,
                     rng: np.random.Generator) -> SaltelliIndices:
    """Sobol indices of func over a uniform box, up to second order.

    func maps an (n, k) matrix of parameter rows to n outputs. Uses two
    base matrices plus one mixed matrix per variable and per pair, so
    (2 + k + k(k-1)/2) * n_samples evaluations in total.
    """
    lows = np.asarray(lows, dtype=np.float64)
    highs = np.asarray(highs, dtype=np.float64)
    k = len(lows)
    a = lows + (highs - lows) * rng.random((n_samples, k))
    b = lows + (highs - lows) * rng.random((n_samples, k))
    fa = np.asarray(func(a), dtype=np.float64)
    fb = np.asarray(func(b), dtype=np.float64)
    f0 = 0.5 * (fa.mean() + fb.mean())
    fa = fa - f0
    fb = fb - f0
    variance = float(0.5 * (np.mean(fa * fa) + np.mean(fb * fb)))

    first = np.zeros(k)
    second = np.zeros((k, k))
    if variance < ZERO_VARIANCE_EPS:
        return SaltelliIndices(first=first, second=second,
                               total=np.zeros(k), variance=variance)

    f_mixed = []
    for i in range(k):
        abi = a.copy()
        abi[:, i] = b[:, i]
        f_mixed.append(np.asarray(func(abi), dtype=np.float64) - f0)
        first[i] = np.mean(fb * (f_mixed[i] - fa))
    for i in range(k):
        for j in range(i + 1, k):
            abij = a.copy()
            abij[:, i] = b[:, i]
            abij[:, j] = b[:, j]
            fij = np.asarray(func(abij), dtype=np.float64) - f0
            closed = np.mean(fb * (fij - fa))
            second[i, j] = second[j, i] = closed - first[i] - first[j]
    total = (first + second.sum(axis=1)) / variance
    return SaltelliIndices(first=first / variance, second=second / variance,
                           total=total, variance=variance)


@dataclass
class SobolResult:
    slip_grid: np.ndarray
    total_indices: dict[str, np.ndarray]     # parameter name -> S_T curve
    zero_variance: np.ndarray                # bool flag per grid point
    n_samples: int
    seed: int
    first_indices: dict[str, np.ndarray] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slip", "st_b", "st_c", "st_d", "st_e",
                        "flag_zero_variance"])
            for i, s in enumerate(self.slip_grid):
                w.writerow([repr(float(s))]
                           + [repr(float(self.total_indices[p][i]))
                              for p in PARAM_NAMES]
                           + [int(self.zero_variance[i])])


def _perturbation_box(center: TireParams, perturbation: float):
    c = center.as_array()
    lo = np.minimum(c * (1.0 - perturbation), c * (1.0 + perturbation))
    hi = np.maximum(c * (1.0 - perturbation), c * (1.0 + perturbation))
    degenerate = hi - lo < 1e-12
    lo[degenerate] -= 1e-6
    hi[degenerate] += 1e-6
    return lo, hi


def sobol_indices(center: TireParams, perturbation: float = DEFAULT_PERTURBATION,
                  slip_grid=None, n_samples: int = DEFAULT_N_SAMPLES,
                  seed: int = 0) -> SobolResult:
    """Total Sobol index of each coefficient along a slip grid.

    Coefficients are sampled uniformly in the +-perturbation box around
    the center; shifts Sh/Sv are held at zero. Grid points whose output
    variance is below 1e-14 are flagged and report zero indices.
    """
    if not 0.0 < perturbation <= 0.5:
        raise ValueError("perturbation must lie in (0, 0.5]")
    if n_samples < 2**10:
        raise ValueError("n_samples must be >= 1024")
    grid = np.asarray(slip_grid if slip_grid is not None else default_slip_grid(),
                      dtype=np.float64)
    lo, hi = _perturbation_box(center, perturbation)
    totals = {p: np.zeros(len(grid)) for p in PARAM_NAMES}
    firsts = {p: np.zeros(len(grid)) for p in PARAM_NAMES}
    flags = np.zeros(len(grid), dtype=bool)
    for gi, slip in enumerate(grid):
        rng = np.random.default_rng([seed, gi])
        res = saltelli_indices(
            lambda p: mf_eval_params(p, 0.0, 0.0, float(slip)),
            lo, hi, n_samples, rng)
        if res.variance < ZERO_VARIANCE_EPS:
            flags[gi] = True
            continue
        for pi, name in enumerate(PARAM_NAMES):
            totals[name][gi] = res.total[pi]
            firsts[name][gi] = res.first[pi]
    return SobolResult(slip_grid=grid, total_indices=totals,
                       zero_variance=flags, n_samples=n_samples, seed=seed,
                       first_indices=firsts)


def total_variance(center: TireParams, perturbation: float, slip: float,
                   n_samples: int, seed: int = 0) -> float:
    """Plain Monte-Carlo output variance over the perturbation box."""
    lo, hi = _perturbation_box(center, perturbation)
    rng = np.random.default_rng(seed)
    p = lo + (hi - lo) * rng.random((n_samples, 4))
    y = mf_eval_params(p, 0.0, 0.0, float(slip))
    return float(np.var(y))
