"""Nelder-Mead least-squares point fitter with boundary penalty."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyDataset
from ..preprocess import AxleDataset
from ..tire_model import ParamBounds, TireParams, evaluate_batch
from .result import FitResult

MAX_ITER = 10_000
DIAMETER_TOL = 1e-8
SPREAD_TOL = 1e-12
PENALTY_WEIGHT = 1e3


def _mse(theta, x, y, w, sh, sv):
    p = TireParams.from_vector(theta, Sh=sh, Sv=sv)
    r = evaluate_batch(p, x) - y
    return float(np.sum(w * r * r) / np.sum(w))


def _objective(theta, x, y, w, sh, sv, lows, highs):
    below = np.clip(lows - theta, 0.0, None)
    above = np.clip(theta - highs, 0.0, None)
    penalty = PENALTY_WEIGHT * float(np.sum(below**2 + above**2))
    return _mse(theta, x, y, w, sh, sv) + penalty


def _nelder_mead(f, x0, scale, max_iter=MAX_ITER):
    """Standard simplex descent; ties broken toward the smaller vertex index.

    Returns (best x, best f, trace of best f per iteration).
    """
    n = len(x0)
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += scale[i]
    fvals = np.array([f(v) for v in simplex])
    trace = []
    for _ in range(max_iter):
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        trace.append(fvals[0])
        diameter = np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1))
        if diameter < DIAMETER_TOL or fvals[-1] - fvals[0] < SPREAD_TOL:
            break
        centroid = simplex[:-1].mean(axis=0)
        # reflection
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            # contraction (outside if the reflected point improved the worst)
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (simplex[-1] - centroid)
            fc = f(xc)
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                # shrink toward the best vertex
                simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                fvals[1:] = [f(v) for v in simplex[1:]]
    order = np.argsort(fvals, kind="stable")
    return simplex[order[0]], fvals[order[0]], np.array(trace)


def _heuristic_init(x, y, bounds: ParamBounds, sh, sv) -> np.ndarray:
    """Data-driven start: D from the force peak, B from the origin slope."""
    d0 = float(np.max(np.abs(y - sv))) if len(y) else 1.0
    c0 = 0.5 * (bounds.C[0] + bounds.C[1])
    xs = x + sh
    lin = np.abs(xs) > 1e-9
    slope = float(np.median((y[lin] - sv) / xs[lin])) if np.any(lin) else bounds.B[0]
    b0 = abs(slope) / max(c0 * d0, 1e-9)
    return bounds.clip([b0, c0, d0, 0.0])


def fit_nelder_mead(dataset: AxleDataset,
                    bounds: ParamBounds | None = None,
                    init: TireParams | None = None,
                    fixed_c: float | None = None,
                    sh: float | None = None,
                    sv: float | None = None) -> FitResult:
    """Minimize the weighted MSE of the curve over (B, C, D, E).

    Out-of-box parameters are discouraged by a quadratic penalty; the
    returned mean is clipped into the box. The covariance of a point
    estimate is all-zero. With `fixed_c`, C is pinned and only B, D, E
    move. Sh/Sv come from `init` unless given explicitly.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot fit an empty dataset")
    bounds = bounds or ParamBounds()
    sh = sh if sh is not None else (init.Sh if init else 0.0)
    sv = sv if sv is not None else (init.Sv if init else 0.0)
    x, y, w = dataset.excitation, dataset.force_coeff, dataset.weight

    lows, highs = bounds.lows(), bounds.highs()
    theta0 = bounds.clip(init.as_array()) if init is not None \
        else _heuristic_init(x, y, bounds, sh, sv)
    free = np.array([True, fixed_c is None, True, True])
    if fixed_c is not None:
        theta0 = theta0.copy()
        theta0[1] = fixed_c

    def embed(sub):
        full = theta0.copy()
        full[free] = sub
        return full

    def f(sub):
        return _objective(embed(sub), x, y, w, sh, sv, lows, highs)

    scale = 0.05 * (highs - lows)
    best, fbest, trace = _nelder_mead(f, theta0[free], scale[free])
    # one deterministic restart from the found point tightens the solution
    best, fbest, trace2 = _nelder_mead(f, best, 0.1 * scale[free])
    trace = np.concatenate([trace, np.minimum.accumulate(trace2)])
    trace = np.minimum.accumulate(trace)

    theta = bounds.clip(embed(best))
    params = TireParams.from_vector(theta, Sh=sh, Sv=sv)
    residuals = evaluate_batch(params, x) - y
    sigma = float(np.sqrt(np.mean(residuals**2)))
    return FitResult(mean=theta, covariance=np.zeros((4, 4)), sigma_noise=sigma,
                     trace=trace, method="nelder-mead", bounds=bounds,
                     params=params,
                     config={"fixed_c": fixed_c, "init": list(map(float, theta0))})
