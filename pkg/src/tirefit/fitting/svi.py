"""Stochastic variational inference for the Magic Formula coefficients.

The guide is a full-covariance Gaussian in an unconstrained space mapped
onto the parameter box by a per-coordinate sigmoid-affine bijection.
The ELBO is maximized by reparameterized stochastic gradient ascent with
fully analytic gradients (curve derivatives chained through the
bijection), so no autodiff framework is needed.

Model: force_coeff_n ~ Normal(curve(theta, excitation_n), sigma) with a
uniform prior for theta over the bounds box; sigma is optimized jointly
through an exponential transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDataset, NonFiniteObjective, NotAPosterior
from ..kernels import mf_eval, mf_param_grads
from ..preprocess import AxleDataset
from ..tire_model import ParamBounds, TireParams
from .nelder_mead import fit_nelder_mead
from .result import FitResult, SviConfig

LOG_2PI = float(np.log(2.0 * np.pi))
INIT_UNCONSTRAINED_STD = 0.4    # sigmoid slope 1/4 => ~10% of box width
POSTERIOR_STAT_SAMPLES = 10_000


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


@dataclass
class GuideState:
    """Mean and Cholesky factor of the unconstrained Gaussian guide."""

    m: np.ndarray            # (k,)
    L: np.ndarray            # (k, k) lower triangular, positive diagonal
    log_sigma: float
    lows: np.ndarray         # (k,) box bounds of the free coordinates
    highs: np.ndarray
    free: np.ndarray         # (4,) bool mask over (B, C, D, E)
    fixed_c: float | None = None
    Sh: float = 0.0
    Sv: float = 0.0

    @property
    def k(self) -> int:
        return len(self.m)

    def constrain(self, u: np.ndarray) -> np.ndarray:
        """Map unconstrained coordinates into the box (supports batches)."""
        return self.lows + (self.highs - self.lows) * _sigmoid(u)

    def full_theta(self, theta_free: np.ndarray) -> np.ndarray:
        theta = np.empty(theta_free.shape[:-1] + (4,))
        theta[..., self.free] = theta_free
        if self.fixed_c is not None:
            theta[..., 1] = self.fixed_c
        return theta


def _pack(state: GuideState) -> np.ndarray:
    k = state.k
    tril = np.tril_indices(k, -1)
    return np.concatenate([state.m, np.log(np.diag(state.L)),
                           state.L[tril], [state.log_sigma]])


def _unpack(vec: np.ndarray, template: GuideState) -> GuideState:
    k = template.k
    m = vec[:k]
    L = np.zeros((k, k))
    L[np.diag_indices(k)] = np.exp(vec[k:2 * k])
    tril = np.tril_indices(k, -1)
    L[tril] = vec[2 * k:2 * k + len(tril[0])]
    return GuideState(m=m.copy(), L=L, log_sigma=float(vec[-1]),
                      lows=template.lows, highs=template.highs,
                      free=template.free, fixed_c=template.fixed_c,
                      Sh=template.Sh, Sv=template.Sv)


def elbo_and_grad(vec: np.ndarray, template: GuideState,
                  x: np.ndarray, y: np.ndarray, w: np.ndarray,
                  eps: np.ndarray) -> tuple[float, np.ndarray]:
    """ELBO estimate and its analytic gradient for fixed noise draws eps.

    eps has shape (n_mc, k); the expectation terms are averaged over its
    rows, the guide entropy is added analytically.
    """
    state = _unpack(vec, template)
    k = state.k
    n_mc = eps.shape[0]
    width = state.highs - state.lows
    sigma = float(np.exp(state.log_sigma))
    tril = np.tril_indices(k, -1)

    value_sum = 0.0
    g_m = np.zeros(k)
    g_ell = np.zeros(k)
    g_off = np.zeros(len(tril[0]))
    g_s = 0.0
    diag_L = np.diag(state.L)

    for e in eps:
        u = state.m + state.L @ e
        sig = _sigmoid(u)
        theta_free = state.lows + width * sig
        theta = state.full_theta(theta_free)
        yhat = mf_eval(theta[0], theta[1], theta[2], theta[3],
                       state.Sh, state.Sv, x)
        r = y - yhat
        loglik = float(np.sum(w * (-0.5 * LOG_2PI - state.log_sigma
                                   - r * r / (2.0 * sigma * sigma))))
        logjac = float(np.sum(np.log(width) + np.log(sig) + np.log1p(-sig)))
        logprior = float(-np.sum(np.log(width)))
        value_sum += loglik + logjac + logprior

        jac = mf_param_grads(theta[0], theta[1], theta[2], theta[3],
                             state.Sh, x)[:, state.free]
        dll_dtheta = (w * r / (sigma * sigma)) @ jac
        g_u = dll_dtheta * width * sig * (1.0 - sig) + (1.0 - 2.0 * sig)
        g_m += g_u
        gL = np.outer(g_u, e)
        g_ell += np.diag(gL) * diag_L
        g_off += gL[tril]
        g_s += float(np.sum(w * (r * r / (sigma * sigma) - 1.0)))

    entropy = 0.5 * k * (1.0 + LOG_2PI) + float(np.sum(np.log(diag_L)))
    value = value_sum / n_mc + entropy
    grad = np.concatenate([g_m / n_mc, g_ell / n_mc + 1.0,
                           g_off / n_mc, [g_s / n_mc]])
    return value, grad


def elbo(dataset: AxleDataset, guide: GuideState, mc_samples: int,
         rng: np.random.Generator) -> float:
    """Unbiased Monte-Carlo ELBO estimate under the given guide state."""
    eps = rng.standard_normal((mc_samples, guide.k))
    if len(dataset) == 0:
        x = np.empty(0)
        y = np.empty(0)
        w = np.empty(0)
    else:
        x, y, w = dataset.excitation, dataset.force_coeff, dataset.weight
    value, _ = elbo_and_grad(_pack(guide), guide, x, y, w, eps)
    return value


def _initial_state(bounds: ParamBounds, fixed_c, sh, sv, sigma0: float,
                   theta0: np.ndarray | None = None) -> GuideState:
    free = np.array([True, fixed_c is None, True, True])
    lows = bounds.lows()[free]
    highs = bounds.highs()[free]
    k = len(lows)
    m = np.zeros(k)
    if theta0 is not None:
        # start at the preliminary point fit, pulled slightly off the
        # box faces so the logit stays finite
        width = highs - lows
        t = np.clip(theta0[free], lows + 1e-3 * width, highs - 1e-3 * width)
        m = np.log((t - lows) / (highs - t))
    return GuideState(m=m,
                      L=np.eye(k) * INIT_UNCONSTRAINED_STD,
                      log_sigma=float(np.log(sigma0)),
                      lows=lows, highs=highs, free=free, fixed_c=fixed_c,
                      Sh=sh, Sv=sv)


def fit_svi(dataset: AxleDataset, config: SviConfig | None = None,
            sh: float = 0.0, sv: float = 0.0) -> FitResult:
    """Maximize the ELBO by Adam with a cosine learning-rate decay.

    Deterministic given the config seed. The reported mean/covariance are
    constrained-space statistics of the fitted guide pushed through the
    bijection (10^4 draws); sigma_noise is the fitted observation noise.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot fit an empty dataset")
    config = config or SviConfig()
    bounds = config.bounds
    x, y, w = dataset.excitation, dataset.force_coeff, dataset.weight

    # a quick point fit seeds both the observation noise and the guide mean
    prelim = fit_nelder_mead(dataset, bounds=bounds, fixed_c=config.fixed_c,
                             sh=sh, sv=sv)
    sigma0 = max(prelim.sigma_noise, 1e-3)

    template = _initial_state(bounds, config.fixed_c, sh, sv, sigma0,
                              theta0=prelim.mean)
    vec = _pack(template)
    rng = np.random.default_rng(config.seed)

    lr0 = config.learning_rate
    lr_min = 0.01 * lr0
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    m1 = np.zeros_like(vec)
    m2 = np.zeros_like(vec)
    trace = np.empty(config.steps)
    for t in range(config.steps):
        eps = rng.standard_normal((config.mc_samples, template.k))
        value, grad = elbo_and_grad(vec, template, x, y, w, eps)
        if not np.isfinite(value):
            raise NonFiniteObjective(
                f"ELBO became non-finite at step {t}; lower the learning rate")
        trace[t] = -value
        lr = lr_min + 0.5 * (lr0 - lr_min) * (1.0 + np.cos(np.pi * t / config.steps))
        m1 = beta1 * m1 + (1.0 - beta1) * grad
        m2 = beta2 * m2 + (1.0 - beta2) * grad * grad
        mhat = m1 / (1.0 - beta1 ** (t + 1))
        vhat = m2 / (1.0 - beta2 ** (t + 1))
        vec = vec + lr * mhat / (np.sqrt(vhat) + adam_eps)

    guide = _unpack(vec, template)
    draws = _draw_constrained(guide, POSTERIOR_STAT_SAMPLES, rng)
    mean4 = np.full(4, config.fixed_c if config.fixed_c is not None else 0.0)
    cov4 = np.zeros((4, 4))
    mean4[guide.free] = draws.mean(axis=0)[guide.free]
    sub = np.cov(draws[:, guide.free], rowvar=False)
    cov4[np.ix_(guide.free, guide.free)] = sub
    params = TireParams.from_vector(mean4, Sh=sh, Sv=sv)
    return FitResult(mean=mean4, covariance=cov4,
                     sigma_noise=float(np.exp(guide.log_sigma)),
                     trace=trace, method="svi", bounds=bounds, params=params,
                     config=config.to_dict(), guide=guide)


def _draw_constrained(guide: GuideState, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """n draws from the guide pushed into the box; shape (n, 4)."""
    eps = rng.standard_normal((n, guide.k))
    u = guide.m + eps @ guide.L.T
    return guide.full_theta(guide.constrain(u))


def posterior_samples(result: FitResult, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Draws of (B, C, D, E) from a fitted SVI guide; all inside bounds."""
    if result.method != "svi" or result.guide is None:
        raise NotAPosterior("posterior sampling requires an SVI result")
    if n == 0:
        return np.empty((0, 4))
    return _draw_constrained(result.guide, n, rng)
