"""Pure-numpy implementation of the Magic Formula kernels."""

import numpy as np


def mf_eval(B, C, D, E, Sh, Sv, x):
    """Evaluate D*sin(C*atan(B*xs - E*(B*xs - atan(B*xs)))) + Sv, xs = x + Sh."""
    xs = np.asarray(x, dtype=np.float64) + Sh
    bx = B * xs
    psi = bx - E * (bx - np.arctan(bx))
    return D * np.sin(C * np.arctan(psi)) + Sv


def mf_eval_params(params, Sh, Sv, x):
    """Evaluate the curve at a single excitation for many parameter rows.

    params is (n, 4) with columns B, C, D, E; returns an (n,) array.
    """
    p = np.asarray(params, dtype=np.float64)
    xs = x + Sh
    bx = p[:, 0] * xs
    psi = bx - p[:, 3] * (bx - np.arctan(bx))
    return p[:, 2] * np.sin(p[:, 1] * np.arctan(psi)) + Sv


def mf_param_grads(B, C, D, E, Sh, x):
    """Partial derivatives of the curve w.r.t. (B, C, D, E) at each x.

    Returns an (n, 4) array; Sv is additive and drops out.
    """
    xs = np.asarray(x, dtype=np.float64) + Sh
    bx = B * xs
    atan_bx = np.arctan(bx)
    psi = bx - E * (bx - atan_bx)
    t = np.arctan(psi)
    sin_ct = np.sin(C * t)
    cos_ct = np.cos(C * t)
    dpsi = D * cos_ct * C / (1.0 + psi * psi)

    out = np.empty(xs.shape + (4,), dtype=np.float64)
    out[..., 0] = dpsi * xs * (1.0 - E * (1.0 - 1.0 / (1.0 + bx * bx)))
    out[..., 1] = D * cos_ct * t
    out[..., 2] = sin_ct
    out[..., 3] = dpsi * (atan_bx - bx)
    return out
