# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementation of the Magic Formula kernels."""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan, cos, sin

cnp.import_array()


def mf_eval(double B, double C, double D, double E, double Sh, double Sv, x):
    """Evaluate D*sin(C*atan(B*xs - E*(B*xs - atan(B*xs)))) + Sv, xs = x + Sh."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = \
        np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64).ravel()
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double xs, bx, psi
    for i in range(n):
        xs = xa[i] + Sh
        bx = B * xs
        psi = bx - E * (bx - atan(bx))
        y[i] = D * sin(C * atan(psi)) + Sv
    res = y.reshape(np.shape(x)) if np.ndim(x) > 1 else y
    return res


def mf_eval_params(params, double Sh, double Sv, double x):
    """Evaluate the curve at a single excitation for many (B,C,D,E) rows."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = \
        np.ascontiguousarray(params, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double xs = x + Sh
    cdef double bx, psi
    for i in range(n):
        bx = p[i, 0] * xs
        psi = bx - p[i, 3] * (bx - atan(bx))
        y[i] = p[i, 2] * sin(p[i, 1] * atan(psi)) + Sv
    return y


def mf_param_grads(double B, double C, double D, double E, double Sh, x):
    """Partial derivatives of the curve w.r.t. (B, C, D, E) at each x."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = \
        np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64).ravel()
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 4), dtype=np.float64)
    cdef Py_ssize_t i
    cdef double xs, bx, atan_bx, psi, t, sin_ct, cos_ct, dpsi
    for i in range(n):
        xs = xa[i] + Sh
        bx = B * xs
        atan_bx = atan(bx)
        psi = bx - E * (bx - atan_bx)
        t = atan(psi)
        sin_ct = sin(C * t)
        cos_ct = cos(C * t)
        dpsi = D * cos_ct * C / (1.0 + psi * psi)
        out[i, 0] = dpsi * xs * (1.0 - E * (1.0 - 1.0 / (1.0 + bx * bx)))
        out[i, 1] = D * cos_ct * t
        out[i, 2] = sin_ct
        out[i, 3] = dpsi * (atan_bx - bx)
    return out
