"""Hot numerical kernels for the Magic Formula curve.

At import time the compiled Cython extension is preferred; if it is not
available (or ``TIREFIT_PURE_PYTHON=1`` is set) the numpy implementation
is used instead. Both expose the same three functions:

    mf_eval(B, C, D, E, Sh, Sv, x)        -> y, elementwise curve values
    mf_eval_params(params, Sh, Sv, x)     -> y, one row of (B,C,D,E) each
    mf_param_grads(B, C, D, E, Sh, x)     -> (n, 4) d y / d (B,C,D,E)

See benchmarks/bench_kernels.py for a speed comparison.
"""

import os

from . import _mf_numpy

if os.environ.get("TIREFIT_PURE_PYTHON") == "1":
    _impl = _mf_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _mf_cython as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _mf_numpy
        BACKEND = "numpy"

mf_eval = _impl.mf_eval
mf_eval_params = _impl.mf_eval_params
mf_param_grads = _impl.mf_param_grads

__all__ = ["mf_eval", "mf_eval_params", "mf_param_grads", "BACKEND"]
