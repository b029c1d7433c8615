"""Timing comparison of the compiled and pure-numpy Magic Formula kernels.

Run with `python benchmarks/bench_kernels.py [n_points ...]`; without
arguments a size sweep is reported. For each kernel the best wall time
on identical inputs is shown, plus the speedup of the compiled backend
where it is available. The compiled loop avoids numpy's temporaries and
wins at the small array sizes the fitters use; numpy's vectorized
transcendentals take over for large grids.
"""

import sys
import timeit

import numpy as np

from tirefit.kernels import _mf_numpy

try:
    from tirefit.kernels import _mf_cython
except ImportError:
    _mf_cython = None

PARAMS = (15.0, 2.0, 1.5, 0.8, 0.01, -0.02)


def median_time(fn, repeats=7, number=20):
    return min(timeit.repeat(fn, repeat=repeats, number=number)) / number


def bench(n: int) -> None:
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.0, 1.0, n)
    param_rows = np.column_stack([
        rng.uniform(5, 40, n), rng.uniform(1, 3, n),
        rng.uniform(0.1, 2, n), rng.uniform(-1, 1, n)])

    cases = {
        "mf_eval": lambda m: m.mf_eval(*PARAMS, x),
        "mf_eval_params": lambda m: m.mf_eval_params(param_rows, 0.0, 0.0, 0.05),
        "mf_param_grads": lambda m: m.mf_param_grads(15.0, 2.0, 1.5, 0.8,
                                                     0.01, x),
    }
    print(f"n = {n}")
    print(f"{'kernel':<16}{'numpy [us]':>12}{'cython [us]':>13}{'speedup':>9}")
    for name, call in cases.items():
        t_np = median_time(lambda: call(_mf_numpy)) * 1e6
        if _mf_cython is None:
            print(f"{name:<16}{t_np:>12.1f}{'n/a':>13}{'n/a':>9}")
            continue
        ref = call(_mf_numpy)
        got = call(_mf_cython)
        assert np.allclose(got, ref, rtol=1e-13, atol=1e-13), name
        t_cy = median_time(lambda: call(_mf_cython)) * 1e6
        print(f"{name:<16}{t_np:>12.1f}{t_cy:>13.1f}{t_np / t_cy:>8.2f}x")


if __name__ == "__main__":
    sizes = [int(a) for a in sys.argv[1:]] or [100, 1_000, 10_000, 100_000]
    for n_points in sizes:
        bench(n_points)
        print()
