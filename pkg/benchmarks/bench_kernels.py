#!/usr/bin/env python3
"""Micro-benchmarks for the kernel backends.

Times each hot primitive (single-level transform pair, elementwise
soft-threshold, tree-group gather/scatter/shrink) under both the compiled
extension and the pure-numpy fallback, and prints the per-op speedup.  The
two backends return bit-identical results (see tests/test_backends.py);
this script only measures wall-clock time.

Usage:
    python benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeats 7]
"""

import argparse
import time

import numpy as np

from wtcs import _kernels_py
from wtcs.wavelet import build_tree_groups

try:
    from wtcs import _kernels
except ImportError:
    _kernels = None


def _best_of(fn, repeats):
    """Minimum wall-clock seconds over ``repeats`` calls."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(size, rng):
    """(name, kwargs-free callable factory) pairs for one problem size."""
    plane = np.ascontiguousarray(rng.normal(size=(size, size)))
    parts = _kernels_py.dwt_level(plane)
    flat_n = size * size
    r = np.ascontiguousarray(rng.normal(size=flat_n))
    tau = np.ascontiguousarray(np.abs(rng.normal(size=flat_n)))

    groups = build_tree_groups(size, 2)
    hf = np.ascontiguousarray(rng.normal(size=groups.detail_length()))
    w = np.ascontiguousarray(np.ones(groups.n_groups))
    gathered = _kernels_py.group_gather(hf, groups.indices, w)
    acc = np.zeros(groups.detail_length())

    def make(kernels):
        return [
            ("dwt_level", lambda: kernels.dwt_level(plane)),
            ("idwt_level", lambda: kernels.idwt_level(*parts)),
            ("soft_threshold", lambda: kernels.soft_threshold(r, tau)),
            ("group_gather",
             lambda: kernels.group_gather(hf, groups.indices, w)),
            ("group_scatter_add",
             lambda: kernels.group_scatter_add(acc, groups.indices, w,
                                               gathered)),
            ("group_shrink",
             lambda: kernels.group_shrink(gathered, 0.1)),
        ]

    return make


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="64,128,256",
                        help="comma-separated square block sizes")
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats; the minimum is reported")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(args.seed)

    if _kernels is None:
        print("compiled extension not available; timing the numpy "
              "fallback only")

    header = f"{'size':>6} {'op':<18} {'python_ms':>10}"
    if _kernels is not None:
        header += f" {'compiled_ms':>12} {'speedup':>8}"
    print(header)
    for size in sizes:
        make = _cases(size, rng)
        py_ops = make(_kernels_py)
        c_ops = make(_kernels) if _kernels is not None else None
        for i, (name, py_fn) in enumerate(py_ops):
            t_py = _best_of(py_fn, args.repeats)
            line = f"{size:>6} {name:<18} {t_py * 1e3:>10.3f}"
            if c_ops is not None:
                t_c = _best_of(c_ops[i][1], args.repeats)
                line += f" {t_c * 1e3:>12.3f} {t_py / t_c:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()
