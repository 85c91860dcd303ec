#!/usr/bin/env python3
"""Benchmark the compiled stencil/prox kernels against the numpy fallback.

These kernels run inside the conjugate-gradient loops of the ADMM solvers
(thousands of calls per reconstruction), so per-call overhead matters.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Also times one full TV reconstruction with each backend when run with
--end-to-end (respects SPILAB_PURE_PYTHON only at import, so the
end-to-end comparison re-executes itself in a subprocess).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from spilab._kernels import _ops_py  # noqa: E402

try:
    from spilab._kernels import _ops as _ops_cy
except ImportError:
    _ops_cy = None


def time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_stencils(repeats):
    rng = np.random.default_rng(0)
    print("%-16s %8s %12s %12s %8s" % ("kernel", "size", "numpy", "cython",
                                       "speedup"))
    for side in (64, 128, 256):
        x = rng.standard_normal((side, side))
        gx, gy = _ops_py.grad2(x)
        cases = [
            ("grad2", (x,), _ops_py.grad2,
             _ops_cy.grad2 if _ops_cy else None),
            ("div2", (gx, gy), _ops_py.div2,
             _ops_cy.div2 if _ops_cy else None),
            ("gram_tv", (x,), _ops_py.gram_tv,
             _ops_cy.gram_tv if _ops_cy else None),
            ("soft_threshold", (x, 0.1), _ops_py.soft_threshold,
             _ops_cy.soft_threshold if _ops_cy else None),
        ]
        for name, args, py_fn, cy_fn in cases:
            t_py = time_call(py_fn, args, repeats)
            if cy_fn is None:
                print("%-16s %8d %12.2fus %12s %8s"
                      % (name, side, t_py * 1e6, "n/a", "n/a"))
                continue
            t_cy = time_call(cy_fn, args, repeats)
            print("%-16s %8d %10.2f us %10.2f us %7.1fx"
                  % (name, side, t_py * 1e6, t_cy * 1e6, t_py / t_cy))


def bench_end_to_end():
    script = (
        "import time, numpy as np;"
        "import spilab;"
        "from spilab import forward, solver;"
        "from spilab.imageio import load_image;"
        "truth = load_image('data/test/person_camera.pgm');"
        "ps = forward.gen_patterns(1024, 64, 64, 'bernoulli01', 3);"
        "m = forward.measure(truth, ps);"
        "cfg = solver.SolverConfig(prior='TV', max_iterations=60);"
        "t0 = time.perf_counter();"
        "solver.reconstruct_global(m, ps, cfg);"
        "print('%s backend: %.2fs' % (spilab.KERNEL_BACKEND,"
        " time.perf_counter() - t0))"
    )
    for env_value in ("", "1"):
        env = dict(os.environ)
        if env_value:
            env["SPILAB_PURE_PYTHON"] = env_value
        else:
            env.pop("SPILAB_PURE_PYTHON", None)
        subprocess.run([sys.executable, "-c", script], env=env, check=True)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--end-to-end", action="store_true",
                        help="also time a full TV reconstruction per backend")
    args = parser.parse_args()
    if _ops_cy is None:
        print("compiled backend not available; timing numpy only")
    bench_stencils(args.repeats)
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
