"""Compiled kernels versus the pure NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

The fallback timings come from a child process started with
VECPLAP_NUMBA=0, so both columns measure what a user of either mode gets.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def cases():
    from vecplap.fields import make_grid
    from vecplap.fractional import FracParams, assemble_kernel
    from vecplap.psine import integrate_ivp, shoot_ladder

    out = {}
    for m in (41, 101):
        kern = assemble_kernel(make_grid(1, [(0, 1)], m), FracParams(0.4, 3.0))
        U = np.random.default_rng(0).normal(size=(m, 2))
        U[[0, -1]] = 0
        out[f"gagliardo energy+grad m={m} N=2"] = lambda k=kern, U=U: k.energy_grad(U)
    out["dopri p=3 N=3 10 zeros"] = lambda: integrate_ivp(3.0, 1.0, np.zeros(3), np.ones(3), 20.0, 1e-10)
    out["shoot_ladder p=1.5 kmax=3"] = lambda: shoot_ladder(1.5, 3, 1e-10)
    return out


def time_all(repeat):
    res = {}
    for name, fn in cases().items():
        fn()  # warm-up (compilation)
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        res[name] = best
    return res


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(time_all(args.repeat)))
        return
    from vecplap.kernels import USE_NUMBA

    if not USE_NUMBA:
        sys.exit("run without VECPLAP_NUMBA=0; the fallback is timed in a child process")
    fast = time_all(args.repeat)
    env = dict(os.environ, VECPLAP_NUMBA="0")
    child = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                           env=env, capture_output=True, text=True, check=True)
    slow = json.loads(child.stdout)
    print(f"{'case':<36}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name in fast:
        print(f"{name:<36}{1e3 * fast[name]:>12.2f}{1e3 * slow[name]:>12.2f}{slow[name] / fast[name]:>10.1f}")


if __name__ == "__main__":
    main()
