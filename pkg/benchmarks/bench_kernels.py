#!/usr/bin/env python3
"""Benchmark the compiled evaluation kernels against the numpy fallback.

The shapes mirror the hot loop of the Monte-Carlo experiments: 10 model pairs,
stacked-input dimension 10, a few thousand candidate vertices per design step.

Usage:  python3 benchmarks/bench_kernels.py [--repeat 200]
"""

import argparse
import time

import numpy as np

from clafd._kernels import _numpy

try:
    from clafd._kernels import _native
except ImportError:
    _native = None


def make_case(rng, p, m, nv):
    G = rng.normal(size=(p, m, m))
    H = np.ascontiguousarray(G @ np.transpose(G, (0, 2, 1)) / m)
    c = np.ascontiguousarray(rng.normal(size=(p, m)))
    h = np.ascontiguousarray(np.abs(rng.normal(size=p)))
    w = np.ascontiguousarray(np.abs(rng.normal(size=p)))
    U = np.ascontiguousarray(rng.normal(size=(nv, m)))
    return H, c, h, w, U


def timeit(fn, repeat):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = [("design step, polytope", 10, 10, 4356),
             ("design step, ball iterate", 10, 10, 1),
             ("long-horizon gradient", 10, 400, 1)]

    print(f"{'case':28s} {'kernel':26s} {'numpy':>10s} {'native':>10s} {'speedup':>8s}")
    for name, p, m, nv in cases:
        H, c, h, w, U = make_case(rng, p, m, nv)
        u = np.ascontiguousarray(U[0])
        kernels = [
            ("quad_batch_eval", lambda mod: mod.quad_batch_eval(H, c, h, U)),
            ("weighted_exp_objective", lambda mod: mod.weighted_exp_objective(H, c, h, w, U)),
            ("weighted_exp_grad", lambda mod: mod.weighted_exp_grad(H, c, h, w, u)),
        ]
        for kname, call in kernels:
            t_np = timeit(lambda: call(_numpy), args.repeat)
            if _native is None:
                print(f"{name:28s} {kname:26s} {t_np * 1e6:9.1f}us {'n/a':>10s} {'-':>8s}")
                continue
            t_nat = timeit(lambda: call(_native), args.repeat)
            a = call(_numpy)
            b = call(_native)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
            print(f"{name:28s} {kname:26s} {t_np * 1e6:9.1f}us {t_nat * 1e6:9.1f}us "
                  f"{t_np / t_nat:7.1f}x")


if __name__ == "__main__":
    main()
