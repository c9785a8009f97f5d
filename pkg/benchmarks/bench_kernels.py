#!/usr/bin/env python3
"""Benchmark: compiled kernel core vs numpy fallback.

Times the stepping kernels on desk-scale workloads (the acceptance
suite's shapes) and prints a table with speedups.  Run after an editable
install:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from schrocurve._kernels import fallback

try:
    from schrocurve._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)

    def rand(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    for n, steps in ((256, 1000), (1024, 250)):
        u = rand(n)
        vh = np.exp(1j * rng.standard_normal(n))
        kin = np.exp(1j * rng.standard_normal(n))
        yield f"strang_run 1d n={n} steps={steps}", ("strang_run", (u, vh, kin, steps))
        cxs = 0.2 * rand((2, n))
        mxis = rand((2, n))
        yield f"rk4_run    1d n={n} steps={steps} P=2", ("rk4_run", (u, cxs, mxis, 1e-3, steps))
        m = np.exp(1j * rng.standard_normal(n))  # unitary, safe to iterate
        yield f"multiplier 1d n={n} x{steps}", ("multiplier_loop", (u, m, steps))
    n, steps = 128, 50
    u2 = rand((n, n))
    vh2 = np.exp(1j * rng.standard_normal((n, n)))
    kin2 = np.exp(1j * rng.standard_normal((n, n)))
    yield f"strang_run 2d n={n}^2 steps={steps}", ("strang_run", (u2, vh2, kin2, steps))
    cxs2 = 0.2 * rand((2, n, n))
    mxis2 = rand((2, n, n))
    yield f"rk4_run    2d n={n}^2 steps={steps} P=2", ("rk4_run", (u2, cxs2, mxis2, 1e-3, steps))


def run_kernel(mod, kind, args):
    if kind == "multiplier_loop":
        u, m, steps = args
        def loop():
            v = u
            for _ in range(steps):
                v = mod.multiplier_apply(v, m)
        return timeit(loop)
    return timeit(getattr(mod, kind), *args)


def main():
    if _core is None:
        print("compiled core not available; nothing to compare")
        return
    print(f"{'case':44s} {'compiled':>10s} {'fallback':>10s} {'speedup':>8s}")
    for label, (kind, args) in cases():
        tc = run_kernel(_core, kind, args)
        tf = run_kernel(fallback, kind, args)
        print(f"{label:44s} {tc * 1e3:9.2f}ms {tf * 1e3:9.2f}ms {tf / tc:7.2f}x")
    # parity spot check
    rng = np.random.default_rng(1)
    u = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    m = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    err = np.abs(_core.multiplier_apply(u, m) - fallback.multiplier_apply(u, m)).max()
    print(f"\nbackend parity (multiplier, n=256): max abs diff {err:.2e}")


if __name__ == "__main__":
    main()
