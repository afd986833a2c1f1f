#!/usr/bin/env python3
"""Benchmark the compiled right-hand-side kernel against the NumPy one.

Times raw kernel evaluations and a full stiff integration of the
bundled three-stage oscillator with each backend, and prints the
speedups.  Run directly: ``python benchmarks/bench_rhs.py``.
"""

import time

import numpy as np

from deasim import SolverConfig, assemble, example_path, integrate, load_model
from deasim.dynamics import DEFAULT_BACKEND


def time_rhs(kernel, y, calls=20000):
    t0 = time.perf_counter()
    for _ in range(calls):
        kernel(0.0, y)
    return (time.perf_counter() - t0) / calls


def time_integrate(system, backend, t_end=20.0):
    config = SolverConfig(t_end=t_end)
    t0 = time.perf_counter()
    trace = integrate(system, config, backend=backend)
    return time.perf_counter() - t0, trace


def main():
    model = load_model(example_path("trevor.net").read_text(), "trevor.net")
    system = assemble(model)
    rng = np.random.default_rng(7)
    y = np.concatenate(
        (rng.uniform(0.0, 1.2e-6, system.nc), rng.uniform(0.0, 0.2, system.nc))
    )

    backends = ["python"]
    if DEFAULT_BACKEND == "cython":
        backends.append("cython")
    else:
        print("compiled kernel not built; benchmarking the NumPy kernel only")

    rhs_times = {}
    for name in backends:
        kernel = system.kernel(name)
        kernel(0.0, y)  # warm up
        rhs_times[name] = time_rhs(kernel, y)
        print(f"rhs {name:7s}: {rhs_times[name] * 1e6:8.2f} us/call")
    if len(backends) == 2:
        print(f"rhs speedup: {rhs_times['python'] / rhs_times['cython']:.1f}x")

    print()
    walls = {}
    for name in backends:
        walls[name], trace = time_integrate(system, name)
        print(
            f"integrate {name:7s}: {walls[name]:6.2f} s wall "
            f"({trace.accepted_t.size} accepted steps, 20 s simulated)"
        )
    if len(backends) == 2:
        print(f"integrate speedup: {walls['python'] / walls['cython']:.1f}x")


if __name__ == "__main__":
    main()
