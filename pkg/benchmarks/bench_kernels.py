"""Compiled (numba) versus pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--sweeps 200]

Times one operator evaluation and a fixed number of damped sweeps on a few
catalog problems with both backends, and checks the results agree exactly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hjflux import catalog, kernels
from hjflux.solver import _time_step, discretize, initial_field

CASES = (("shifted_quadratic", 400), ("plateau", 400), ("disk_quadratic", 64), ("ellipse_sqrt_norm", 64))


TENT = {"kind": "tent", "params": {"scale": 1.0}}


def _spec(name: str, n: int):
    probs = catalog.problems()
    if name == "plateau":
        return probs["shifted_quadratic"].replace(hamiltonian=catalog.hamiltonian("plateau_table"), n=n,
                                                  init=TENT, name=name)
    return probs[name].replace(n=n)


def _best(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeat: int, sweeps: int):
    backends = ["numpy"] + (["numba"] if "numba" in kernels.AVAILABLE else [])
    print(f"{'problem':<20}{'nodes':>7}  {'backend':<7}{'operator':>12}{'sweep':>12}{'speedup':>9}")
    for name, n in CASES:
        disc = discretize(_spec(name, n))
        u0 = initial_field(disc.spec.init, disc.spec.domain, disc.grid.positions)
        dt, _, _ = _time_step(disc, u0, disc.spec.cfl)
        out, times = {}, {}
        for b in backends:
            kernels.operator_values(disc.data, u0, backend=b)  # compile / warm up
            t_op = _best(lambda: kernels.operator_values(disc.data, u0, backend=b), repeat)
            kernels.stationary_loop(disc.data, u0.copy(), dt, 0.0, 1, backend=b)
            u = u0.copy()
            t0 = time.perf_counter()
            its = kernels.stationary_loop(disc.data, u, dt, 0.0, sweeps, backend=b)[0]
            t_sw = (time.perf_counter() - t0) / its
            out[b], times[b] = u, (t_op, t_sw)
        base = times["numpy"][1]
        for b in backends:
            t_op, t_sw = times[b]
            print(f"{name:<20}{disc.grid.size:>7}  {b:<7}{t_op * 1e6:>10.1f}us{t_sw * 1e6:>10.1f}us{base / t_sw:>8.1f}x")
        if len(backends) == 2:
            diff = float(np.max(np.abs(out["numpy"] - out["numba"])))
            print(f"{'':<20}{'':>7}  max |numba - numpy| after {sweeps} sweeps: {diff:.1e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sweeps", type=int, default=200)
    args = ap.parse_args()
    bench(args.repeat, args.sweeps)


if __name__ == "__main__":
    main()
