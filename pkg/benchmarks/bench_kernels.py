"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n-x 32] [--n-v 16] [--repeat 20]

Prints per-call times of both kernels and of one full solver step for each
backend.  The solver step is timed in a subprocess so that the backend
selection at import takes effect.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vpfp import kernels

STEP_SNIPPET = """
import timeit
from vpfp.equilibrium import cosine_density, solve_poisson_boltzmann
from vpfp.phase_space import Discretization, InitialDataSpec, make_initial_data
from vpfp.solver import Propagator, SolverConfig
from vpfp import kernels
n_x, n_v, rep = {n_x}, {n_v}, {repeat}
eq = solve_poisson_boltzmann(cosine_density(n_x, 0.3), 10.0)
disc = Discretization(n_x, n_v, True)
h0 = make_initial_data(InitialDataSpec(seed=0), disc, eq)
p = Propagator(disc, eq, SolverConfig(tau=0.5, delta=10.0, mode="nonlinear"))
hh = p.to_hat(h0)
p.step(hh, 0.0, 1e-3)
t = min(timeit.repeat(lambda: p.step(hh, 0.0, 1e-3), number=1, repeat=rep))
print(kernels.BACKEND, t)
"""


def time_call(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-x", type=int, default=32)
    ap.add_argument("--n-v", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    n, nv = args.n_x, args.n_v
    rng = np.random.default_rng(0)
    hk = rng.standard_normal((nv, nv, n, n // 2 + 1)) + 1j * rng.standard_normal(
        (nv, nv, n, n // 2 + 1))
    k1, k2 = rng.standard_normal(n), rng.standard_normal(n // 2 + 1)
    m = 3 * n // 2
    hg = rng.standard_normal((nv, nv, m, m))
    fields = [rng.standard_normal((m, m)) for _ in range(4)]
    out_k, out_g = np.empty_like(hk), np.empty_like(hg)

    rows = [
        ("stream_axpy", lambda: kernels.stream_axpy_py(hk, k1, k2, hk, 0.1, out_k),
         lambda: kernels.stream_axpy(hk, k1, k2, hk, 0.1, out_k)),
        ("ladder_mix", lambda: kernels.ladder_mix_py(hg, *fields, out_g),
         lambda: kernels.ladder_mix(hg, *fields, out_g)),
    ]
    print(f"n_x={n} n_v={nv} active backend: {kernels.BACKEND}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{kernels.BACKEND + ' [ms]':>14}{'speedup':>10}")
    for name, py, ext in rows:
        a, b = time_call(py, args.repeat), time_call(ext, args.repeat)
        print(f"{name:<14}{1e3 * a:>12.3f}{1e3 * b:>14.3f}{a / b:>10.2f}")

    snippet = STEP_SNIPPET.format(n_x=n, n_v=nv, repeat=max(3, args.repeat // 4))
    res = {}
    for flag in ("1", "0"):
        env = dict(os.environ, VPFP_PURE_PYTHON=flag)
        r = subprocess.run([sys.executable, "-c", snippet], env=env, capture_output=True,
                           text=True, check=True)
        backend, t = r.stdout.split()
        res[backend] = float(t)
    for backend, t in res.items():
        print(f"solver step ({backend}): {1e3 * t:.2f} ms")
    if len(res) == 2:
        print(f"step speedup: {res['python'] / res['cython']:.2f}")


if __name__ == "__main__":
    main()
