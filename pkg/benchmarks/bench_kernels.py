"""Compare the compiled theta kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. The kernel table times
both implementations directly on the same inputs (and checks that they
agree); the end-to-end rows time one averaged Lax stack in a subprocess
per backend, selected through DELLSYS_BACKEND.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dellsys import _pykernels

try:
    from dellsys import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

TAU = 0.8j
K_JACOBI = 6
K_NOME = 8


def _inputs(size: int, rng):
    z = rng.uniform(-0.5, 0.5, size) + 1j * rng.uniform(-0.3, 0.3, size)
    x = np.exp(2j * np.pi * z)
    return z.astype(complex), x.astype(complex)


def _cases(size, rng):
    z, x = _inputs(size, rng)
    p = np.exp(2j * np.pi * TAU)
    return {
        "jtheta": lambda k: k.jtheta(z, TAU, K_JACOBI),
        "jtheta_d": lambda k: k.jtheta_d(z, TAU, K_JACOBI + 1),
        "theta_char": lambda k: k.theta_char(0.25, 0.5, z, 2 * TAU, K_JACOBI + 2),
        "theta_nome": lambda k: k.theta_nome(x, p, K_NOME),
    }


def _best(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def kernel_table(sizes, number):
    rng = np.random.default_rng(0)
    rows = []
    for size in sizes:
        for name, call in _cases(size, rng).items():
            t_py = _best(lambda: call(_pykernels), number)
            if _ckernels is None:
                rows.append((name, size, t_py, float("nan"), float("nan"), float("nan")))
                continue
            t_c = _best(lambda: call(_ckernels), number)
            a, b = call(_pykernels), call(_ckernels)
            diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
            rows.append((name, size, t_py, t_c, t_py / t_c, diff))
    return rows


_E2E = r"""
import time, numpy as np
from dellsys import BACKEND
from dellsys.lax import ModelParams, PhaseState, rs_lax_stack
from dellsys.intertwiner import Positions
st = PhaseState(Positions([0.31, -0.12 + 0.02j, -0.2]), [0.1, -0.2, 0.05])
pr = ModelParams(omega=0.1)
rs_lax_stack(0.23 + 0.11j, st, pr)
n = 200
t = time.perf_counter()
for _ in range(n):
    rs_lax_stack(0.23 + 0.11j, st, pr)
print(BACKEND, (time.perf_counter() - t) / n)
"""


def end_to_end():
    out = []
    for backend in ("python", "cython"):
        env = dict(os.environ, DELLSYS_BACKEND=backend)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        out.append((backend, name, float(secs)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1,16,256,4096")
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'kernel':<11} {'size':>6} {'numpy [us]':>11} {'cython [us]':>12} {'speedup':>8} {'rel diff':>9}")
    for name, size, tp, tc, sp, diff in kernel_table(sizes, args.number):
        print(f"{name:<11} {size:>6} {tp * 1e6:>11.2f} {tc * 1e6:>12.2f} {sp:>8.2f} {diff:>9.1e}")
    if not args.skip_e2e:
        print()
        print("averaged Lax stack, N=3, M=6 (one call)")
        for requested, active, secs in end_to_end():
            print(f"  DELLSYS_BACKEND={requested:<7} active={active:<7} {secs * 1e3:8.3f} ms")


if __name__ == "__main__":
    main()
