"""Compiled (numba) kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

The two in-process kernels are timed directly.  The Volterra sweep is timed
through ``scalar_rs`` in two subprocesses, one with CTM_DISABLE_NUMBA=1,
because the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from ctmkit import _kernels


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def bench_inprocess(repeat):
    rng = np.random.default_rng(0)
    n = 1 << 16
    a = rng.normal(size=n).astype(complex)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    c = np.conj(b)
    p1 = rng.normal(size=n) + 1j * rng.normal(size=n)
    p2 = rng.normal(size=n) + 1j * rng.normal(size=n)
    q = -np.cumsum(rng.uniform(0.5, 5.0, 8))
    kg = np.linspace(q.min() - 1, q.max() + 1, 200001)
    rows = []
    for name, args in (("expm2_apply", (p1, p2, a, b, c, 0.01)), ("product_scan", (q, kg))):
        fast = getattr(_kernels, name)
        slow = _kernels.numpy_impl[name]
        rows.append((name, best_of(lambda: fast(*args), repeat), best_of(lambda: slow(*args), repeat)))
    return rows


_SNIPPET = """
import time, numpy as np
from ctmkit.potentials import ScalarPotentialSpec
from ctmkit.spectral import scalar_rs
k = np.linspace(0.01, 20, 400)
scalar_rs(ScalarPotentialSpec.gaussian(-1.5), k[:4])
t0 = time.perf_counter()
for _ in range({repeat}):
    scalar_rs(ScalarPotentialSpec.gaussian(-1.5), k)
print((time.perf_counter() - t0) / {repeat})
"""


def bench_volterra(repeat):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, CTM_DISABLE_NUMBA=flag)
        r = subprocess.run([sys.executable, "-c", _SNIPPET.format(repeat=repeat)], env=env,
                           capture_output=True, text=True, check=True)
        out[label] = float(r.stdout.strip().splitlines()[-1])
    return ("volterra_sweep (via scalar_rs)", out["numba"], out["numpy"])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"backend in this process: {_kernels.backend()}")
    rows = bench_inprocess(args.repeat) + [bench_volterra(args.repeat)]
    print(f"{'kernel':34s} {'compiled [ms]':>14s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, tf, ts in rows:
        print(f"{name:34s} {1e3 * tf:14.3f} {1e3 * ts:12.3f} {ts / tf:9.1f}x")


if __name__ == "__main__":
    main()
