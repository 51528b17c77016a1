"""Compare the numba and pure-numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20]

Times each kernel on a search-sized activation, checks both backends agree
bit for bit, then times one supernet forward/backward pass under each
backend in a subprocess (the backend is fixed at import time by the
``RNAS_NUMBA`` environment flag).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rnas.kernels import _numba, _numpy

STEP_SCRIPT = """
import time, numpy as np
from rnas.autodiff import Tensor, functional as F
from rnas.supernet import Supernet, SupernetConfig
from rnas.kernels import BACKEND
net = Supernet(SupernetConfig(channels=8, cells=4, nodes=3), seed=0)
rng = np.random.default_rng(0)
x = rng.random((64, 3, 16, 16), dtype=np.float32)
y = rng.integers(0, 10, 64)
best = float("inf")
for _ in range({repeat}):
    t = time.perf_counter()
    net.zero_grad()
    F.cross_entropy(net(Tensor(x)), y).backward()
    best = min(best, time.perf_counter() - t)
print(BACKEND, best)
"""


def bench(fn, repeat):
    fn()  # warm-up (and numba compilation)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((64, 24, 16, 16)).astype(np.float32)
    cols = _numpy.im2col(x, 3, 3, 1, 1)
    pooled, arg = _numpy.maxpool(x, 3, 1, 1)
    cases = {
        "im2col 3x3": lambda m: m.im2col(x, 3, 3, 1, 1),
        "col2im 3x3": lambda m: m.col2im(cols, x.shape, 3, 3, 1, 1),
        "maxpool 3x3": lambda m: m.maxpool(x, 3, 1, 1),
        "maxpool backward": lambda m: m.maxpool_backward(pooled, arg, x.shape),
    }
    rows = []
    for name, call in cases.items():
        a, b = call(_numpy), call(_numba)
        same = all(np.array_equal(u, v) for u, v in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
        t_np = bench(lambda: call(_numpy), repeat)
        t_nb = bench(lambda: call(_numba), repeat)
        rows.append((name, t_np, t_nb, same))
    return rows


def step_time(flag, repeat):
    env = dict(os.environ, RNAS_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", STEP_SCRIPT.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    backend, seconds = out.stdout.split()
    return backend, float(seconds)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--step-repeat", type=int, default=3)
    args = parser.parse_args(argv)
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}  identical")
    for name, t_np, t_nb, same in kernel_table(args.repeat):
        print(f"{name:<18} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>7.2f}x  {same}")
    print()
    print("supernet forward+backward, batch 64, 16x16, 4 cells, 8 channels")
    results = dict(step_time(flag, args.step_repeat) for flag in ("0", "1"))
    for backend, seconds in results.items():
        print(f"  {backend:<6} {seconds:.3f} s")
    if len(results) == 2:
        print(f"  speedup {results['numpy'] / results['numba']:.2f}x")


if __name__ == "__main__":
    main()
