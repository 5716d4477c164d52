"""Compare the compiled QP kernel against the numpy lockstep fallback.

Times the batched active-set solve on random problem sets and a full
reconstruction pass on a real mesh, and verifies both backends agree.

Run:  python benchmarks/kernel_benchmark.py
"""

from __future__ import annotations

import time

import numpy as np

from ilrfv import uniform_diagonal_mesh
from ilrfv._kernels import _fallback
from ilrfv.bench import double_sine, project
from ilrfv.reconstruction import ILR, _assemble

try:
    from ilrfv._kernels import _core
except ImportError:
    _core = None


def random_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, 2, 2))
    G = B @ B.transpose(0, 2, 1) + 0.05 * np.eye(2)
    c = rng.normal(size=(n, 2))
    A = rng.normal(size=(n, 4, 2))
    lower = -np.abs(rng.normal(size=(n, 4)))
    upper = np.abs(rng.normal(size=(n, 4)))
    return G, c, A, lower, upper


def timeit(fn, *args, repeats=5):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    backends = [("python", _fallback)]
    if _core is not None:
        backends.append(("cython", _core))
    else:
        print("compiled core not available; timing the fallback only")

    print(f"{'batch':>10} " + "".join(f"{name + ' us/qp':>16}" for name, _ in backends)
          + f"{'speedup':>10}")
    for n in (1_000, 10_000, 100_000):
        args = random_batch(n)
        times = []
        results = []
        for _, mod in backends:
            t, out = timeit(mod.solve_qp_batch, *args)
            times.append(t)
            results.append(out)
        if len(results) == 2:
            if not np.array_equal(results[0][0], results[1][0]):
                raise AssertionError("backends disagree on gradients")
            speed = f"{times[0] / times[1]:9.1f}x"
        else:
            speed = "-"
        cols = "".join(f"{t / n * 1e6:16.3f}" for t in times)
        print(f"{n:>10} {cols}{speed:>10}")

    # End-to-end: one QP-limited reconstruction pass on a 64x64x2 mesh.
    mesh = uniform_diagonal_mesh(64, 64, periodic=True)
    u = project(mesh, double_sine)
    ws, c, lower, upper = _assemble(mesh, u)
    print(f"\nreconstruction kernel pass on {mesh.num_cells} cells:")
    for name, mod in backends:
        t, _ = timeit(mod.solve_qp_batch, ws.G, c, ws.A, lower, upper)
        print(f"  {name:8s} {t * 1e3:8.3f} ms")


if __name__ == "__main__":
    main()
