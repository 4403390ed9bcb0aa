"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times the two hot paths on representative workloads: piecewise-constant
propagator chains (3-level and two-qutrit) and the GRAPE value/gradient
pass (100 segments, 4 controls).  Run with

    python benchmarks/bench_backends.py

Set HFORGE_BACKEND=numpy to check what the fallback costs end to end.
"""

import time

import numpy as np

from hforge import _kernels


def _random_hermitians(rng, n, d):
    a = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    return np.ascontiguousarray((a + a.conj().transpose(0, 2, 1)) / 2)


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    rng = np.random.default_rng(0)
    rows = []

    for d, n, label in [(3, 6400, "chain 3-level x6400"), (9, 2000, "chain 9-dim x2000")]:
        hs = _random_hermitians(rng, n, d)
        dts = np.full(n, 0.01)
        t_np = timeit(_kernels.NUMPY_KERNELS["chain_propagate"], hs, dts)
        rows.append((label, "numpy", t_np))
        if _kernels.NUMBA_KERNELS is not None:
            t_nb = timeit(_kernels.NUMBA_KERNELS["chain_propagate"], hs, dts)
            rows.append((label, "numba", t_nb))

    d, nseg, nctrl = 3, 100, 4
    h_static = _random_hermitians(rng, 1, d)[0]
    ctrls = _random_hermitians(rng, nctrl, d)
    w = 0.01 * rng.normal(size=(nseg, nctrl))
    u_t = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))[0]
    p0 = np.diag([1.0, 1.0, 0.0]).astype(complex)
    args = (h_static, ctrls, w, 4.0, u_t, p0, 1e-6, 1.0, 2.0)
    label = "grape value+grad (N=100, K=4)"
    t_np = timeit(_kernels.NUMPY_KERNELS["grape_value_grad"], *args, repeats=20)
    rows.append((label, "numpy", t_np))
    if _kernels.NUMBA_KERNELS is not None:
        t_nb = timeit(_kernels.NUMBA_KERNELS["grape_value_grad"], *args, repeats=20)
        rows.append((label, "numba", t_nb))

    print(f"active backend: {_kernels.BACKEND}\n")
    print(f"{'workload':36s} {'backend':8s} {'time':>12s}")
    by_label = {}
    for label, backend, t in rows:
        print(f"{label:36s} {backend:8s} {t * 1e3:9.2f} ms")
        by_label.setdefault(label, {})[backend] = t
    print()
    for label, times in by_label.items():
        if "numba" in times and "numpy" in times:
            print(f"{label:36s} speedup x{times['numpy'] / times['numba']:.1f}")


if __name__ == "__main__":
    main()
