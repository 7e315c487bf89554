"""Time the compiled kernels against the NumPy fallback.

Run: python benchmarks/bench_backends.py
Imports both backends directly, so it works regardless of which one the
package selected at import time.
"""

import time

import numpy as np

from embkit._core import kernels_py

try:
    from embkit._core import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    cases = []

    x200 = rng.standard_normal((200, 128))
    x200 /= np.linalg.norm(x200, axis=1, keepdims=True)
    cases.append(("pairwise_distances 200x128",
                  lambda impl: impl.pairwise_distances(x200)))

    a = rng.standard_normal((2000, 32))
    b = rng.standard_normal((64, 32))
    cases.append(("cross_distances 2000x64 (32d)",
                  lambda impl: impl.cross_distances(a, b)))

    grid = rng.uniform(0.0, 2.0, 200_001)
    cases.append(("log_density 200k points",
                  lambda impl: impl.log_density_unnormalized(grid, 128)))

    nterms = 5000
    ii = rng.integers(0, 200, nterms)
    jj = (ii + 1 + rng.integers(0, 199, nterms)) % 200
    cc = rng.standard_normal(nterms)
    def scatter(impl):
        out = np.zeros_like(x200)
        impl.accumulate_pair_gradients(ii, jj, cc, x200, out)
    cases.append((f"gradient scatter {nterms} terms", scatter))

    header = f"{'kernel':34s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py = bench(call, kernels_py)
        if _ckernels is None:
            print(f"{name:34s} {t_py * 1e3:9.2f}ms {'n/a':>10s} {'n/a':>8s}")
            continue
        t_cy = bench(call, _ckernels)
        print(f"{name:34s} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_py / t_cy:7.1f}x")
    if _ckernels is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
