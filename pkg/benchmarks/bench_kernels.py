"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Reports the best-of-N wall time per call for the reflect-padded blur and
the SMO solver, checks both backends agree, and prints the speedup.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from eclipsekit import _fallback
from eclipsekit.svm import polynomial_kernel
from eclipsekit.tensorops import gaussian_kernel

try:
    from eclipsekit import _kernels
except ImportError:  # extension not built
    _kernels = None


def blur_cases(rng):
    kernel = gaussian_kernel(3, 1.0)
    for side in (16, 32, 224):
        plane = rng.normal(size=(side, side))
        yield f"blur {side}x{side} k=3", (lambda mod, p=plane: mod.convolve2d_reflect(p, kernel))


def smo_cases(rng):
    for n in (120, 360):
        X = np.vstack([rng.normal(0.0, 1.0, (n // 2, 16)), rng.normal(0.4, 1.0, (n // 2, 16))])
        y = np.repeat([-1.0, 1.0], n // 2)
        K = polynomial_kernel(X, X, 3, 1.0 / 16, 1.0)
        yield f"smo n={n} poly3", (lambda mod, K=K, y=y: mod.smo_solve(K, y, 1.0, 1e-3, 1_000_000))


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def agree(a, b) -> bool:
    if isinstance(a, tuple):
        return np.allclose(a[0], b[0], atol=1e-9) and abs(a[1] - b[1]) < 1e-9
    return np.allclose(a, b, atol=1e-12)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(0)
    print(f"{'case':<22}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}  agree")
    for name, call in [*blur_cases(rng), *smo_cases(rng)]:
        t_py = best_time(lambda: call(_fallback), args.repeat)
        t_cy = best_time(lambda: call(_kernels), args.repeat)
        same = agree(call(_fallback), call(_kernels))
        print(f"{name:<22}{1e3 * t_py:>14.3f}{1e3 * t_cy:>14.3f}{t_py / t_cy:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
