"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--width 4096] [--m 8] [--d 3] [--repeat 5]

Both backends are checked for bit-identical output before timing.
"""
import argparse
import timeit

import numpy as np

from relugd import _kernels_py
from relugd._backend import compiled_kernels


def cases(width, m, d, seed=0):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((width, d))
    B = 0.1 * rng.standard_normal(width)
    X = rng.standard_normal((m, d))
    Wout = rng.standard_normal(width) / np.sqrt(width)
    Z = _kernels_py.preactivations(W, B, X)
    resid = rng.standard_normal(m)
    W1 = W + 1e-3 * rng.standard_normal(W.shape)
    B1 = B + 1e-3 * rng.standard_normal(width)
    A = rng.standard_normal((m, m))
    A = A + A.T
    return {
        "preactivations": lambda k: k.preactivations(W, B, X),
        "forward": lambda k: k.forward(Z, Wout, 0.1),
        "gradient": lambda k: k.gradient(Z, Wout, resid, X),
        "gram": lambda k: k.gram(Z, Wout),
        "drifts": lambda k: k.drifts(W1, W, B1, B, 1.0),
        "jacobi_eigenvalues": lambda k: k.jacobi_eigenvalues(A),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--width", type=int, default=4096)
    parser.add_argument("--m", type=int, default=8)
    parser.add_argument("--d", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    compiled = compiled_kernels()
    backends = [("python", _kernels_py)]
    if compiled is None:
        print("compiled kernels not built; timing the fallback only")
    else:
        backends.insert(0, ("cython", compiled))

    print(f"width={args.width} m={args.m} d={args.d}; best of {args.repeat}, microseconds per call")
    print(f"{'kernel':<20}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.width, args.m, args.d).items():
        if compiled is not None and not same(fn(compiled), fn(_kernels_py)):
            raise SystemExit(f"{name}: backends disagree")
        times = []
        for _, mod in backends:
            timer = timeit.Timer(lambda: fn(mod))
            number, _ = timer.autorange()
            times.append(min(timer.repeat(args.repeat, number)) / number * 1e6)
        speedup = f"{times[-1] / times[0]:>9.2f}x" if len(times) > 1 else ""
        print(f"{name:<20}" + "".join(f"{t:>12.1f}" for t in times) + speedup)


if __name__ == "__main__":
    main()
