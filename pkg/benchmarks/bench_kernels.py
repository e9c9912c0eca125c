"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each row reports the best-of-N wall time per call for both backends and the
speedup. Outputs are compared before timing so a fast but wrong kernel shows up.
"""
import argparse
import sys
import timeit

import numpy as np

from moscope.nn import _backend


def cases(rng):
    # shapes follow the frame model on a 2 s clip: 125 frames x 257 bins, K=10
    x = rng.standard_normal((16, 125, 257))
    w = rng.standard_normal((16, 10, 257)) * 0.05
    b = rng.standard_normal(16)
    g = rng.standard_normal((16, 116, 16))
    h = rng.standard_normal((16, 116, 16))
    gp = rng.standard_normal((16, 38, 16))
    ranks_x = rng.integers(0, 50, 2000).astype(np.float64)
    ranks_y = rng.integers(0, 50, 2000).astype(np.float64)
    return [
        ("conv1d_forward", lambda k: k.conv1d_forward(x, w, b)),
        ("conv1d_backward", lambda k: k.conv1d_backward(x, w, g)),
        ("maxpool_forward", lambda k: k.maxpool_forward(h, 3)),
        ("maxpool_backward",
         lambda k: k.maxpool_backward(gp, k.maxpool_forward(h, 3)[1], 3, 116)),
        ("kendall_counts n=2000", lambda k: k.kendall_counts(ranks_x, ranks_y)),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-10)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in _backend.available():
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 1
    ref, fast = _backend.get("python"), _backend.get("compiled")
    print(f"{'kernel':<24}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases(np.random.default_rng(0)):
        if not same(fn(ref), fn(fast)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        times = []
        for k in (ref, fast):
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(k), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat))
            times.append(best / number * 1e3)
        print(f"{name:<24}{times[0]:>12.3f}{times[1]:>14.3f}{times[0] / times[1]:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
