"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--batch 64] [--repeat 5]

Times im2col/col2im, 2x2 max pooling and one full forward/backward pass of
the 28x28 classifier with each backend, and checks that both agree bitwise.
"""

import argparse
import timeit

import numpy as np

from basisguard import _kernels_py, model

try:
    from basisguard import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


KERNELS = ("im2col3x3", "col2im3x3", "maxpool2_forward", "maxpool2_backward")


def forward_backward(kernels, net, x, y):
    saved = {name: getattr(model.kernels, name) for name in KERNELS}
    try:
        for name in saved:
            setattr(model.kernels, name, getattr(kernels, name))
        return net.input_gradient(x, y)
    finally:
        for name, fn in saved.items():
            setattr(model.kernels, name, fn)


def cases(batch):
    rng = np.random.default_rng(0)
    x1 = rng.random((batch, 28, 28, 1))
    x16 = rng.normal(size=(batch, 14, 14, 16))
    d16 = rng.normal(size=(batch * 14 * 14, 9 * 16))
    p16 = rng.normal(size=(batch, 28, 28, 16))
    net = model.Classifier.initialized((28, 28, 1), 10, seed=0)
    y = rng.integers(0, 10, size=batch)
    return {
        "im2col 14x14x16": lambda k: k.im2col3x3(x16),
        "col2im 14x14x16": lambda k: k.col2im3x3(d16, batch, 14, 14, 16),
        "maxpool fwd 28x28x16": lambda k: k.maxpool2_forward(p16)[0],
        "forward+backward": lambda k: forward_backward(k, net, x1, y),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    print(f"{'kernel':24s} {'numpy ms':>10s} {'compiled ms':>12s} {'speedup':>8s}  bitwise")
    for name, fn in cases(args.batch).items():
        same = np.array_equal(fn(_kernels_py), fn(compiled))
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:24s} {t_py:10.2f} {t_c:12.2f} {t_py / t_c:7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
