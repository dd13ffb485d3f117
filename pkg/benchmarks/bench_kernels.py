"""Compare the compiled convolution kernels with the numpy fallback.

Times im2col/col2im on the shapes a training step actually uses, then a
full agent training step (batched forward, backward, Adam) with each
backend swapped in.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from egodqn.agent import AgentConfig, DqnAgent
from egodqn.nn import kernels

# (batch, H, W, C, kernel, pad): both convs of the 11x11 global stack, batch 32
SHAPES = [
    (32, 11, 11, 3, 3, 0),
    (32, 9, 9, 12, 3, 0),
    (32, 5, 5, 2, 3, 1),
]


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, h, w, c, k, pad in SHAPES:
        x = rng.standard_normal((n, h, w, c)).astype(np.float32)
        cols = kernels.fallback.im2col(x, k, pad)
        for name, backend in (("python", kernels.fallback), ("cython", kernels.compiled)):
            if backend is None:
                continue
            t_fwd = _best(lambda: backend.im2col(x, k, pad), repeat)
            t_bwd = _best(lambda: backend.col2im(cols, x.shape, k, pad), repeat)
            rows.append((f"{n}x{h}x{w}x{c} k{k} p{pad}", name, t_fwd, t_bwd))
    return rows


def bench_train_step(repeat):
    out = {}
    for name, backend in (("python", kernels.fallback), ("cython", kernels.compiled)):
        if backend is None:
            continue
        saved = kernels.im2col, kernels.col2im
        kernels.im2col, kernels.col2im = backend.im2col, backend.col2im
        try:
            agent = DqnAgent(AgentConfig(variant="integrated-pad", seed=0, global_buffer=64, local_buffer=64))
            agent.prefill()
            out[name] = _best(agent.train_step, repeat)
        finally:
            kernels.im2col, kernels.col2im = saved
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'shape':22s} {'backend':8s} {'im2col us':>10s} {'col2im us':>10s}")
    for shape, name, f, b in bench_kernels(args.repeat):
        print(f"{shape:22s} {name:8s} {f * 1e6:10.1f} {b * 1e6:10.1f}")
    steps = bench_train_step(args.repeat)
    for name, t in steps.items():
        print(f"train_step (integrated-pad, batch 32) {name:8s} {t * 1e3:8.3f} ms")
    if len(steps) == 2:
        print(f"speedup: {steps['python'] / steps['cython']:.2f}x")


if __name__ == "__main__":
    main()
