"""Finite-difference checks of analytic gradients."""
from __future__ import annotations

import numpy as np

REL_FLOOR = 1e-6


def relative_error(analytic, numeric, floor: float = REL_FLOOR):
    """|a - n| / max(|a|, |n|, floor), elementwise.

    The floor keeps gradients that are zero up to rounding from reporting
    huge relative errors.
    """
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def gradient_check(net, inputs, eps: float = 1e-4, n_samples: int = 200, seed: int = 0) -> float:
    """Max relative error between backprop and central differences.

    The scalar checked is ``sum(R * net(inputs))`` for a fixed random ``R``.
    Up to ``n_samples`` entries are drawn per parameter tensor; input
    gradients are checked as well.
    """
    rng = np.random.default_rng(seed)
    inputs = [np.array(x, dtype=float) for x in inputs]
    out = net.forward(*inputs)
    r = rng.standard_normal(out.shape)

    def scalar():
        return float(np.sum(r * net.forward(*inputs)))

    net.forward(*inputs)
    net.zero_grad()
    input_grads = net.backward(r, input_grads=True)
    worst = 0.0

    def probe(array, grad):
        nonlocal worst
        flat = array.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > n_samples:
            idx = rng.choice(flat.size, size=n_samples, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + eps
            up = scalar()
            flat[i] = old - eps
            down = scalar()
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            worst = max(worst, float(relative_error(gflat[i], numeric)))

    for _, p, g in net.named_parameters():
        probe(p, g.copy())
    for x, gx in zip(inputs, input_grads):
        probe(x, gx.copy())
    return worst


def layer_gradient_check(layer, x, eps: float = 1e-4, seed: int = 0) -> float:
    """Same check for a single layer on input batch ``x`` (all entries probed)."""
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=float)
    r = rng.standard_normal(layer.forward(x).shape)
    layer.zero_grad()
    layer.forward(x)
    gx = layer.backward(r)
    worst = 0.0

    def scalar():
        return float(np.sum(r * layer.forward(x)))

    targets = [(p, layer.grads[k].copy()) for k, p in layer.params.items()] + [(x, gx.copy())]
    for array, grad in targets:
        flat, gflat = array.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = scalar()
            flat[i] = old - eps
            down = scalar()
            flat[i] = old
            worst = max(worst, float(relative_error(gflat[i], (up - down) / (2 * eps))))
    return worst
