"""Fast numerical self-checks runnable from the CLI (seconds, no training)."""
from __future__ import annotations

import time

import numpy as np

from egodqn import env
from egodqn.nn import kernels
from egodqn.nn.gradcheck import gradient_check, layer_gradient_check
from egodqn.nn.layers import Conv2D, Dense, ReLU
from egodqn.nn.network import QNetwork, build_conv_qnet, build_integrated_qnet
from egodqn.replay import PrioritizedBuffer
from egodqn.transforms import center_pad, center_roll, collapse_ring, roll


def _away_from_zero(z, margin=0.1):
    # finite differences across the ReLU kink are meaningless
    return np.sign(z) * (margin + np.abs(z))


def _check_layers():
    rng = np.random.default_rng(0)
    worst = 0.0
    for layer, x in [
        (Conv2D(2, 3, 3, "valid"), rng.standard_normal((2, 5, 5, 2))),
        (Conv2D(2, 3, 3, "same"), rng.standard_normal((2, 5, 5, 2))),
        (Dense(6, 4), rng.standard_normal((3, 6))),
        (ReLU(), _away_from_zero(rng.standard_normal((3, 7)))),
    ]:
        layer.init_params(rng)
        for p in layer.params.values():
            p += rng.standard_normal(p.shape) * 0.1
        worst = max(worst, layer_gradient_check(layer, x))
    return worst <= 1e-4, f"per-layer max relative error {worst:.2e}"


def _check_networks():
    rng = np.random.default_rng(1)
    net = build_integrated_qnet((2, 11, 11), (2, 3, 3), seed=3)
    for p in net.parameters():
        p += 0.05 * rng.standard_normal(p.shape)
    err = gradient_check(net, [rng.random((2, 2, 11, 11)), rng.random((2, 2, 3, 3))], n_samples=20, eps=1e-6)
    lin = QNetwork([(5,)], [[Dense(5, 6, init="lecun")]], [Dense(6, 4, init="lecun")], seed=4)
    err_lin = gradient_check(lin, [rng.standard_normal((3, 5))])
    ok = err <= 1e-3 and err_lin <= 1e-6
    return ok, f"integrated net {err:.2e}, linear net {err_lin:.2e}"


def _check_transforms():
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(50):
        s = env.reset(int(rng.integers(1 << 30)))
        g = env.observe(s)
        m = rng.random((11, 11))
        a, b = rng.integers(-20, 20, size=2)
        ok &= np.array_equal(roll(roll(m, a, b), -a, -b), m)
        c = center_roll(g, s.agent).data
        ok &= all(np.array_equal(np.sort(c[i].ravel()), np.sort(g[i + 1].ravel())) for i in range(2))
        p = center_pad(g, s.agent).data
        ok &= bool(np.all(p.sum(axis=(1, 2)) <= g[1:].sum(axis=(1, 2))))
        plane = rng.random((7, 7))
        ring = plane.sum() - plane[1:-1, 1:-1].sum()
        ok &= abs(collapse_ring(plane).sum() - (plane.sum() - 0.1 * ring)) <= 1e-12
    g = env.observe(env.EnvState(env.GridPos(5, 5), frozenset({env.GridPos(2, 3)})))
    ok &= np.array_equal(center_pad(g, (5, 5)).data, center_roll(g, (5, 5)).data)
    return bool(ok), "roll bijection, multisets, pad sums, ring conservation"


def _check_replay():
    rng = np.random.default_rng(3)
    buf = PrioritizedBuffer(4, {"x": (1,)}, rng=rng)
    for i in range(4):
        buf.push({"x": [i]}, 0, 0.0, {"x": [i]}, False)
    buf.sample(4)
    p = np.array([1.0, 2.0, 3.0, 4.0])
    buf.priorities[:4] = p
    draws = 20000
    counts = np.bincount([buf.sample(1).indices[0] for _ in range(draws)], minlength=4)
    expected = draws * p / p.sum()
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # chi-square with 3 dof: mean 3, sd sqrt(6)
    ok = chi2 <= 3 + 3 * np.sqrt(6)
    return ok, f"chi2 = {chi2:.2f} over {draws} draws"


def _check_determinism():
    from egodqn.agent import AgentConfig
    from egodqn.harness.runner import train

    cfg = AgentConfig(variant="global-pad", seed=7, episodes=2, global_buffer=200, local_buffer=100)
    a = train(cfg)[0].to_csv()
    b = train(cfg)[0].to_csv()
    net = build_conv_qnet((3, 11, 11), seed=5)
    return a == b and net.layer_param_counts() == [336, 1744, 12560, 68], "identical reruns, parameter counts"


CHECKS = [
    ("layer gradients", _check_layers),
    ("network gradients", _check_networks),
    ("transforms", _check_transforms),
    ("replay distribution", _check_replay),
    ("determinism", _check_determinism),
]


def run_selftest(echo=print) -> bool:
    echo(f"kernel backend: {kernels.BACKEND}")
    all_ok = True
    for name, fn in CHECKS:
        t = time.perf_counter()
        ok, detail = fn()
        all_ok &= bool(ok)
        echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({time.perf_counter() - t:.2f}s)")
    return all_ok
