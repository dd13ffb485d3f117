"""Acceptance criteria 1-9, one PASS/FAIL line each.

Criteria 1-5 need the full sweep (11 variants x 5 seeds x 800 episodes).
They read run CSVs from ``$EGODQN_ACCEPTANCE_DIR`` (default
``results/acceptance`` in the repository) and run whatever is missing,
which takes hours on a single core. Run with ``pytest -s`` to see the
report lines as they are produced; they are also written to
``acceptance.txt`` in the results directory.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from egodqn import env
from egodqn.agent import Variant
from egodqn.harness.report import (
    check_centering,
    check_learning,
    check_reactivity,
    check_stability,
    check_summary,
    markdown,
)
from egodqn.harness.runner import DEFAULT_SEEDS, RunConfig, collect, finalize, run, run_csv_path, sweep
from egodqn.nn.gradcheck import gradient_check, layer_gradient_check
from egodqn.nn.layers import Conv2D, Dense, Flatten, ReLU
from egodqn.nn.network import QNetwork
from egodqn.replay import PRIORITY_FLOOR, PrioritizedBuffer
from egodqn.transforms import center_pad, center_roll, collapse_ring, roll, summarize

from test_transforms import oracle_summary

REPO = Path(__file__).resolve().parents[1]
RESULTS = Path(os.environ.get("EGODQN_ACCEPTANCE_DIR", REPO / "results" / "acceptance"))
LINES = []


def report(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({name}): {detail}"
    LINES.append(line)
    print(line)
    return passed


@pytest.fixture(scope="session", autouse=True)
def write_lines():
    yield
    if LINES and RESULTS.exists():
        (RESULTS / "acceptance.txt").write_text("\n".join(sorted(LINES, key=_order)) + "\n", encoding="utf-8")


def _order(line):
    return int(line.split("criterion ")[1].split(" ")[0])


@pytest.fixture(scope="module")
def sweep_report():
    seeds = list(DEFAULT_SEEDS)
    missing = [(v, s) for v in Variant for s in seeds if not run_csv_path(RESULTS, v, s).exists()]
    if missing:
        sweep(list(Variant), seeds, {}, out=RESULTS, skip_existing=True)
    rep = collect(RESULTS, list(Variant), seeds)
    finalize(RESULTS, rep)
    (RESULTS / "report.md").write_text(markdown(rep), encoding="utf-8")
    return rep


# ---------------------------------------------------------------- 1-5: full sweep

@pytest.mark.slow
def test_criterion_1_learning(sweep_report):
    c = check_learning(sweep_report)
    assert report(1, "learning", c.passed, c.detail), c.detail


@pytest.mark.slow
def test_criterion_2_centering(sweep_report):
    c = check_centering(sweep_report)
    assert report(2, "centering advantage", c.passed, c.detail), c.detail


@pytest.mark.slow
def test_criterion_3_stability(sweep_report):
    c = check_stability(sweep_report)
    assert report(3, "stability ordering", c.passed, c.detail), c.detail


@pytest.mark.slow
def test_criterion_4_summary(sweep_report):
    c = check_summary(sweep_report)
    assert report(4, "summary ordering", c.passed, c.detail), c.detail


@pytest.mark.slow
def test_criterion_5_reactivity(sweep_report):
    c = check_reactivity(sweep_report)
    assert report(5, "early reactivity", c.passed, c.detail), c.detail


# ---------------------------------------------------------------- 6: gradients

def test_criterion_6_gradients():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    errors = {}
    cases = [
        ("conv valid", Conv2D(3, 4, 3, "valid"), rng.standard_normal((2, 6, 6, 3))),
        ("conv same", Conv2D(2, 3, 3, "same"), rng.standard_normal((2, 5, 5, 2))),
        ("conv 2x2", Conv2D(2, 6, 2, "valid"), rng.standard_normal((2, 3, 3, 2))),
        ("dense", Dense(8, 5), rng.standard_normal((3, 8))),
        ("relu", ReLU(), np.sign(z := rng.standard_normal((3, 8))) * (0.1 + np.abs(z))),
        ("flatten", Flatten(), rng.standard_normal((2, 3, 3, 2))),
    ]
    for name, layer, x in cases:
        layer.init_params(rng)
        for p in layer.params.values():
            p += 0.1 * rng.standard_normal(p.shape)
        errors[name] = layer_gradient_check(layer, x)
    lin = QNetwork([(6,)], [[Dense(6, 5, init="lecun")]], [Dense(5, 4, init="lecun")], seed=1)
    smooth = gradient_check(lin, [rng.standard_normal((3, 6))])
    elapsed = time.perf_counter() - start
    ok = max(errors.values()) <= 1e-4 and smooth <= 1e-6 and errors["dense"] <= 1e-6 and elapsed < 60
    detail = (", ".join(f"{k} {v:.1e}" for k, v in errors.items())
              + f"; linear network {smooth:.1e}; {elapsed:.2f}s")
    assert report(6, "gradient correctness", ok, detail), detail


# ---------------------------------------------------------------- 7: transforms

def test_criterion_7_transforms():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    failures = []
    for _ in range(200):
        m = rng.random((11, 11))
        dr, dc = (int(v) for v in rng.integers(-25, 25, size=2))
        if not np.array_equal(roll(roll(m, dr, dc), -dr, -dc), m):
            failures.append("roll bijectivity")
        s = env.reset(int(rng.integers(1 << 40)))
        g = env.observe(s)
        c = center_roll(g, s.agent).data
        if not all(np.array_equal(np.sort(c[i].ravel()), np.sort(g[i + 1].ravel())) for i in range(2)):
            failures.append("roll multiset")
        padded = center_pad(g, s.agent)
        for target in (3, 5):
            if not np.allclose(summarize(padded, target), oracle_summary(padded.data, target), rtol=0, atol=1e-12):
                failures.append(f"summary {target} vs oracle")
        k = int(rng.choice([3, 5, 7, 9, 11]))
        plane = rng.random((k, k))
        ring = plane.sum() - plane[1:-1, 1:-1].sum()
        if abs(collapse_ring(plane).sum() - (plane.sum() - 0.1 * ring)) > 1e-12:
            failures.append("ring conservation")
        fruits = frozenset(env.INTERIOR_CELLS[i] for i in rng.choice(81, 5, replace=False)) - {(5, 5)}
        gc = env.observe(env.EnvState(env.GridPos(5, 5), fruits))
        if not np.array_equal(center_pad(gc, (5, 5)).data, center_roll(gc, (5, 5)).data):
            failures.append("pad/roll agreement at center")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    detail = f"200 random states, {len(failures)} violations {sorted(set(failures))}; {elapsed:.2f}s"
    assert report(7, "transform oracles", ok, detail), detail


# ---------------------------------------------------------------- 8: replay

def test_criterion_8_replay():
    start = time.perf_counter()
    buf = PrioritizedBuffer(6, {"x": (1,)}, rng=np.random.default_rng(8))
    for i in range(6):
        buf.push({"x": [i]}, 0, 0.0, {"x": [i]}, False)
    buf.sample(6)
    p = np.array([0.5, 1.0, 2.0, 3.0, 0.25, 4.0])
    buf.update_priorities(np.arange(6), p - PRIORITY_FLOOR)
    draws = 100_000
    counts = np.bincount([buf.sample(1).indices[0] for _ in range(draws)], minlength=6)
    expected = draws * p / p.sum()
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    bound = 5 + 3 * np.sqrt(10)  # 5 dof: mean 5, sd sqrt(10)

    big = PrioritizedBuffer(100, {"x": (1,)}, rng=np.random.default_rng(9))
    guarantee = True
    for step in range(300):
        big.push({"x": [step]}, 0, 0.0, {"x": [step]}, False)
        if len(big) >= 32:
            pending = set(np.flatnonzero(~big.replayed[:len(big)]).tolist())
            batch = big.sample(32)
            oldest = sorted(pending, key=lambda s: big.generation[s])[:32]
            guarantee &= set(oldest) <= set(batch.indices.tolist())
    elapsed = time.perf_counter() - start
    ok = chi2 <= bound and guarantee and elapsed < 120
    detail = f"chi2 {chi2:.2f} <= {bound:.2f} over {draws} draws; forced inclusion held: {guarantee}; {elapsed:.2f}s"
    assert report(8, "replay distribution", ok, detail), detail


# ---------------------------------------------------------------- 9: determinism

def test_criterion_9_determinism(tmp_path):
    csvs = []
    for sub in ("a", "b"):
        cfg = RunConfig(variant=Variant.GLOBALLOCAL_ROLL, seed=9, episodes=5, out=str(tmp_path / sub))
        t = time.perf_counter()
        run(cfg)
        elapsed = time.perf_counter() - t
        csvs.append(run_csv_path(cfg.out, cfg.variant, cfg.seed).read_bytes())
    identical = csvs[0] == csvs[1]
    ok = identical and elapsed < 5.0
    detail = f"byte-identical CSVs: {identical}; 5-episode run (with buffer prefill) {elapsed:.2f}s"
    assert report(9, "determinism", ok, detail), detail
