"""Per-episode logs, running statistics and their CSV form."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WINDOW = 50
STABILITY_START = 500
STABILITY_END = 800
MIN_STABILITY_EPISODES = 550

RUN_HEADER = ["episode", "return", "steps", "mean_loss", "epsilon"]
AGGREGATE_HEADER = ["episode", "mean_running_return", "std_running_return", "n_seeds"]
SUMMARY_HEADER = ["variant", "final_running_mean", "auc", "stability", "n_seeds"]


def fmt(x) -> str:
    """Round-trippable text for a real (17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def running_mean(series, window: int = WINDOW) -> np.ndarray:
    """Trailing mean with a growing window over the first ``window - 1`` points."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("running mean of an empty series")
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(x)])
    t = np.arange(1, x.size + 1)
    lo = np.maximum(0, t - window)
    return (csum[t] - csum[lo]) / (t - lo)


def running_std(series, window: int = WINDOW) -> np.ndarray:
    """Trailing sample standard deviation, same windows as :func:`running_mean`.

    A window holding a single point has std 0.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("running std of an empty series")
    out = np.zeros(x.size)
    for t in range(x.size):
        w = x[max(0, t - window + 1):t + 1]
        out[t] = w.std(ddof=1) if w.size > 1 else 0.0
    return out


def stability(returns, window: int = WINDOW, start: int = STABILITY_START, end: int = STABILITY_END) -> float:
    """Mean rolling std of episode returns over episodes ``start``..``end`` (1-based, inclusive)."""
    x = np.asarray(returns, dtype=float)
    if x.size < MIN_STABILITY_EPISODES:
        raise ValueError(f"stability needs at least {MIN_STABILITY_EPISODES} episodes, got {x.size}")
    return float(running_std(x, window)[start - 1:end].mean())


def auc(curve) -> float:
    """Area under a per-episode curve with unit spacing (sum of values)."""
    return float(np.sum(np.asarray(curve, dtype=float)))


@dataclass
class MetricsLog:
    episodes: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    mean_loss: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)

    def append(self, episode, ret, steps, mean_loss, epsilon) -> None:
        self.episodes.append(int(episode))
        self.returns.append(float(ret))
        self.steps.append(int(steps))
        self.mean_loss.append(float(mean_loss))
        self.epsilon.append(float(epsilon))

    def __len__(self):
        return len(self.episodes)

    def running_mean(self, window: int = WINDOW) -> np.ndarray:
        return running_mean(self.returns, window)

    def running_std(self, window: int = WINDOW) -> np.ndarray:
        return running_std(self.returns, window)

    def stability(self) -> float:
        return stability(self.returns)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(RUN_HEADER) + "\n")
        for row in zip(self.episodes, self.returns, self.steps, self.mean_loss, self.epsilon):
            ep, ret, steps, loss, eps = row
            buf.write(f"{ep},{fmt(ret)},{steps},{fmt(loss)},{fmt(eps)}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.to_csv())
        except OSError as exc:
            raise OSError(f"cannot write metrics to {path}: {exc}") from exc

    @classmethod
    def from_csv(cls, text: str) -> "MetricsLog":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != RUN_HEADER:
            raise ValueError(f"run CSV must start with header {','.join(RUN_HEADER)}")
        log = cls()
        for n, row in enumerate(rows[1:], start=2):
            if len(row) != len(RUN_HEADER):
                raise ValueError(f"line {n}: expected {len(RUN_HEADER)} fields, got {len(row)}")
            log.append(int(row[0]), float(row[1]), int(row[2]), float(row[3]), float(row[4]))
        return log

    @classmethod
    def read_csv(cls, path) -> "MetricsLog":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read metrics from {path}: {exc}") from exc
        return cls.from_csv(text)


def aggregate_curves(curves) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean and sample std (0 for a single curve) over aligned curves."""
    arr = np.asarray(curves, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need a non-empty stack of equal-length curves")
    std = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
    return arr.mean(axis=0), std


def write_rows(path, header, rows) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_rows(path, header) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return [dict(zip(header, r)) for r in rows[1:] if r]
