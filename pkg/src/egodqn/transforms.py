"""Agent-centered views of a one-hot global state.

All functions are pure and work on ``(channels, rows, cols)`` arrays with
the channel layout produced by :func:`egodqn.env.observe`. Centering drops
the agent channel, so centered, local and summary views carry two channels:
fruits then walls.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

SUMMARY_DECAY = 0.9
LOCAL_SIZE = 3


class CenterMode(str, Enum):
    ROLL = "roll"
    PAD = "pad"


@dataclass(frozen=True)
class CenteredState:
    data: np.ndarray
    mode: CenterMode

    @property
    def center(self) -> int:
        return (self.data.shape[-1] - 1) // 2


def roll(plane: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Circular shift: ``out[r, c] = plane[(r - dr) % H, (c - dc) % W]``."""
    return np.roll(plane, (dr, dc), axis=(-2, -1))


def _check_agent(g: np.ndarray, agent) -> tuple[int, int]:
    row, col = int(agent[0]), int(agent[1])
    h, w = g.shape[-2:]
    if not (0 <= row < h and 0 <= col < w) or g[0, row, col] != 1.0:
        raise ValueError(f"agent channel has no 1 at {(row, col)}")
    return row, col


def center_roll(g: np.ndarray, agent) -> CenteredState:
    """Roll the fruit and wall channels so the agent lands on the center cell."""
    row, col = _check_agent(g, agent)
    center = (g.shape[-1] - 1) // 2
    return CenteredState(roll(g[1:], center - row, center - col), CenterMode.ROLL)


def center_pad(g: np.ndarray, agent) -> CenteredState:
    """Window of the fruit and wall channels around the agent, zero outside the grid."""
    row, col = _check_agent(g, agent)
    _, h, w = g.shape
    center = (w - 1) // 2
    dr, dc = row - center, col - center
    out = np.zeros((g.shape[0] - 1, h, w))
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    out[:, r0:r1, c0:c1] = g[1:, r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    return CenteredState(out, CenterMode.PAD)


def extract_local(c: CenteredState, size: int = LOCAL_SIZE) -> np.ndarray:
    if c.mode is not CenterMode.PAD:
        raise ValueError("the local view is defined on pad-centered states")
    lo = c.center - size // 2
    return c.data[:, lo:lo + size, lo:lo + size].copy()


@lru_cache(maxsize=None)
def _ring_layout(k: int):
    """Ring cells of a k x k plane in circular order, and where each deposits.

    Returns (rows, cols, deposit) where ``deposit`` maps ring positions onto
    the flattened (k-2) x (k-2) block that remains after the collapse.
    """
    last = k - 1
    cells = [(0, c) for c in range(last)]
    cells += [(r, last) for r in range(last)]
    cells += [(last, c) for c in range(last, 0, -1)]
    cells += [(r, 0) for r in range(last, 0, -1)]
    rows = np.array([r for r, _ in cells])
    cols = np.array([c for _, c in cells])

    def inward(x):
        # one step toward the center along each coordinate on the outer frame
        return np.where(x == 0, 1, np.where(x == last, last - 1, x)) - 1

    deposit = np.zeros((len(cells), (k - 2) ** 2))
    deposit[np.arange(len(cells)), inward(rows) * (k - 2) + inward(cols)] = 1.0
    return rows, cols, deposit


def collapse_ring(plane: np.ndarray, decay: float = SUMMARY_DECAY) -> np.ndarray:
    """Fold the outermost ring of a square plane onto the next ring inward.

    Ring values are scaled by ``decay``, smoothed with a 3-point circular
    mean along the ring, then added to the cell one layer in (edge cells
    move straight in, corners move diagonally). Accepts extra leading axes.
    """
    k = plane.shape[-1]
    if plane.shape[-2] != k or k < 3 or k % 2 == 0:
        raise ValueError(f"collapse_ring needs an odd square plane with side >= 3, got {plane.shape[-2:]}")
    rows, cols, deposit = _ring_layout(k)
    v = decay * plane[..., rows, cols]
    m = (np.roll(v, 1, axis=-1) + v + np.roll(v, -1, axis=-1)) / 3.0
    inner = plane[..., 1:-1, 1:-1]
    return inner + (m @ deposit).reshape(inner.shape)


def summarize(c: CenteredState, target: int, decay: float = SUMMARY_DECAY) -> np.ndarray:
    """Collapse rings of a pad-centered state until a ``target`` x ``target`` view remains."""
    if target not in (3, 5):
        raise ValueError(f"summary size must be 3 or 5, got {target}")
    if c.mode is not CenterMode.PAD:
        raise ValueError("summaries are defined on pad-centered states")
    out = c.data
    while out.shape[-1] > target:
        out = collapse_ring(out, decay)
    return out
