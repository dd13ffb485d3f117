"""Fruit Collection gridworld.

An 11x11 grid whose outer ring is wall. The agent and five fruits start on
distinct interior cells; walking onto a fruit pays +1 and removes it. The
episode ends when every fruit is gone or after 80 steps.

The environment is written functionally: :func:`reset` builds an
:class:`EnvState` and :func:`step` returns a new one, so states can be kept,
compared and replayed freely. :class:`FruitCollection` wraps the same
functions in the usual mutable ``reset``/``step`` interface.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

GRID_SIZE = 11
N_FRUITS = 5
MAX_STEPS = 80

AGENT_CHANNEL = 0
FRUIT_CHANNEL = 1
WALL_CHANNEL = 2


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


N_ACTIONS = len(Action)

_MOVES = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


class GridPos(NamedTuple):
    row: int
    col: int


class EpisodeFinished(RuntimeError):
    """Raised when stepping a state that has already terminated."""


def is_wall(row: int, col: int, size: int = GRID_SIZE) -> bool:
    return row in (0, size - 1) or col in (0, size - 1)


def _wall_mask(size: int) -> np.ndarray:
    mask = np.zeros((size, size))
    mask[0, :] = mask[-1, :] = 1.0
    mask[:, 0] = mask[:, -1] = 1.0
    mask.setflags(write=False)
    return mask


WALL_MASK = _wall_mask(GRID_SIZE)
INTERIOR_CELLS = tuple(
    GridPos(r, c) for r in range(1, GRID_SIZE - 1) for c in range(1, GRID_SIZE - 1)
)


@dataclass(frozen=True)
class EnvState:
    agent: GridPos
    fruits: frozenset
    step_count: int = 0
    seed: int | None = None

    @property
    def done(self) -> bool:
        return not self.fruits or self.step_count >= MAX_STEPS


def reset(seed: int) -> EnvState:
    """Place the agent and the fruits on distinct interior cells.

    The six cells are drawn uniformly without replacement from the 81
    interior cells using a generator seeded only by ``seed``.
    """
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(INTERIOR_CELLS), size=N_FRUITS + 1, replace=False)
    cells = [INTERIOR_CELLS[i] for i in picks]
    return EnvState(agent=cells[0], fruits=frozenset(cells[1:]), step_count=0, seed=seed)


def step(state: EnvState, action: int) -> tuple[EnvState, float, bool]:
    if state.done:
        raise EpisodeFinished(
            f"episode already finished at step {state.step_count} "
            f"with {len(state.fruits)} fruits left; call reset()"
        )
    dr, dc = _MOVES[Action(action)]
    row, col = state.agent.row + dr, state.agent.col + dc
    agent = state.agent if is_wall(row, col) else GridPos(row, col)

    reward = 0.0
    fruits = state.fruits
    if agent in fruits:
        reward = 1.0
        fruits = fruits - {agent}
    new = replace(state, agent=agent, fruits=fruits, step_count=state.step_count + 1)
    return new, reward, new.done


def observe(state: EnvState) -> np.ndarray:
    """One-hot (agent, fruits, walls) rendering of shape (3, 11, 11)."""
    obs = np.zeros((3, GRID_SIZE, GRID_SIZE))
    obs[AGENT_CHANNEL, state.agent.row, state.agent.col] = 1.0
    for r, c in state.fruits:
        obs[FRUIT_CHANNEL, r, c] = 1.0
    obs[WALL_CHANNEL] = WALL_MASK
    return obs


class FruitCollection:
    """Mutable wrapper around :func:`reset` / :func:`step` / :func:`observe`."""

    def __init__(self):
        self.state: EnvState | None = None

    def reset(self, seed: int) -> np.ndarray:
        self.state = reset(seed)
        return observe(self.state)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.state is None:
            raise EpisodeFinished("reset() must be called before step()")
        self.state, reward, done = step(self.state, action)
        return observe(self.state), reward, done

    @property
    def agent(self) -> GridPos:
        return self.state.agent
