"""DQN agents for the eleven benchmark variants.

A variant fixes which views of the state are built (raw or centered global
grid, local 3x3 window, ring summary) and how they reach the networks:

========================  =====================================================
architecture              networks
========================  =====================================================
``global``                one conv net on the global view
``globallocal``           a global net and a local net; the local net acts
                          whenever its window shows a fruit
``integrated``            one net with a global conv branch and a local branch
``summary``               one conv net on a 3x3 or 5x5 summary
========================  =====================================================
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from egodqn import env as fruit_env
from egodqn.nn import checkpoint
from egodqn.nn.network import QNetwork, build_conv_qnet, build_integrated_qnet
from egodqn.replay import PrioritizedBuffer
from egodqn.transforms import (
    SUMMARY_DECAY,
    center_pad,
    center_roll,
    extract_local,
    summarize,
)

GLOBAL_SIZE = fruit_env.GRID_SIZE
LOCAL_SHAPE = (2, 3, 3)


class Variant(str, Enum):
    GLOBAL_NOCENTER = "global-nocenter"
    GLOBAL_PAD = "global-pad"
    GLOBAL_ROLL = "global-roll"
    GLOBALLOCAL_NOCENTER = "globallocal-nocenter"
    GLOBALLOCAL_PAD = "globallocal-pad"
    GLOBALLOCAL_ROLL = "globallocal-roll"
    INTEGRATED_NOCENTER = "integrated-nocenter"
    INTEGRATED_PAD = "integrated-pad"
    INTEGRATED_ROLL = "integrated-roll"
    SUMMARY_3X3 = "summary-3x3"
    SUMMARY_5X5 = "summary-5x5"

    @property
    def architecture(self) -> str:
        return self.value.split("-")[0]

    @property
    def centering(self) -> str | None:
        """``None``, ``"pad"`` or ``"roll"`` for the global view; summaries have no global view."""
        if self.architecture == "summary":
            return None
        tail = self.value.split("-")[1]
        return None if tail == "nocenter" else tail

    @property
    def summary_size(self) -> int | None:
        if self.architecture != "summary":
            return None
        return int(self.value[-1])

    @property
    def index(self) -> int:
        return list(Variant).index(self)

    @property
    def views(self) -> tuple[str, ...]:
        arch = self.architecture
        if arch == "global":
            return ("global",)
        if arch == "summary":
            return ("summary",)
        return ("global", "local")

    def view_shapes(self) -> dict:
        shapes = {}
        if "global" in self.views:
            channels = 3 if self.centering is None else 2
            shapes["global"] = (channels, GLOBAL_SIZE, GLOBAL_SIZE)
        if "local" in self.views:
            shapes["local"] = LOCAL_SHAPE
        if "summary" in self.views:
            k = self.summary_size
            shapes["summary"] = (2, k, k)
        return shapes

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = name.strip().lower().replace("_", "-").replace("/", "-")
        for v in cls:
            if v.value == key or v.name.lower() == name.strip().lower():
                return v
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(v.value for v in cls)}")


def build_observation(variant: Variant, g: np.ndarray, agent_pos, decay: float = SUMMARY_DECAY) -> dict:
    """Views of global state ``g`` consumed by ``variant``'s networks."""
    obs = {}
    padded = None
    if "global" in variant.views:
        if variant.centering is None:
            obs["global"] = g
        elif variant.centering == "roll":
            obs["global"] = center_roll(g, agent_pos).data
        else:
            padded = center_pad(g, agent_pos)
            obs["global"] = padded.data
    if "local" in variant.views or "summary" in variant.views:
        if padded is None:
            padded = center_pad(g, agent_pos)
        if "local" in variant.views:
            obs["local"] = extract_local(padded)
        if "summary" in variant.views:
            obs["summary"] = summarize(padded, variant.summary_size, decay)
    return obs


@dataclass
class AgentConfig:
    variant: Variant = Variant.GLOBAL_NOCENTER
    seed: int = 1
    gamma: float = 0.95
    lr: float = 0.0002
    tau: float = 0.0005
    batch_size: int = 32
    episodes: int = 800
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_end_episode: int = 750
    eval_epsilon: float = 0.05
    global_buffer: int = 10000
    local_buffer: int = 2400
    decay: float = SUMMARY_DECAY
    local_feature_rule: str = "fruits"
    dtype: str = "float32"

    def __post_init__(self):
        if not isinstance(self.variant, Variant):
            self.variant = Variant.parse(str(self.variant))
        if self.local_feature_rule not in ("fruits", "any"):
            raise ValueError(f"local_feature_rule must be 'fruits' or 'any', got {self.local_feature_rule!r}")

    def epsilon(self, episode: int) -> float:
        return epsilon(episode, self.eps_start, self.eps_end, self.eps_end_episode)


def epsilon(episode: int, start: float = 1.0, end: float = 0.05, end_episode: int = 750) -> float:
    """Linear decay from ``start`` at episode 1 to ``end`` at ``end_episode``."""
    if episode < 1:
        raise ValueError("episodes are numbered from 1")
    if episode >= end_episode:
        return end
    return start - (episode - 1) * (start - end) / (end_episode - 1)


@dataclass
class Learner:
    """One online network with its target copy and replay buffer."""

    name: str
    views: tuple
    online: QNetwork
    target: QNetwork
    buffer: PrioritizedBuffer

    def inputs(self, obs: dict) -> list:
        return [obs[v] for v in self.views]

    def q_values(self, obs: dict) -> np.ndarray:
        return self.online.q_values(*self.inputs(obs))


@dataclass
class StepStats:
    losses: dict = field(default_factory=dict)
    mean_abs_td: dict = field(default_factory=dict)

    @property
    def loss(self) -> float:
        return float(np.mean(list(self.losses.values()))) if self.losses else float("nan")


@dataclass
class EpisodeRecord:
    episode: int
    ret: float
    steps: int
    mean_loss: float
    epsilon: float


class DqnAgent:
    def __init__(self, config: AgentConfig):
        self.config = config
        variant = config.variant
        root = np.random.SeedSequence(config.seed)
        env_ss, explore_ss, replay_ss, init_ss = root.spawn(4)
        self.env_rng = np.random.default_rng(env_ss)
        self.rng = np.random.default_rng(explore_ss)
        dtype = np.dtype(config.dtype)
        shapes = variant.view_shapes()

        specs = []  # (name, views, builder, capacity)
        arch = variant.architecture
        if arch == "global":
            specs.append(("global", ("global",), lambda s: build_conv_qnet(shapes["global"], "valid", seed=s,
                                                                           lr=config.lr, dtype=dtype),
                          config.global_buffer))
        elif arch == "globallocal":
            specs.append(("global", ("global",), lambda s: build_conv_qnet(shapes["global"], "valid", seed=s,
                                                                           lr=config.lr, dtype=dtype),
                          config.global_buffer))
            specs.append(("local", ("local",), lambda s: build_conv_qnet(shapes["local"], "same", seed=s,
                                                                         lr=config.lr, dtype=dtype),
                          config.local_buffer))
        elif arch == "integrated":
            specs.append(("integrated", ("global", "local"),
                          lambda s: build_integrated_qnet(shapes["global"], shapes["local"], seed=s,
                                                          lr=config.lr, dtype=dtype),
                          config.global_buffer))
        else:
            specs.append(("summary", ("summary",), lambda s: build_conv_qnet(shapes["summary"], "same", seed=s,
                                                                             lr=config.lr, dtype=dtype),
                          config.local_buffer))

        self.learners: list[Learner] = []
        init_seeds = init_ss.spawn(len(specs))
        replay_seeds = replay_ss.spawn(len(specs))
        for (name, views, build, capacity), iss, rss in zip(specs, init_seeds, replay_seeds):
            online = build(np.random.default_rng(iss))
            target = online.copy()
            buf = PrioritizedBuffer(capacity, {v: shapes[v] for v in views},
                                    rng=np.random.default_rng(rss), dtype=dtype)
            self.learners.append(Learner(name, views, online, target, buf))

    @property
    def variant(self) -> Variant:
        return self.config.variant

    @property
    def buffers_full(self) -> bool:
        return all(lr.buffer.full for lr in self.learners)

    def observe(self, state: fruit_env.EnvState) -> dict:
        return build_observation(self.variant, fruit_env.observe(state), state.agent, self.config.decay)

    def uses_local_network(self, obs: dict) -> bool:
        """Conditional rule of the two-network agent: act locally when the window shows a feature."""
        local = obs["local"]
        if self.config.local_feature_rule == "fruits":
            return bool(np.any(local[0] != 0))
        return bool(np.any(local != 0))

    def acting_learner(self, obs: dict) -> Learner:
        if self.variant.architecture == "globallocal" and self.uses_local_network(obs):
            return self.learners[1]
        return self.learners[0]

    def greedy_action(self, obs: dict) -> int:
        q = self.acting_learner(obs).q_values(obs)
        return int(np.argmax(q))  # ties go to the lowest index

    def select_action(self, obs: dict, eps: float) -> int:
        if self.rng.random() < eps:
            return int(self.rng.integers(fruit_env.N_ACTIONS))
        return self.greedy_action(obs)

    def remember(self, obs, action, reward, next_obs, done, only_unfilled: bool = False) -> None:
        for lr in self.learners:
            if only_unfilled and lr.buffer.full:
                continue
            lr.buffer.push({v: obs[v] for v in lr.views}, action, reward,
                           {v: next_obs[v] for v in lr.views}, done)

    def td_targets(self, learner: Learner, rewards, next_obs: dict, dones) -> np.ndarray:
        q_next = learner.target.forward(*learner.inputs(next_obs)).max(axis=1)
        return rewards + self.config.gamma * (1.0 - dones) * q_next

    def train_step(self) -> StepStats:
        stats = StepStats()
        for lr in self.learners:
            if not lr.buffer.full:
                raise RuntimeError(f"{lr.name} buffer holds {len(lr.buffer)}/{lr.buffer.capacity}; prefill first")
            batch = lr.buffer.sample(self.config.batch_size)
            targets = self.td_targets(lr, batch.rewards, batch.next_obs, batch.dones)
            loss, td = lr.online.train_on_batch(lr.inputs(batch.obs), batch.actions, targets, batch.weights)
            lr.target.soft_update_from(lr.online, self.config.tau)
            lr.buffer.update_priorities(batch.indices, td, batch.generations)
            stats.losses[lr.name] = loss
            stats.mean_abs_td[lr.name] = float(np.mean(np.abs(td)))
        return stats

    def next_env_seed(self) -> int:
        return int(self.env_rng.integers(2 ** 63))

    def run_episode(self, episode: int, mode: str = "train") -> EpisodeRecord:
        """Play one episode.

        ``prefill`` acts uniformly at random and only stores transitions
        (stopping once every buffer is full); ``train`` acts epsilon-greedily
        and takes one training step per environment step; ``eval`` acts with
        the fixed evaluation epsilon and does not learn.
        """
        if mode not in ("prefill", "train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        state = fruit_env.reset(self.next_env_seed())
        obs = self.observe(state)
        if mode == "prefill":
            eps = 1.0
        elif mode == "train":
            eps = self.config.epsilon(episode)
        else:
            eps = self.config.eval_epsilon
        total, steps, losses = 0.0, 0, []
        done = False
        while not done:
            action = self.select_action(obs, eps)
            state, reward, done = fruit_env.step(state, action)
            next_obs = self.observe(state)
            if mode == "train":
                self.remember(obs, action, reward, next_obs, done)
                losses.append(self.train_step().loss)
            elif mode == "prefill":
                self.remember(obs, action, reward, next_obs, done, only_unfilled=True)
            total += reward
            steps += 1
            obs = next_obs
            if mode == "prefill" and self.buffers_full:
                break
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        return EpisodeRecord(episode, total, steps, mean_loss, eps)

    def prefill(self) -> int:
        """Fill every buffer with random-policy transitions; returns episodes used."""
        n = 0
        while not self.buffers_full:
            n += 1
            self.run_episode(n, "prefill")
        return n

    def save(self, directory, episodes_done: int) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for lr in self.learners:
            checkpoint.save(directory / f"{lr.name}.edqn", lr.online, self.variant.index)
            checkpoint.save(directory / f"{lr.name}.target.edqn", lr.target, self.variant.index)
        (directory / "agent.txt").write_text(
            f"variant = {self.variant.value}\nseed = {self.config.seed}\nepisodes = {episodes_done}\n"
        )

    @classmethod
    def load(cls, directory, **overrides) -> tuple["DqnAgent", int]:
        """Rebuild an agent from :meth:`save` output; returns (agent, episodes done)."""
        directory = Path(directory)
        meta = {}
        for line in (directory / "agent.txt").read_text().splitlines():
            if "=" in line:
                key, value = (part.strip() for part in line.split("=", 1))
                meta[key] = value
        config = AgentConfig(variant=Variant.parse(meta["variant"]), seed=int(meta["seed"]), **overrides)
        agent = cls(config)
        for lr in agent.learners:
            for net, suffix in ((lr.online, ""), (lr.target, ".target")):
                stored = checkpoint.load(directory / f"{lr.name}{suffix}.edqn", net)
                if stored != agent.variant.index:
                    raise checkpoint.CheckpointError(
                        f"{lr.name}{suffix}.edqn was saved by variant #{stored}, sidecar says {agent.variant.value}"
                    )
        return agent, int(meta["episodes"])


def config_fields() -> list[str]:
    return [f.name for f in dataclasses.fields(AgentConfig)]
