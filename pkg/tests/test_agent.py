import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egodqn import env
from egodqn.agent import AgentConfig, DqnAgent, Variant, build_observation, epsilon
from egodqn.env import EnvState, GridPos

SMALL = dict(global_buffer=64, local_buffer=48, batch_size=8)


def small_agent(variant, seed=1, **kw):
    return DqnAgent(AgentConfig(variant=variant, seed=seed, **{**SMALL, **kw}))


def make_state(agent, fruits):
    return EnvState(GridPos(*agent), frozenset(GridPos(*f) for f in fruits))


# ---------------------------------------------------------------- observations

EXPECTED_SHAPES = {
    Variant.GLOBAL_NOCENTER: {"global": (3, 11, 11)},
    Variant.GLOBAL_PAD: {"global": (2, 11, 11)},
    Variant.GLOBAL_ROLL: {"global": (2, 11, 11)},
    Variant.GLOBALLOCAL_NOCENTER: {"global": (3, 11, 11), "local": (2, 3, 3)},
    Variant.GLOBALLOCAL_PAD: {"global": (2, 11, 11), "local": (2, 3, 3)},
    Variant.GLOBALLOCAL_ROLL: {"global": (2, 11, 11), "local": (2, 3, 3)},
    Variant.INTEGRATED_NOCENTER: {"global": (3, 11, 11), "local": (2, 3, 3)},
    Variant.INTEGRATED_PAD: {"global": (2, 11, 11), "local": (2, 3, 3)},
    Variant.INTEGRATED_ROLL: {"global": (2, 11, 11), "local": (2, 3, 3)},
    Variant.SUMMARY_3X3: {"summary": (2, 3, 3)},
    Variant.SUMMARY_5X5: {"summary": (2, 5, 5)},
}


@pytest.mark.parametrize("variant", list(Variant))
def test_observation_shapes(variant):
    s = env.reset(3)
    obs = build_observation(variant, env.observe(s), s.agent)
    assert {k: v.shape for k, v in obs.items()} == EXPECTED_SHAPES[variant]
    assert variant.view_shapes() == EXPECTED_SHAPES[variant]


def test_nocenter_is_raw():
    s = env.reset(4)
    g = env.observe(s)
    np.testing.assert_array_equal(build_observation(Variant.GLOBAL_NOCENTER, g, s.agent)["global"], g)


def test_variant_parsing():
    assert Variant.parse("GlobalLocal/Pad") is Variant.GLOBALLOCAL_PAD
    assert Variant.parse("SUMMARY_5X5") is Variant.SUMMARY_5X5
    assert len(Variant) == 11 and len({v.index for v in Variant}) == 11
    with pytest.raises(ValueError):
        Variant.parse("global-spin")


@pytest.mark.parametrize("variant", list(Variant))
def test_network_input_shapes(variant):
    agent = small_agent(variant)
    assert len(agent.learners) == (2 if variant.architecture == "globallocal" else 1)
    obs = agent.observe(env.reset(0))
    for lr in agent.learners:
        assert lr.q_values(obs).shape == (4,)
        for a, b in zip(lr.online.parameters(), lr.target.parameters()):
            np.testing.assert_array_equal(a, b)


def test_default_buffer_sizes():
    cfg = AgentConfig(variant=Variant.GLOBALLOCAL_PAD)
    agent = DqnAgent(cfg)
    assert [lr.buffer.capacity for lr in agent.learners] == [10000, 2400]
    assert DqnAgent(AgentConfig(variant=Variant.SUMMARY_3X3)).learners[0].buffer.capacity == 2400
    assert DqnAgent(AgentConfig(variant=Variant.INTEGRATED_ROLL)).learners[0].buffer.capacity == 10000


def test_config_defaults():
    c = AgentConfig()
    assert (c.gamma, c.lr, c.tau, c.batch_size, c.episodes) == (0.95, 0.0002, 0.0005, 32, 800)
    assert (c.eps_start, c.eps_end, c.eps_end_episode, c.decay) == (1.0, 0.05, 750, 0.9)
    with pytest.raises(ValueError):
        AgentConfig(local_feature_rule="walls")


# ---------------------------------------------------------------- epsilon

def test_epsilon_schedule():
    assert epsilon(1) == 1.0
    assert epsilon(750) == 0.05
    assert epsilon(800) == 0.05
    assert epsilon(376) == pytest.approx(1 - 375 * 0.95 / 749)
    assert epsilon(376) == pytest.approx(0.52437, abs=5e-6)
    eps = [epsilon(e) for e in range(1, 801)]
    assert all(a >= b for a, b in zip(eps, eps[1:]))
    with pytest.raises(ValueError):
        epsilon(0)


# ---------------------------------------------------------------- action selection

class FixedQ:
    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)

    def q_values(self, *inputs):
        return self.q


def test_greedy_argmax_and_ties():
    agent = small_agent(Variant.GLOBAL_PAD)
    obs = agent.observe(env.reset(0))
    agent.learners[0].online = FixedQ([0.1, 0.5, 0.2, 0.3])
    assert agent.select_action(obs, 0.0) == 1
    agent.learners[0].online = FixedQ([0.7, 0.2, 0.7, 0.7])
    assert agent.greedy_action(obs) == 0


def test_uniform_exploration():
    agent = small_agent(Variant.GLOBAL_PAD)
    obs = agent.observe(env.reset(0))
    counts = np.bincount([agent.select_action(obs, 1.0) for _ in range(8000)], minlength=4)
    expected = 2000
    assert np.sum((counts - expected) ** 2 / expected) <= 3 + 3 * np.sqrt(6)


def test_globallocal_uses_local_net_when_fruit_adjacent():
    agent = small_agent(Variant.GLOBALLOCAL_PAD)
    agent.learners[0].online = FixedQ([9, 0, 0, 0])
    agent.learners[1].online = FixedQ([0, 0, 1, 0])
    near = agent.observe(make_state((5, 5), [(5, 4), (1, 1)]))
    far = agent.observe(make_state((5, 5), [(1, 1)]))
    assert agent.greedy_action(near) == 2
    assert agent.greedy_action(far) == 0


def test_feature_rule_any_counts_walls():
    fr = small_agent(Variant.GLOBALLOCAL_PAD)
    anyr = small_agent(Variant.GLOBALLOCAL_PAD, local_feature_rule="any")
    obs = fr.observe(make_state((1, 5), [(8, 8)]))  # wall above, no fruit nearby
    assert not fr.uses_local_network(obs)
    assert anyr.uses_local_network(obs)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 40))
def test_globallocal_rule_property(seed):
    agent = _GL_AGENT
    s = env.reset(seed)
    obs = agent.observe(s)
    if not obs["local"][0].any():
        assert agent.greedy_action(obs) == int(np.argmax(agent.learners[0].q_values(obs)))
    else:
        assert agent.greedy_action(obs) == int(np.argmax(agent.learners[1].q_values(obs)))


_GL_AGENT = small_agent(Variant.GLOBALLOCAL_ROLL, seed=5)


# ---------------------------------------------------------------- translation consistency

@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8), st.integers(2, 8), st.integers(2, 8),
       st.sets(st.tuples(st.integers(-1, 1), st.integers(-1, 1)).filter(lambda d: d != (0, 0)), max_size=4))
def test_local_view_translation_consistency(r1, c1, r2, c2, offsets):
    # Away from the border the local window sees no walls, so two scenes that
    # differ by a rigid shift give the same local view and the same local action.
    a = make_state((r1, c1), [(r1 + dr, c1 + dc) for dr, dc in offsets])
    b = make_state((r2, c2), [(r2 + dr, c2 + dc) for dr, dc in offsets])
    agent = _GL_AGENT
    oa, ob = agent.observe(a), agent.observe(b)
    np.testing.assert_array_equal(oa["local"], ob["local"])
    local = agent.learners[1]
    assert int(np.argmax(local.q_values(oa))) == int(np.argmax(local.q_values(ob)))


def test_roll_translation_gives_identical_bundle_and_action():
    # with the wall channel identical too (a full-period shift), the bundles are equal
    agent = small_agent(Variant.GLOBAL_ROLL, seed=3)
    s = make_state((3, 3), [(4, 6), (7, 2)])
    g = env.observe(s)
    obs = build_observation(Variant.GLOBAL_ROLL, g, s.agent)
    shifted = np.roll(g, (2, 1), axis=(1, 2))
    obs2 = build_observation(Variant.GLOBAL_ROLL, shifted, (5, 4))
    np.testing.assert_array_equal(obs["global"], obs2["global"])
    assert agent.greedy_action(obs) == agent.greedy_action(obs2)


# ---------------------------------------------------------------- training

def test_td_targets():
    agent = small_agent(Variant.GLOBAL_PAD)
    lr = agent.learners[0]
    lr.target = FixedQForward([0.5, 2.0, 1.0, -1.0])
    y = agent.td_targets(lr, np.array([1.0, 1.0, 0.0]), {"global": np.zeros((3, 2, 11, 11))},
                         np.array([0.0, 1.0, 1.0]))
    np.testing.assert_allclose(y, [2.9, 1.0, 0.0])


class FixedQForward:
    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)

    def forward(self, *inputs):
        return np.tile(self.q, (len(inputs[0]), 1))


def test_fixed_point_gives_zero_loss_and_floor_priorities():
    agent = small_agent(Variant.SUMMARY_3X3, gamma=0.0)
    agent.prefill()
    lr = agent.learners[0]
    buf = lr.buffer
    # make Q(s, a) equal r everywhere: zero head weights and bias, zero rewards
    lr.online.head[-1].params["W"][...] = 0
    lr.online.head[-1].params["b"][...] = 0
    buf.rewards[:] = 0
    stats = agent.train_step()
    assert stats.losses["summary"] == 0.0
    assert stats.mean_abs_td["summary"] == 0.0
    sampled = buf.replayed.nonzero()[0]
    assert np.all(buf.priorities[sampled[:8]] == pytest.approx(1e-3))


def test_train_step_requires_full_buffer():
    agent = small_agent(Variant.GLOBAL_PAD)
    with pytest.raises(RuntimeError):
        agent.train_step()


def test_prefill_fills_every_buffer():
    agent = small_agent(Variant.GLOBALLOCAL_PAD)
    n = agent.prefill()
    assert agent.buffers_full and n >= 1
    full_size = DqnAgent(AgentConfig(variant=Variant.GLOBAL_NOCENTER, seed=1))
    assert full_size.prefill() >= 10000 // 80


@pytest.mark.parametrize("variant", list(Variant))
def test_episode_determinism_and_bounds(variant):
    streams = []
    for _ in range(2):
        agent = small_agent(variant, seed=11)
        agent.prefill()
        streams.append([agent.run_episode(ep, "train") for ep in (1, 2)])
    assert streams[0] == streams[1]
    for rec in streams[0]:
        assert 0 <= rec.ret <= 5 and 1 <= rec.steps <= 80


def test_eval_mode_does_not_learn():
    agent = small_agent(Variant.GLOBAL_PAD)
    agent.prefill()
    before = [p.copy() for p in agent.learners[0].online.parameters()]
    rec = agent.run_episode(1, "eval")
    assert rec.epsilon == 0.05 and np.isnan(rec.mean_loss)
    for a, b in zip(before, agent.learners[0].online.parameters()):
        np.testing.assert_array_equal(a, b)


def test_save_and_load(tmp_path):
    agent = small_agent(Variant.GLOBALLOCAL_ROLL, seed=4)
    agent.prefill()
    agent.run_episode(1, "train")
    agent.save(tmp_path / "a", 1)
    loaded, done = DqnAgent.load(tmp_path / "a", **SMALL)
    assert done == 1 and loaded.variant is Variant.GLOBALLOCAL_ROLL
    for la, lb in zip(agent.learners, loaded.learners):
        for a, b in zip(la.online.parameters(), lb.online.parameters()):
            np.testing.assert_array_equal(a.astype(float), b.astype(float))
