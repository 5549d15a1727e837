import math

import numpy as np
import pytest

from robomarl import _layout as L
from robomarl.env import (
    CombatEnv, ContextError, MAX_STEPS, OBS_SIZE, build_observation, decode_action, encode_action,
    resolve_contexts,
)
from robomarl.referee import RewardWeights
from robomarl.world import WorldState


def test_action_codec():
    assert decode_action(0) == (0, 0) and decode_action(7) == (3, 1)
    for i in range(8):
        assert encode_action(*decode_action(i)) == i
    for bad in (-1, 8, 2.5, True):
        with pytest.raises(ValueError):
            decode_action(bad)
    with pytest.raises(ValueError):
        encode_action(4, 0)


def test_contexts():
    ctx, combat = resolve_contexts({"VK1": 0.1, "level": 1, "hp0": 300})
    assert ctx.mu_slide == 0.1 and ctx.level == "easy" and combat.hp0 == 300
    for bad in ({"nope": 1}, {"mu_slide": 5.0}, {"mass": "heavy"}, {"hp0": 2.5}, {"level": 9}):
        with pytest.raises(ContextError):
            resolve_contexts(bad)


def test_reset_defaults():
    env = CombatEnv(seed=1)
    obs, info = env.reset()
    assert len(obs) == 2 and all(o.shape == (OBS_SIZE,) for o in obs)
    assert info["level"] == "easy"
    assert np.all(obs[0][28:32] == 1.0) and obs[0][36] == 1.0
    red = [env.world.position(i) for i in (0, 1)]
    blue = [env.world.position(i) for i in (2, 3)]
    assert all(x < 1.0 for x, _ in red) and all(x > 7.1 for x, _ in blue)
    assert env.world.heading(0) == 0.0 and env.world.heading(2) == math.pi


def test_reset_with_level_context():
    env = CombatEnv(seed=1)
    _, info = env.reset({"level": 3})
    assert info["level"] == "hard"
    info = env.step([0, 0])[3]
    assert info["level"] == "hard"


def test_reset_rejects_unknown_context():
    with pytest.raises(ContextError):
        CombatEnv().reset({"VK9": 1})


def test_same_seed_same_observations():
    a, _ = CombatEnv(seed=5).reset()
    b, _ = CombatEnv(seed=5).reset()
    c, _ = CombatEnv(seed=6).reset()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_teammates_see_permuted_slots():
    env = CombatEnv(seed=2)
    o0, o1 = env.reset()[0]
    perm = [3, 4, 5, 0, 1, 2] + list(range(6, 28)) + [29, 28, 30, 31, 33, 32, 34, 35, 36]
    assert np.array_equal(o0[perm], o1)


def hand_world():
    w = WorldState.empty(500, 50)
    w.bodies[:, L.X] = [8.1, 1.0, 4.05, 2.0]
    w.bodies[:, L.Y] = [5.1, 2.55, 1.0, 4.0]
    w.bodies[:, L.TH] = [math.pi, 0.0, -math.pi / 2, 0.5]
    w.hp[:] = [500, 250, 0, 100]
    w.bullets[:] = [50, 25, 10, 0]
    return w


def test_hand_built_observation():
    cands = {2: np.full((4, 2), [4.05, 2.55]), 3: np.arange(8.0).reshape(4, 2)}
    obs = build_observation(hand_world(), cands, 0, 25, 500, 50)
    want = np.array([1.0, 1.0, 1.0, 1 / 8.1, 0.5, 0.0, 0.5, 1 / 5.1, -0.5, 2 / 8.1, 4 / 5.1, 0.5 / math.pi]
                    + [0.5, 0.5] * 4
                    + [0 / 8.1, 1 / 5.1, 2 / 8.1, 3 / 5.1, 4 / 8.1, 5 / 5.1, 6 / 8.1, 7 / 5.1]
                    + [1.0, 0.5, 0.0, 0.2, 1.0, 0.5, 0.2, 0.0, 0.5])
    assert np.allclose(obs, want, rtol=0, atol=1e-15)


def test_observations_normalised_during_play():
    env = CombatEnv(seed=4, contexts={"level": 2})
    obs, _ = env.reset()
    done = False
    rng = np.random.default_rng(0)
    while not done:
        obs, _, done, _ = env.step(list(rng.integers(8, size=2)))
        for o in obs:
            assert o.shape == (37,) and np.all(np.abs(o) <= 1.0)


def test_episode_ends_by_step_limit_or_verdict():
    env = CombatEnv(seed=0, weights=RewardWeights())
    env.reset()
    steps, done, info = 0, False, {}
    while not done:
        _, _, done, info = env.step([0, 0])
        steps += 1
    assert steps <= MAX_STEPS
    if steps == MAX_STEPS and info["verdict"] != "ongoing":
        assert info["tick"] == 1000
    assert info["verdict"] in ("red_wins", "blue_wins", "draw") or steps == MAX_STEPS
    with pytest.raises(RuntimeError):
        env.step([0, 0])


def test_no_kill_episode_runs_full_length():
    env = CombatEnv(seed=0, contexts={"bullets0": 0})
    env.reset()
    for k in range(MAX_STEPS):
        _, r, done, info = env.step([0, 0])
        assert r == 0.0
        assert done == (k == MAX_STEPS - 1)
    assert info["verdict"] == "draw" and info["tick"] == 1000


def play(env, actions):
    env.reset()
    trace = []
    for a in actions:
        obs, r, done, info = env.step(a)
        trace.append((np.concatenate(obs), r, info["shots"], env.world.bodies.copy()))
        if done:
            break
    return trace


def test_same_seed_same_trajectory():
    rng = np.random.default_rng(1)
    acts = [list(rng.integers(8, size=2)) for _ in range(50)]
    a = play(CombatEnv(seed=11, contexts={"level": "hard"}), acts)
    b = play(CombatEnv(seed=11, contexts={"level": "hard"}), acts)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert np.array_equal(x[0], y[0]) and x[1] == y[1] and x[2] == y[2]
        assert np.array_equal(x[3], y[3])


def test_reward_decomposition_over_episodes():
    w = RewardWeights()
    for seed in range(6):
        env = CombatEnv(seed=seed, contexts={"level": "easy"}, weights=w)
        env.reset()
        done, total, info = False, 0.0, {}
        rng = np.random.default_rng(seed)
        while not done:
            _, r, done, info = env.step(list(rng.integers(8, size=2)))
            total += r
        won = info["verdict"] == "red_wins"
        want = w.r_h * env.totals["damage"][0] + w.r_k * env.totals["kills"][0] + w.r_w * won
        assert total == pytest.approx(want)


def test_win_ends_immediately_with_win_bonus():
    # near-certain hits at 1 m against one-HP, unarmed opponents
    env = CombatEnv(seed=3, contexts={"p_max": 1.0, "d0": 20.0, "kappa": 0.5})
    env.reset()
    w = env.world
    w.bodies[:, :3] = [[2.6, 3.3, 0.0], [2.6, 2.0, 0.0], [3.6, 3.3, math.pi], [3.6, 2.0, math.pi]]
    w.hp[2:] = 1
    w.bullets[2:] = 0
    env._refresh_candidates()
    _, r, done, info = env.step([encode_action(0, 0), encode_action(0, 1)])
    assert done and info["step"] == 1 and info["verdict"] == "red_wins"
    assert info["kills"] == [2, 0]
    assert r == pytest.approx(0.02 * 2 + 3 * 2 + 20)


def test_goal_refers_to_chosen_target_candidates():
    env = CombatEnv(seed=8)
    env.reset()
    order = env._discrete_order(0, encode_action(2, 1))
    assert order.target == 3
    assert order.path.goal == tuple(map(float, env.candidates[3].points[2]))


def test_dead_target_falls_back_to_living_enemy():
    env = CombatEnv(seed=8)
    env.reset()
    env.world.hp[3] = 0
    order = env._discrete_order(0, encode_action(1, 1))
    assert order.target == 2
    assert order.path.goal == tuple(map(float, env.candidates[2].points[1]))


def test_dead_robots_keep_pose_and_report_zero_hp():
    env = CombatEnv(seed=9)
    env.reset()
    env.world.hp[1] = 0
    pose = env.world.bodies[1, :3].copy()
    obs, _, _, _ = env.step([0, 5])
    assert np.array_equal(env.world.bodies[1, :3], pose)
    assert obs[0][29] == 0.0


def test_continuous_interface_clamps():
    env = CombatEnv(seed=1, continuous=True)
    env.reset()
    env.step([(5.0, 0.0, 0.0, 0), (0.0, -5.0, 9.0, 1)])
    assert abs(env.world.bodies[0, L.VX]) <= 2.1
    with pytest.raises(ValueError):
        env.step([(0.0, 0.0, 0.0, 2), (0, 0, 0, 0)])


def test_lidar_and_mask_hooks():
    env = CombatEnv(seed=1, lidar=True, obs_mask=lambda o, a: np.where(np.arange(37) > 30, -1.0, o))
    obs, info = env.reset()
    assert info["lidar"].shape == (4, 61)
    assert np.all(obs[0][31:] == -1.0)


def test_external_opponent_policy():
    calls = []
    def opponent(observations):
        calls.append(len(observations))
        return [0, 1]
    env = CombatEnv(seed=1, opponent=opponent)
    env.reset()
    _, _, _, info = env.step([0, 0])
    assert calls == [2] and info["bot"] == [{"robot": 2, "action": 0}, {"robot": 3, "action": 1}]


def test_bad_action_count():
    env = CombatEnv(seed=1)
    env.reset()
    with pytest.raises(ValueError):
        env.step([0])
