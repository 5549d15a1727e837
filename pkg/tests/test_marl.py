import json
import math
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robomarl.marl import (
    Hyperparams, Learner, MLP, QMixer, ReplayBuffer, epsilon_greedy, load_checkpoint, q_forward,
    q_network, qmix_mix, save_checkpoint, train_step, vdn_mix,
)
from robomarl.marl.checkpoint import CheckpointError, decode_tensors, encode_tensors, learner_tensors
from oracles import gradient_check, random_batch

GOLDEN = Path(__file__).parent / "data" / "checkpoint_vdn.golden"


# --------------------------------------------------------------- networks

def test_default_network_shape():
    net = q_network(np.random.default_rng(0))
    assert net.sizes == (37, 64, 64, 8)
    assert q_forward(net, np.zeros(37)).shape == (8,)
    with pytest.raises(ValueError):
        q_forward(net, np.zeros(36))


def test_zero_network_outputs_zero():
    net = MLP((37, 4, 8), params={"W0": np.zeros((37, 4)), "b0": np.zeros(4),
                                  "W1": np.zeros((4, 8)), "b1": np.zeros(8)})
    assert np.all(q_forward(net, np.ones(37)) == 0.0)


def test_single_layer_by_hand():
    W = np.array([[1.0, 2.0], [3.0, -1.0]])
    net = MLP((2, 2), params={"W0": W, "b0": np.array([0.5, -0.5])})
    assert np.allclose(net(np.array([[2.0, 1.0]]))[0], [2 + 3 + 0.5, 4 - 1 - 0.5])


def test_relu_hidden_by_hand():
    net = MLP((1, 2, 1), params={"W0": np.array([[1.0, -1.0]]), "b0": np.zeros(2),
                                 "W1": np.array([[2.0], [3.0]]), "b1": np.array([1.0])})
    assert net(np.array([[2.0]]))[0, 0] == 5.0
    assert net(np.array([[-2.0]]))[0, 0] == 7.0


def test_output_lipschitz(rng):
    net = q_network(rng)
    bound = np.prod([np.linalg.norm(net.params[f"W{i}"], 2) for i in range(3)])
    x = rng.normal(size=37)
    for j in range(37):
        dx = np.zeros(37)
        dx[j] = 1e-6
        assert np.linalg.norm(q_forward(net, x + dx) - q_forward(net, x)) <= bound * 1e-6 * (1 + 1e-9)


# ------------------------------------------------------------ exploration

def test_greedy_examples(rng):
    q = np.array([1, 5, 3, 0, 0, 0, 0, 0.0])
    assert epsilon_greedy(q, 0.0, rng) == 1
    assert epsilon_greedy(np.array([2.0, 2.0, 1.0]), 0.0, rng) == 0
    with pytest.raises(ValueError):
        epsilon_greedy(q, 1.5, rng)


@given(st.lists(st.floats(-100, 100), min_size=8, max_size=8), st.floats(-1e3, 1e3))
def test_argmax_shift_invariant(q, c):
    q = np.array(q)
    rng = np.random.default_rng(0)
    shifted = q + c
    if len(set(shifted)) == len(set(q)):  # no ties created by rounding
        assert epsilon_greedy(q, 0.0, rng) == epsilon_greedy(shifted, 0.0, rng)


def test_uniform_exploration_frequencies():
    rng = np.random.default_rng(42)
    n = 100_000
    counts = np.bincount([epsilon_greedy(np.zeros(8), 1.0, rng) for _ in range(n)], minlength=8)
    sigma = math.sqrt(n * (1 / 8) * (7 / 8))
    assert np.all(np.abs(counts - n / 8) <= 3 * sigma)


# ----------------------------------------------------------------- mixers

def test_vdn_examples():
    assert vdn_mix([0.0, 0.0]) == 0.0
    assert vdn_mix([1.5, -0.5]) == 1.0
    assert np.array_equal(vdn_mix(np.array([[1.0, 2.0], [3.0, 4.0]])), [3.0, 7.0])


def test_vdn_unit_partials(rng):
    q = rng.normal(size=2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1.0
        assert vdn_mix(q + 0.5 * e) - vdn_mix(q) == pytest.approx(0.5)


def test_qmix_zero_hypernetworks():
    mixer = QMixer(2, 5, 3)
    for k in mixer.params:
        mixer.params[k][...] = 0.0
    assert qmix_mix([3.0, -2.0], np.ones(5), mixer) == 0.0


def elu(x):
    return x if x > 0 else math.exp(x) - 1


def test_qmix_one_by_one_by_hand():
    p = {"hw1": [[-2.0]], "hw1_b": [0.0], "hb1": [[0.0]], "hb1_b": [0.5], "hw2": [[0.0]],
         "hw2_b": [-3.0], "v1": [[1.0]], "v1_b": [0.0], "v2": [[2.0]], "v2_b": [0.25]}
    mixer = QMixer(1, 1, 1, params={k: np.array(v) for k, v in p.items()})
    s, q = 1.5, 0.7
    want = 3.0 * elu(2.0 * s * q + 0.5) + 2.0 * max(s, 0.0) + 0.25
    assert qmix_mix([q], [s], mixer) == pytest.approx(want, rel=1e-14)
    q = -1.0
    want = 3.0 * elu(2.0 * s * q + 0.5) + 2.0 * s + 0.25
    assert qmix_mix([q], [s], mixer) == pytest.approx(want, rel=1e-14)


def test_qmix_monotone_probe(rng):
    mixer = QMixer(2, 37, 32, rng)
    for k in mixer.params:
        mixer.params[k] += rng.normal(scale=0.5, size=mixer.params[k].shape)
    for _ in range(300):
        s = rng.normal(size=37)
        q = rng.normal(scale=3, size=2)
        i = int(rng.integers(2))
        bumped = q.copy()
        bumped[i] += rng.uniform(1e-3, 2.0)
        assert qmix_mix(bumped, s, mixer) >= qmix_mix(q, s, mixer) - 1e-12


def test_qmix_param_shapes_checked():
    with pytest.raises(ValueError):
        QMixer(2, 3, 2, params={k: np.zeros(1) for k in QMixer.NAMES})


# -------------------------------------------------------------- gradients

@pytest.mark.parametrize("algo", ["iql", "vdn", "qmix"])
def test_gradients_match_finite_differences(algo):
    for instance in range(5):
        assert gradient_check(algo, instance) < 1e-4


@pytest.mark.parametrize("algo", ["iql", "vdn", "qmix"])
def test_zero_td_error_zero_gradients(algo, rng):
    learner = Learner(algo, Hyperparams(hidden=8, embed=4), seed=1, obs_size=6)
    batch = random_batch(rng, 5, 2, 6)
    q = learner._chosen(batch)
    y = q if algo == "iql" else (vdn_mix(q) if algo == "vdn" else learner.mixer(q, batch["state"]))
    loss, grads = learner.loss_and_grads(batch, y)
    assert loss == 0.0 and all(np.all(g == 0) for g in grads.values())


@pytest.mark.parametrize("algo", ["iql", "vdn", "qmix"])
def test_terminal_targets_equal_reward(algo, rng):
    learner = Learner(algo, Hyperparams(hidden=8, embed=4), seed=1, obs_size=6)
    batch = random_batch(rng, 7, 2, 6)
    batch["done"][:] = 1.0
    y = learner.targets(batch)
    want = batch["reward"][:, None].repeat(2, 1) if algo == "iql" else batch["reward"]
    assert np.array_equal(y, want)


def test_double_q_targets_by_hand(rng):
    learner = Learner("vdn", Hyperparams(hidden=8, double_q=True, gamma=0.9), seed=3, obs_size=6)
    batch = random_batch(rng, 9, 2, 6)
    cols = []
    for i in range(2):
        nxt = batch["next_obs"][:, i]
        pick = learner.nets[i](nxt).argmax(axis=1)
        cols.append(learner.target_nets[i](nxt)[np.arange(9), pick])
    want = batch["reward"] + 0.9 * (1 - batch["done"]) * (cols[0] + cols[1])
    assert np.allclose(learner.targets(batch), want, rtol=0, atol=1e-12)
    # with online == target networks double-Q reduces to the plain max
    learner.sync_targets()
    plain = Learner("vdn", Hyperparams(hidden=8, gamma=0.9), seed=3, obs_size=6)
    plain.nets, plain.target_nets = learner.nets, learner.target_nets
    assert np.allclose(learner.targets(batch), plain.targets(batch), rtol=0, atol=1e-12)


def test_algo_defaults():
    assert Hyperparams.for_algo("vdn") == Hyperparams()
    assert Hyperparams.for_algo("iql") == Hyperparams()
    q = Hyperparams.for_algo("qmix")
    assert (q.lr, q.target_every) == (1e-4, 1000)
    assert Hyperparams.for_algo("qmix", lr=3e-4).lr == 3e-4


def test_iql_update_is_decentralised(rng):
    learner = Learner("iql", Hyperparams(hidden=8), seed=2, obs_size=6)
    batch = random_batch(rng, 6, 2, 6)
    y = learner.targets(batch)
    _, g1 = learner.loss_and_grads(batch, y)
    other = {k: v.copy() for k, v in batch.items()}
    other["obs"][:, 1] = rng.normal(size=other["obs"][:, 1].shape)
    other["actions"][:, 1] = (other["actions"][:, 1] + 1) % 8
    _, g2 = learner.loss_and_grads(other, y)
    for k in g1:
        if k.startswith("agent0."):
            assert np.array_equal(g1[k], g2[k])


# --------------------------------------------------------------- training

def test_target_networks_change_only_at_boundaries(rng):
    hp = Hyperparams(hidden=8, embed=4, target_every=3, batch_size=4)
    learner = Learner("qmix", hp, seed=0, obs_size=6)
    batch = random_batch(rng, 4, 2, 6)
    snap = {k: v.copy() for k, v in learner.target_params().items()}
    for step in range(1, 7):
        learner.train_step(batch)
        now = learner.target_params()
        if step % 3 == 0:
            assert all(np.array_equal(now[k], v) for k, v in learner.params().items())
            snap = {k: v.copy() for k, v in now.items()}
        else:
            assert all(np.array_equal(now[k], snap[k]) for k in snap)


def test_identical_seeds_identical_trajectories(rng):
    batches = [random_batch(rng, 8, 2, 6) for _ in range(5)]
    runs = []
    for _ in range(2):
        learner = Learner("qmix", Hyperparams(hidden=8, embed=4), seed=3, obs_size=6)
        losses = [train_step("qmix", learner, b)[1] for b in batches]
        runs.append((losses, [v.copy() for v in learner.params().values()]))
    assert runs[0][0] == runs[1][0]
    assert all(np.array_equal(a, b) for a, b in zip(runs[0][1], runs[1][1]))


def test_train_step_rejects_wrong_algo_and_nan(rng):
    learner = Learner("vdn", Hyperparams(hidden=8), seed=0, obs_size=6)
    with pytest.raises(ValueError):
        train_step("iql", learner, random_batch(rng, 4, 2, 6))
    bad = random_batch(rng, 4, 2, 6)
    bad["reward"][0] = np.nan
    with pytest.raises(FloatingPointError):
        learner.train_step(bad)


def test_vdn_solves_matrix_game():
    # single state, payoff table with its unique maximum at joint action (1, 0)
    payoff = np.full((8, 8), -1.0)
    payoff[1, :] = 0.5
    payoff[:, 0] += 0.5
    payoff[1, 0] = 3.0
    best = np.unravel_index(np.argmax(payoff), payoff.shape)
    assert best == (1, 0)
    hp = Hyperparams(hidden=16, lr=5e-3, batch_size=32, target_every=50)
    learner = Learner("vdn", hp, seed=0, obs_size=4)
    rng = np.random.default_rng(0)
    obs = np.ones((32, 2, 4))
    for _ in range(2000):
        acts = rng.integers(8, size=(32, 2))
        batch = {"obs": obs, "actions": acts, "reward": payoff[acts[:, 0], acts[:, 1]],
                 "next_obs": obs, "done": np.ones(32), "state": obs[:, 0], "next_state": obs[:, 0]}
        learner.train_step(batch)
    greedy = tuple(learner.policy().act([np.ones(4), np.ones(4)], 0.0))
    assert greedy == (1, 0)


def test_epsilon_schedule():
    hp = Hyperparams()
    assert hp.epsilon(0) == 1.0 and hp.epsilon(50_000) == pytest.approx(0.05)
    assert hp.epsilon(25_000) == pytest.approx(0.525) and hp.epsilon(10 ** 7) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        Hyperparams(gamma=1.5)


def test_greedy_policy_deterministic(rng):
    pol = Learner("iql", seed=5).policy()
    obs = [rng.normal(size=37), rng.normal(size=37)]
    assert pol.act(obs, 0.0, np.random.default_rng(1)) == pol.act(obs, 0.0, np.random.default_rng(2))


# ----------------------------------------------------------------- replay

def fill(buf, n, rng):
    for i in range(n):
        buf.add(rng.normal(size=(2, 37)), [i % 8, 0], float(i), rng.normal(size=(2, 37)), False)


def test_replay_sample_all_is_permutation(rng):
    buf = ReplayBuffer(10)
    fill(buf, 10, rng)
    got = buf.sample(10, np.random.default_rng(0))["reward"]
    assert sorted(got) == list(range(10))


def test_replay_seeded_reproducible(rng):
    buf = ReplayBuffer(50)
    fill(buf, 50, rng)
    a = buf.sample(16, np.random.default_rng(3))
    b = buf.sample(16, np.random.default_rng(3))
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_replay_uniform_single_draws(rng):
    buf = ReplayBuffer(10)
    fill(buf, 10, rng)
    draw = np.random.default_rng(7)
    n = 100_000
    counts = np.bincount([int(buf.sample(1, draw)["reward"][0]) for _ in range(n)], minlength=10)
    sigma = math.sqrt(n * 0.1 * 0.9)
    assert np.all(np.abs(counts - n / 10) <= 3 * sigma)


def test_replay_fifo_and_capacity(rng):
    buf = ReplayBuffer(5)
    fill(buf, 12, rng)
    assert len(buf) == 5 and buf.added == 12
    assert sorted(buf.reward) == [7.0, 8.0, 9.0, 10.0, 11.0]
    with pytest.raises(ValueError):
        buf.sample(6, rng)
    assert np.array_equal(buf.state[0], buf.obs[0, 0])


# ------------------------------------------------------------- checkpoint

def golden_learner():
    learner = Learner("vdn", Hyperparams(hidden=2), seed=0, obs_size=3, n_actions=2)
    for j, p in enumerate(learner.params().values()):
        p[...] = np.arange(p.size).reshape(p.shape) * 0.125 + j
    for j, p in enumerate(learner.target_params().values()):
        p[...] = -(np.arange(p.size).reshape(p.shape) * 0.25 + j)
    return learner


def pack_by_hand(algo, tensors):
    """Independent byte-level writer for the documented layout."""
    out = b"RMCK" + struct.pack("<H", 1) + struct.pack("<B", len(algo)) + algo.encode()
    out += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        out += struct.pack("<H", len(name)) + name.encode()
        out += struct.pack("<B", arr.ndim) + b"".join(struct.pack("<I", d) for d in arr.shape)
        out += b"".join(struct.pack("<d", float(v)) for v in arr.ravel())
    return out


def test_checkpoint_bytes_match_golden():
    learner = golden_learner()
    data = encode_tensors("vdn", learner_tensors(learner))
    assert data == GOLDEN.read_bytes()
    assert data == pack_by_hand("vdn", learner_tensors(learner))


def test_checkpoint_round_trip(tmp_path):
    for algo in ("iql", "vdn", "qmix"):
        learner = Learner(algo, Hyperparams(hidden=8, embed=4, lr=1e-3), seed=4, obs_size=37)
        learner.train_steps = 17
        path = save_checkpoint(str(tmp_path / f"{algo}.bin"), learner, {"env_steps": 99})
        again, meta = load_checkpoint(path)
        assert again.algo == algo and meta["env_steps"] == 99 and meta["train_steps"] == 17
        assert again.hp == learner.hp
        for a, b in ((learner.params(), again.params()), (learner.target_params(), again.target_params())):
            assert list(a) == list(b) and all(np.array_equal(a[k], b[k]) for k in a)
        json.loads((tmp_path / f"{algo}.bin.json").read_text())


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(str(tmp_path / "missing.bin"))
    data = GOLDEN.read_bytes()
    with pytest.raises(CheckpointError):
        decode_tensors(b"XXXX" + data[4:])
    with pytest.raises(CheckpointError):
        decode_tensors(data[:-3])
    with pytest.raises(CheckpointError):
        decode_tensors(data + b"\0")
    with pytest.raises(CheckpointError):
        decode_tensors(data[:4] + struct.pack("<H", 9) + data[6:])
    algo, tensors = decode_tensors(data)
    assert algo == "vdn" and list(tensors)[0] == "agent0.W0"
