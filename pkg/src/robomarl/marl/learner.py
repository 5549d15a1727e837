"""IQL, VDN and QMIX updates on top of per-agent Q-networks."""
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .mixers import EMBED, QMixer, vdn_mix
from .networks import HIDDEN, N_ACTIONS, OBS_SIZE, MLP, epsilon_greedy

ALGOS = ("iql", "vdn", "qmix")

# QMIX bootstraps through a state-dependent mixing gain that is free to grow
# with the agent utilities; with the shared learning rate and 200-step target
# syncs Q_tot drifts without bound, so it gets slower updates.
ALGO_DEFAULTS = {"qmix": {"lr": 1e-4, "target_every": 1000}}


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.99
    lr: float = 5e-4
    batch_size: int = 64
    buffer_size: int = 50_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_steps: int = 50_000
    target_every: int = 200
    warmup: int = 1_000
    grad_clip: float = 10.0
    double_q: bool = False
    hidden: int = HIDDEN
    embed: int = EMBED
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        for name in ("lr", "grad_clip", "adam_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("batch_size", "buffer_size", "target_every", "hidden", "embed"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.eps_steps < 1 or self.warmup < 0:
            raise ValueError("eps_steps >= 1 and warmup >= 0 required")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("adam betas must lie in [0, 1)")

    def epsilon(self, env_steps: int) -> float:
        frac = min(max(env_steps, 0) / self.eps_steps, 1.0)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def for_algo(cls, algo: str, **overrides) -> "Hyperparams":
        """Defaults for ``algo`` (see ALGO_DEFAULTS) updated with ``overrides``."""
        return cls(**{**ALGO_DEFAULTS.get(algo, {}), **overrides})

    @classmethod
    def field_types(cls) -> Dict[str, type]:
        return {f.name: type(f.default) for f in fields(cls)}


class GreedyPolicy:
    """Read-only copy of the agent networks used for acting."""

    def __init__(self, nets: Sequence[MLP]):
        self.nets = [n.copy() for n in nets]

    def q_values(self, observations) -> List[np.ndarray]:
        return [net(np.asarray(o, dtype=np.float64)[None, :])[0]
                for net, o in zip(self.nets, observations)]

    def act(self, observations, eps: float = 0.0, rng=None) -> List[int]:
        if rng is None:
            rng = np.random.default_rng(0)
        return [epsilon_greedy(q, eps, rng) for q in self.q_values(observations)]


class Learner:
    """Per-agent Q-networks, optional mixer, target copies and Adam state."""

    def __init__(self, algo: str, hp: Hyperparams = Hyperparams(), seed: int = 0,
                 n_agents: int = 2, obs_size: int = OBS_SIZE, n_actions: int = N_ACTIONS):
        if algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {algo!r}")
        self.algo, self.hp = algo, hp
        self.n_agents, self.obs_size, self.n_actions = n_agents, obs_size, n_actions
        rng = np.random.default_rng(seed)
        sizes = (obs_size, hp.hidden, hp.hidden, n_actions)
        self.nets = [MLP(sizes, rng) for _ in range(n_agents)]
        self.mixer = QMixer(n_agents, obs_size, hp.embed, rng) if algo == "qmix" else None
        self.target_nets = [n.copy() for n in self.nets]
        self.target_mixer = self.mixer.copy() if self.mixer is not None else None
        self.train_steps = 0
        self.adam_t = 0
        self.m = OrderedDict((k, np.zeros_like(v)) for k, v in self.params().items())
        self.v = OrderedDict((k, np.zeros_like(v)) for k, v in self.params().items())

    # -- parameter views ---------------------------------------------------

    def params(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for i, net in enumerate(self.nets):
            for k, v in net.params.items():
                out[f"agent{i}.{k}"] = v
        if self.mixer is not None:
            for k, v in self.mixer.params.items():
                out[f"mixer.{k}"] = v
        return out

    def target_params(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for i, net in enumerate(self.target_nets):
            for k, v in net.params.items():
                out[f"agent{i}.{k}"] = v
        if self.target_mixer is not None:
            for k, v in self.target_mixer.params.items():
                out[f"mixer.{k}"] = v
        return out

    def sync_targets(self):
        self.target_nets = [n.copy() for n in self.nets]
        if self.mixer is not None:
            self.target_mixer = self.mixer.copy()

    def policy(self) -> GreedyPolicy:
        return GreedyPolicy(self.nets)

    # -- loss --------------------------------------------------------------

    def targets(self, batch) -> np.ndarray:
        """Bootstrapped targets from the target networks: (B, n) for IQL, (B,) otherwise.

        With ``double_q`` the online networks pick the next action and the
        target networks evaluate it.
        """
        r = np.asarray(batch["reward"], dtype=np.float64)
        live = self.hp.gamma * (1.0 - np.asarray(batch["done"], dtype=np.float64))
        cols = []
        for i, net in enumerate(self.target_nets):
            q_next = net(batch["next_obs"][:, i])
            if self.hp.double_q:
                pick = self.nets[i](batch["next_obs"][:, i]).argmax(axis=1)
                cols.append(q_next[np.arange(len(pick)), pick])
            else:
                cols.append(q_next.max(axis=1))
        nxt = np.stack(cols, axis=1)
        if self.algo == "iql":
            return r[:, None] + live[:, None] * nxt
        if self.algo == "vdn":
            return r + live * vdn_mix(nxt)
        return r + live * self.target_mixer(nxt, batch["next_state"])

    def _chosen(self, batch) -> np.ndarray:
        acts = np.asarray(batch["actions"], dtype=np.int64)
        rows = np.arange(acts.shape[0])
        return np.stack([net(batch["obs"][:, i])[rows, acts[:, i]]
                         for i, net in enumerate(self.nets)], axis=1)

    def loss(self, batch, y: Optional[np.ndarray] = None) -> float:
        """Mean squared TD error without gradients."""
        if y is None:
            y = self.targets(batch)
        q = self._chosen(batch)
        if self.algo == "iql":
            return float(((q - y) ** 2).mean(axis=0).sum())
        q_tot = vdn_mix(q) if self.algo == "vdn" else self.mixer(q, batch["state"])
        return float(((q_tot - y) ** 2).mean())

    def loss_and_grads(self, batch, y: Optional[np.ndarray] = None):
        """Mean squared TD error and its exact gradient (targets held fixed)."""
        if y is None:
            y = self.targets(batch)
        acts = np.asarray(batch["actions"], dtype=np.int64)
        B = acts.shape[0]
        rows = np.arange(B)
        chosen, caches = [], []
        for i, net in enumerate(self.nets):
            out, cache = net.forward(batch["obs"][:, i])
            chosen.append(out[rows, acts[:, i]])
            caches.append((out, cache))
        q = np.stack(chosen, axis=1)
        grads = OrderedDict()
        if self.algo == "iql":
            err = q - y
            loss = float((err ** 2).mean(axis=0).sum())
            dq = 2.0 * err / B
        elif self.algo == "vdn":
            err = vdn_mix(q) - y
            loss = float((err ** 2).mean())
            dq = np.repeat((2.0 * err / B)[:, None], self.n_agents, axis=1)
        else:
            q_tot, mcache = self.mixer.forward(q, batch["state"])
            err = q_tot - y
            loss = float((err ** 2).mean())
            mgrads, dq = self.mixer.backward(mcache, 2.0 * err / B)
        for i, net in enumerate(self.nets):
            out, cache = caches[i]
            dout = np.zeros_like(out)
            dout[rows, acts[:, i]] = dq[:, i]
            for k, g in net.backward(cache, dout).items():
                grads[f"agent{i}.{k}"] = g
        if self.algo == "qmix":
            for k, g in mgrads.items():
                grads[f"mixer.{k}"] = g
        return loss, grads

    # -- update ------------------------------------------------------------

    def train_step(self, batch) -> float:
        loss, grads = self.loss_and_grads(batch)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite TD loss")
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        scale = min(1.0, self.hp.grad_clip / (norm + 1e-12))
        hp = self.hp
        self.adam_t += 1
        c1 = 1.0 - hp.beta1 ** self.adam_t
        c2 = 1.0 - hp.beta2 ** self.adam_t
        for k, p in self.params().items():
            g = grads[k] * scale
            m, v = self.m[k], self.v[k]
            m *= hp.beta1
            m += (1.0 - hp.beta1) * g
            v *= hp.beta2
            v += (1.0 - hp.beta2) * g * g
            p -= hp.lr * (m / c1) / (np.sqrt(v / c2) + hp.adam_eps)
        self.train_steps += 1
        if self.train_steps % hp.target_every == 0:
            self.sync_targets()
        return loss


def train_step(algo: str, learner: Learner, batch, hyperparams: Hyperparams = None):
    """Functional wrapper: one update of ``learner`` in place."""
    if algo != learner.algo:
        raise ValueError(f"learner was built for {learner.algo!r}, not {algo!r}")
    if hyperparams is not None and hyperparams != learner.hp:
        learner.hp = hyperparams
    return learner, learner.train_step(batch)
