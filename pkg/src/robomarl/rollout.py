"""Experience collection and evaluation across independent environment instances.

Every episode is identified by its global index; its environment seed and its
exploration rng both derive from (base seed, round, episode index), so the
merged stream does not depend on how episodes are spread over workers.
"""
import multiprocessing as mp
import signal
import traceback
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bots import bot_actions
from .env import N_ACTIONS, CombatEnv

EVAL_ROUND = 2 ** 31 - 1  # round id reserved for evaluation episodes


class RolloutError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkerPlan:
    n_workers: int = 1
    episodes: int = 4
    base_seed: int = 0
    round_index: int = 0
    first_episode: int = 0
    sync: bool = True

    def __post_init__(self):
        if self.n_workers < 1 or self.episodes < 1:
            raise ValueError("n_workers and episodes must be >= 1")
        if self.base_seed < 0 or self.round_index < 0 or self.first_episode < 0:
            raise ValueError("seeds and indices must be non-negative")

    def episode_seed(self, episode: int) -> int:
        ss = np.random.SeedSequence([self.base_seed, self.round_index, episode])
        return int(ss.generate_state(1)[0])

    def episode_ids(self) -> List[int]:
        return list(range(self.first_episode, self.first_episode + self.episodes))

    def assignment(self) -> List[List[int]]:
        """Contiguous blocks of global episode ids, one per worker."""
        ids = self.episode_ids()
        n = min(self.n_workers, len(ids))
        return [list(b) for b in np.array_split(np.array(ids, dtype=np.int64), n)]

    def worker_seeds(self) -> List[int]:
        return [self.episode_seed(block[0]) for block in self.assignment()]


@dataclass
class EpisodeStats:
    episode: int
    seed: int
    ret: float
    length: int
    verdict: str
    damage: Tuple[int, int]
    kills: Tuple[int, int]
    worker: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["damage"] = [int(v) for v in self.damage]
        d["kills"] = [int(v) for v in self.kills]
        return d


@dataclass
class EvalResult:
    win_rate: float
    mean_return: float
    mean_length: float
    wins: int
    draws: int
    n_episodes: int
    episodes: List[EpisodeStats] = field(default_factory=list, repr=False)


# ---------------------------------------------------------------- policies

class RandomPolicy:
    def act(self, observations, eps: float = 0.0, rng=None) -> List[int]:
        return [int(rng.integers(N_ACTIONS)) for _ in observations]


class BotPolicy:
    """The rule-based bot playing the red side."""

    def __init__(self, level):
        self.level = level

    def act_in_env(self, env: CombatEnv, eps: float, rng) -> List[int]:
        dec = {d.robot: d.action for d in bot_actions(self.level, env.world, env.candidate_seed,
                                                      env.arena, team=0,
                                                      candidates=env.candidates,
                                                      d_star=env.d_star)}
        return [dec.get(0, 0), dec.get(1, 0)]


def _act(policy, env: CombatEnv, obs, eps: float, rng) -> List[int]:
    if hasattr(policy, "act_in_env"):
        return list(policy.act_in_env(env, eps, rng))
    return list(policy.act(obs, eps, rng))


# ---------------------------------------------------------------- episodes

def run_episode(policy, seed: int, contexts: Optional[Mapping] = None, eps: float = 0.0,
                record: bool = True, env_kwargs: Optional[dict] = None, episode: int = 0,
                env: Optional[CombatEnv] = None, on_step=None):
    """Play one episode; returns (transitions, stats)."""
    env = env or CombatEnv(seed=seed, **(env_kwargs or {}))
    rng = np.random.default_rng([seed, 1])
    obs, _ = env.reset(contexts=contexts, seed=seed)
    state = env.state()
    transitions, ret, done, info = [], 0.0, False, {}
    while not done:
        actions = _act(policy, env, obs, eps, rng)
        next_obs, reward, done, info = env.step(actions)
        next_state = env.state()
        if record:
            transitions.append({"obs": np.stack(obs), "actions": np.array(actions, dtype=np.int64),
                                "reward": reward, "next_obs": np.stack(next_obs),
                                "done": done, "state": state, "next_state": next_state})
        if on_step is not None:
            on_step(env, actions, reward, info)
        ret += reward
        obs, state = next_obs, next_state
    stats = EpisodeStats(episode, seed, float(ret), env.steps, info["verdict"],
                         tuple(env.totals["damage"]), tuple(env.totals["kills"]))
    return transitions, stats


def _worker_run(args):
    worker, policy, plan, ids, contexts, eps, record, env_kwargs = args
    out_t, out_s = [], []
    try:
        env = CombatEnv(seed=plan.base_seed, instance_id=worker, **(env_kwargs or {}))
        for ep in map(int, ids):
            t, s = run_episode(policy, plan.episode_seed(ep), contexts, eps, record,
                               episode=ep, env=env)
            s.worker = worker
            out_t.append(t)
            out_s.append(s)
    except Exception as exc:  # reported with diagnostics by the collector
        return worker, None, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"
    return worker, out_t, out_s, None


def _merge(results, plan: WorkerPlan):
    results = sorted(results, key=lambda r: r[0])
    transitions, stats = [], []
    for worker, ts, ss, err in results:
        if err is not None:
            raise RolloutError(f"worker {worker} failed in round {plan.round_index}: {err}")
        for t in ts:
            transitions.extend(t)
        stats.extend(ss)
    if len(stats) != plan.episodes:
        raise RolloutError(f"expected {plan.episodes} episodes, got {len(stats)}")
    return transitions, stats


def _worker_init():
    # the parent handles interrupts and checkpoints; workers just get terminated
    signal.signal(signal.SIGINT, signal.SIG_IGN)
    signal.signal(signal.SIGTERM, signal.SIG_DFL)


class WorkerPool:
    """Persistent process pool (fork start method) for collection rounds."""

    def __init__(self, n_workers: int, always: bool = False):
        self.n_workers = int(n_workers)
        use = self.n_workers > 1 or always
        self._pool = (mp.get_context("fork").Pool(self.n_workers, initializer=_worker_init)
                      if use else None)

    def close(self):
        if self._pool is not None:
            self._pool.terminate()
            self._pool.join()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Ready:
    def __init__(self, value):
        self.value = value

    def get(self, timeout=None):
        return self.value


class PendingRound:
    def __init__(self, handle, plan: WorkerPlan):
        self.handle, self.plan = handle, plan

    def get(self):
        return _merge(self.handle.get(), self.plan)


def submit(policy, plan: WorkerPlan, contexts=None, eps: float = 0.0, record: bool = True,
           env_kwargs=None, pool: Optional[WorkerPool] = None, deferred: bool = False) -> PendingRound:
    """Start a collection round.

    With ``deferred`` and no process pool the round is run lazily on ``get()``
    so callers can train between submission and retrieval.
    """
    tasks = [(w, policy, plan, ids, dict(contexts or {}), eps, record, env_kwargs)
             for w, ids in enumerate(plan.assignment())]
    if pool is not None and pool._pool is not None:
        return PendingRound(pool._pool.map_async(_worker_run, tasks), plan)
    if deferred:
        return PendingRound(_Lazy(tasks), plan)
    return PendingRound(_Ready([_worker_run(t) for t in tasks]), plan)


class _Lazy:
    def __init__(self, tasks):
        self.tasks = tasks

    def get(self, timeout=None):
        return [_worker_run(t) for t in self.tasks]


def collect(policy, plan: WorkerPlan, contexts=None, eps: float = 0.0, record: bool = True,
            env_kwargs=None, pool: Optional[WorkerPool] = None):
    """Run ``plan.episodes`` episodes; results ordered by (worker, episode)."""
    if pool is None and plan.n_workers > 1:
        with WorkerPool(plan.n_workers) as own:
            return submit(policy, plan, contexts, eps, record, env_kwargs, own).get()
    return submit(policy, plan, contexts, eps, record, env_kwargs, pool).get()


def evaluate(policy, n_episodes: int, level="easy", seed: int = 0, contexts=None,
             n_workers: int = 1, env_kwargs=None, pool: Optional[WorkerPool] = None) -> EvalResult:
    """Greedy play against the level's bot; draws are not wins."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    ctx = dict(contexts or {})
    ctx["level"] = level
    plan = WorkerPlan(n_workers=n_workers, episodes=n_episodes, base_seed=seed,
                      round_index=EVAL_ROUND)
    _, stats = collect(policy, plan, ctx, 0.0, False, env_kwargs, pool)
    wins = sum(s.verdict == "red_wins" for s in stats)
    draws = sum(s.verdict == "draw" for s in stats)
    return EvalResult(wins / n_episodes, float(np.mean([s.ret for s in stats])),
                      float(np.mean([s.length for s in stats])), wins, draws, n_episodes, stats)
