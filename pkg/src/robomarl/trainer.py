"""Collect/train loop shared by the command line and the test-suite."""
import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from .marl.checkpoint import save_checkpoint
from .marl.learner import Hyperparams, Learner
from .marl.replay import ReplayBuffer
from .rollout import EvalResult, WorkerPlan, WorkerPool, evaluate, submit

SCHEMA_VERSION = 1
METRIC_FIELDS = ("step", "round", "episodes", "train_steps", "loss", "eps", "train_win_rate",
                 "eval_win_rate")


@dataclass
class TrainSettings:
    algo: str = "vdn"
    total_steps: int = 200_000
    seed: int = 0
    level: str = "easy"
    contexts: Dict = field(default_factory=dict)
    hp: Optional[Hyperparams] = None  # None: Hyperparams.for_algo(algo)
    n_workers: int = 1
    episodes_per_round: int = 4
    sync: bool = True
    eval_every: int = 10_000
    eval_episodes: int = 20


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunLog:
    """metrics.csv and episodes.jsonl writers for one run directory."""

    def __init__(self, out_dir: Optional[str]):
        self.out_dir = out_dir
        self.rows: List[dict] = []
        self._csv = self._jsonl = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            self._csv = open(os.path.join(out_dir, "metrics.csv"), "w", newline="")
            self._writer = csv.writer(self._csv, lineterminator="\n")
            self._writer.writerow(METRIC_FIELDS)
            self._jsonl = open(os.path.join(out_dir, "episodes.jsonl"), "w")

    def metric(self, row: dict):
        if self.rows and row["step"] <= self.rows[-1]["step"]:
            raise RuntimeError("metrics rows must be strictly increasing in step")
        self.rows.append(row)
        if self._csv:
            self._writer.writerow([_fmt(row.get(k)) for k in METRIC_FIELDS])
            self._csv.flush()

    def episodes(self, round_index: int, stats):
        if self._jsonl:
            for s in stats:
                rec = {"schema_version": SCHEMA_VERSION, "kind": "episode", "round": round_index}
                rec.update(s.as_dict())
                self._jsonl.write(json.dumps(rec, sort_keys=True) + "\n")
            self._jsonl.flush()

    def close(self):
        for fh in (self._csv, self._jsonl):
            if fh:
                fh.close()


def train(settings: TrainSettings, out_dir: Optional[str] = None,
          stop: Callable[[], bool] = lambda: False, learner: Optional[Learner] = None):
    """Run the collect/train loop to ``settings.total_steps`` env steps.

    Returns ``(learner, rows, interrupted)``. Checkpoints go to
    ``out_dir/checkpoint.bin`` after every evaluation and at the end.
    """
    hp = settings.hp if settings.hp is not None else Hyperparams.for_algo(settings.algo)
    learner = learner or Learner(settings.algo, hp, seed=settings.seed)
    buffer = ReplayBuffer(hp.buffer_size)
    sample_rng = np.random.default_rng([settings.seed, 7])
    contexts = dict(settings.contexts)
    contexts["level"] = settings.level
    log = RunLog(out_dir)
    pool = WorkerPool(settings.n_workers, always=not settings.sync)
    ckpt = os.path.join(out_dir, "checkpoint.bin") if out_dir else None
    env_steps = episodes = round_index = 0
    interrupted = False

    def plan_for(r, first):
        return WorkerPlan(settings.n_workers, settings.episodes_per_round, settings.seed, r, first)

    def start(r, first):
        return submit(learner.policy(), plan_for(r, first), contexts, hp.epsilon(env_steps),
                      pool=pool, deferred=not settings.sync)

    def save(tag):
        if ckpt:
            save_checkpoint(ckpt, learner, {"env_steps": env_steps, "episodes": episodes,
                                            "contexts": contexts, "seed": settings.seed,
                                            "tag": tag})

    try:
        pending = start(0, 0)
        while env_steps < settings.total_steps:
            eps = hp.epsilon(env_steps)
            transitions, stats = pending.get()
            before = buffer.added
            buffer.extend(transitions)
            prev_steps = env_steps
            env_steps += len(transitions)
            episodes += len(stats)
            if not settings.sync and env_steps < settings.total_steps:
                # overlap: next round acts with the pre-update snapshot
                pending = start(round_index + 1, episodes)
            n_train = max(0, buffer.added - max(before, hp.warmup))
            losses = []
            for _ in range(n_train):
                if len(buffer) < hp.batch_size:
                    break
                losses.append(learner.train_step(buffer.sample(hp.batch_size, sample_rng)))
                if stop():
                    break
            row = {"step": env_steps, "round": round_index, "episodes": episodes,
                   "train_steps": learner.train_steps,
                   "loss": float(np.mean(losses)) if losses else None, "eps": eps,
                   "train_win_rate": sum(s.verdict == "red_wins" for s in stats) / len(stats),
                   "eval_win_rate": None}
            if settings.eval_every and (env_steps // settings.eval_every > prev_steps // settings.eval_every
                                        or env_steps >= settings.total_steps):
                res = evaluate(learner.policy(), settings.eval_episodes, settings.level,
                               settings.seed, settings.contexts, settings.n_workers, pool=pool)
                row["eval_win_rate"] = res.win_rate
                save("eval")
            log.metric(row)
            log.episodes(round_index, stats)
            round_index += 1
            if stop():
                interrupted = True
                break
            if settings.sync and env_steps < settings.total_steps:
                pending = start(round_index, episodes)
        save("interrupted" if interrupted else "final")
    finally:
        log.close()
        if pool is not None:
            pool.close()
    return learner, log.rows, interrupted
