"""Command-line entry point: ``robomarl {train,eval,play,bench}``.

Exit codes: 0 success, 2 configuration error, 3 runtime fault. A run stopped
by SIGINT/SIGTERM writes a checkpoint and exits with 128 + signal number.
"""
import argparse
import json
import logging
import os
import signal
import sys
from typing import List, Optional

from .config import COMMANDS, ConfigError, RunConfig, parse_config, write_resolved

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 2, 3
TRAJECTORY_SCHEMA = 1

log = logging.getLogger("robomarl")


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _ArgParser(prog="robomarl", description="2v2 robot combat simulator and MARL trainer")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="what to run (may also come from the config file)")
    p.add_argument("--config", help="INI-style run configuration")
    p.add_argument("--algo", help="iql, vdn or qmix")
    p.add_argument("--level", help="opponent bot: easy/middle/hard or 1/2/3")
    p.add_argument("--seed", type=int, help="single seed (overrides seeds)")
    p.add_argument("--workers", type=int, help="rollout worker processes")
    p.add_argument("--steps", type=int, help="training budget in env steps")
    p.add_argument("--episodes", type=int, help="episodes for eval/play")
    p.add_argument("--out", help="output directory")
    p.add_argument("--checkpoint", help="checkpoint to evaluate or play")
    p.add_argument("--context", action="append", default=[], metavar="KEY=VALUE",
                   help="context override, repeatable (e.g. VK1=0.1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    text = None
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    ctx = {}
    for item in args.context:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--context expects KEY=VALUE, got {item!r}")
        ctx[key.strip()] = value
    overrides = {"command": args.command, "algo": args.algo, "level": args.level,
                 "seed": args.seed, "workers": args.workers, "steps": args.steps,
                 "episodes": args.episodes, "out": args.out, "checkpoint": args.checkpoint}
    return parse_config(text, overrides, ctx)


class _StopFlag:
    def __init__(self):
        self.signum = 0

    def __call__(self) -> bool:
        return self.signum != 0

    def handler(self, signum, frame):
        self.signum = signum


# ----------------------------------------------------------------- commands

def cmd_train(cfg: RunConfig, stop: _StopFlag) -> int:
    from .trainer import TrainSettings, train

    for seed in cfg.seeds:
        out = cfg.out if len(cfg.seeds) == 1 else os.path.join(cfg.out, f"seed_{seed}")
        settings = TrainSettings(cfg.algo, cfg.steps, seed, cfg.level, dict(cfg.contexts),
                                 cfg.hyperparams, cfg.workers, cfg.episodes_per_round, cfg.sync,
                                 cfg.eval_every, cfg.eval_episodes)
        _, rows, interrupted = train(settings, out, stop)
        last = rows[-1] if rows else {}
        print(json.dumps({"seed": seed, "out": out, "steps": last.get("step", 0),
                          "eval_win_rate": last.get("eval_win_rate"),
                          "interrupted": interrupted}))
        if interrupted:
            return 128 + stop.signum
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    from .marl.checkpoint import load_checkpoint
    from .rollout import evaluate

    learner, _ = load_checkpoint(cfg.checkpoint)
    res = evaluate(learner.policy(), cfg.episodes, cfg.level, cfg.seed, cfg.contexts,
                   cfg.workers)
    summary = {"checkpoint": cfg.checkpoint, "level": cfg.level, "episodes": res.n_episodes,
               "win_rate": res.win_rate, "wins": res.wins, "draws": res.draws,
               "mean_return": res.mean_return, "mean_length": res.mean_length}
    with open(os.path.join(cfg.out, "eval.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary))
    return EXIT_OK


def _trajectory_line(episode, env, actions, reward, info) -> dict:
    w = env.world
    return {"schema_version": TRAJECTORY_SCHEMA, "episode": episode, "step": env.steps,
            "tick": w.tick, "poses": [[float(v) for v in w.bodies[i, :3]] for i in range(4)],
            "hp": [int(v) for v in w.hp], "bullets": [int(v) for v in w.bullets],
            "actions": [int(a) for a in actions], "shots": info["shots"],
            "rewards": info["rewards"], "verdict": info["verdict"]}


def cmd_play(cfg: RunConfig) -> int:
    from .rollout import BotPolicy, WorkerPlan, run_episode

    if cfg.checkpoint:
        from .marl.checkpoint import load_checkpoint
        policy = load_checkpoint(cfg.checkpoint)[0].policy()
    else:
        policy = BotPolicy(cfg.red_level or cfg.level)
    traj_dir = os.path.join(cfg.out, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    plan = WorkerPlan(episodes=cfg.episodes, base_seed=cfg.seed)
    ctx = dict(cfg.contexts, level=cfg.level)
    verdicts = {}
    for ep in plan.episode_ids():
        path = os.path.join(traj_dir, f"episode_{ep:04d}.jsonl")
        with open(path, "w") as fh:
            def on_step(env, actions, reward, info, ep=ep):
                fh.write(json.dumps(_trajectory_line(ep, env, actions, reward, info)) + "\n")
            _, stats = run_episode(policy, plan.episode_seed(ep), ctx, 0.0, record=False,
                                   episode=ep, on_step=on_step)
        verdicts[stats.verdict] = verdicts.get(stats.verdict, 0) + 1
    print(json.dumps({"episodes": cfg.episodes, "out": traj_dir, "verdicts": verdicts}))
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    from .bench import physics_throughput
    from .kernels import BACKEND, available_backends

    report = {"default_backend": BACKEND, "ticks": cfg.bench_ticks}
    for name in available_backends():
        report[f"{name}_ticks_per_s"] = round(physics_throughput(name, cfg.bench_ticks, cfg.seed), 1)
    with open(os.path.join(cfg.out, "bench.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(json.dumps(report))
    return EXIT_OK


# --------------------------------------------------------------------- main

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"robomarl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_resolved(cfg, cfg.out)
    except OSError as exc:
        print(f"robomarl: cannot write to {cfg.out}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    stop = _StopFlag()
    previous = {}
    if cfg.command == "train":
        previous = {s: signal.signal(s, stop.handler) for s in (signal.SIGINT, signal.SIGTERM)}
    try:
        if cfg.command == "train":
            return cmd_train(cfg, stop)
        if cfg.command == "eval":
            return cmd_eval(cfg)
        if cfg.command == "play":
            return cmd_play(cfg)
        return cmd_bench(cfg)
    except (FileNotFoundError, ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"robomarl: {cfg.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    finally:
        for s, h in previous.items():
            signal.signal(s, h)


if __name__ == "__main__":
    sys.exit(main())
