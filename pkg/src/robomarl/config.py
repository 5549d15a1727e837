"""Run configuration: INI-style file plus command-line overrides.

A config file is a list of ``key = value`` lines (an implicit ``[run]``
section) optionally followed by ``[contexts]`` and ``[hyperparams]``
sections::

    command = train
    algo = vdn
    seeds = 0, 1, 2

    [contexts]
    VK1 = 0.1

    [hyperparams]
    lr = 0.0005
"""
import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

from .bots import normalize_level
from .env import COMBAT_KEYS, DYNAMICS_KEYS, ContextError, resolve_contexts
from .marl.learner import ALGOS, Hyperparams

COMMANDS = ("train", "eval", "play", "bench")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str = "train"
    algo: str = "vdn"
    level: str = "easy"
    seeds: Tuple[int, ...] = (0,)
    workers: int = 1
    steps: int = 200_000
    episodes_per_round: int = 4
    sync: bool = True
    eval_every: int = 10_000
    eval_episodes: int = 20
    episodes: int = 100
    red_level: str = ""
    bench_ticks: int = 20_000
    out: str = "runs/default"
    checkpoint: str = ""
    contexts: Dict[str, object] = field(default_factory=dict)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    @property
    def seed(self) -> int:
        return self.seeds[0]


RUN_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig)
                 if f.name not in ("contexts", "hyperparams"))


def _convert(key: str, raw, kind):
    if not isinstance(raw, str):
        raw = str(raw)
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
    return raw


def _context_value(raw: str):
    raw = str(raw).strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config(text: Optional[str] = None, overrides: Optional[Mapping] = None,
                 context_overrides: Optional[Mapping] = None,
                 hyper_overrides: Optional[Mapping] = None) -> RunConfig:
    """Resolve file text and flag overrides into a validated RunConfig.

    Flags win over file values; unknown keys raise ConfigError.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # context names are case-sensitive ("VK1")
    try:
        parser.read_string("[run]\n" + (text or ""))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(parser.sections()) - {"run", "contexts", "hyperparams"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    run = dict(parser["run"])
    if "seed" in run:
        if "seeds" in run:
            raise ConfigError("give either seed or seeds, not both")
        run["seeds"] = run.pop("seed")
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        run["seeds" if k == "seed" else k] = v
    bad = set(run) - set(RUN_KEYS)
    if bad:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(bad))}")

    types = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)
             if f.name in RUN_KEYS}
    values = {}
    for k, v in run.items():
        if k == "seeds":
            parts = [p for p in str(v).replace(",", " ").split()] if not isinstance(v, (list, tuple)) else v
            values[k] = tuple(_convert("seeds", p, int) for p in parts)
        else:
            values[k] = _convert(k, v, types[k])

    contexts = {k: _context_value(v) for k, v in (parser["contexts"].items()
                                                  if parser.has_section("contexts") else ())}
    contexts.update({k: _context_value(v) for k, v in (context_overrides or {}).items()})

    hyper_raw = dict(parser["hyperparams"]) if parser.has_section("hyperparams") else {}
    hyper_raw.update(hyper_overrides or {})
    hp_types = Hyperparams.field_types()
    bad = set(hyper_raw) - set(hp_types)
    if bad:
        raise ConfigError(f"unknown hyperparameter(s): {', '.join(sorted(bad))}")
    try:
        hp = Hyperparams.for_algo(str(values.get("algo", RunConfig.algo)).strip(),
                                  **{k: _convert(k, v, hp_types[k]) for k, v in hyper_raw.items()})
    except ValueError as exc:
        raise ConfigError(f"hyperparams: {exc}") from None

    cfg = RunConfig(contexts=contexts, hyperparams=hp, **values)
    return validate(cfg)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg.command!r}")
    if cfg.algo not in ALGOS:
        raise ConfigError(f"algo must be one of {ALGOS}, got {cfg.algo!r}")
    try:
        level = normalize_level(cfg.level)
        red = normalize_level(cfg.red_level) if cfg.red_level else ""
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not cfg.seeds or any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds must be non-negative integers")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError("seeds must be distinct")
    for name in ("workers", "steps", "episodes_per_round", "eval_episodes", "episodes",
                 "bench_ticks"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    if cfg.eval_every < 0:
        raise ConfigError("eval_every must be >= 0")
    contexts = dict(cfg.contexts)
    if "level" in contexts:
        # a level given as a context overrides the run level
        try:
            level = normalize_level(contexts.pop("level"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        resolve_contexts(contexts)
    except ContextError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.command == "eval" and not cfg.checkpoint:
        raise ConfigError("eval needs a checkpoint")
    return dataclasses.replace(cfg, level=level, red_level=red, contexts=contexts)


def resolved_contexts(cfg: RunConfig) -> Dict[str, object]:
    """Fully resolved dynamics/combat values (defaults included)."""
    ctx, combat = resolve_contexts(cfg.contexts)
    out = {k: getattr(ctx, k) for k in DYNAMICS_KEYS}
    out.update({k: getattr(combat, k) for k in COMBAT_KEYS})
    return out


def dump_config(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    lines = ["# resolved run configuration (defaults included)"]
    for k in RUN_KEYS:
        v = getattr(cfg, k)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    lines.append("")
    lines.append("[contexts]")
    for k, v in sorted(resolved_contexts(cfg).items()):
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    lines.append("")
    lines.append("[hyperparams]")
    for k, v in cfg.hyperparams.as_dict().items():
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"


def write_resolved(cfg: RunConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved_config.ini")
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))
    return path
