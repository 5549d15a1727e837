"""Binary checkpoint format with a JSON metadata sidecar.

Layout (all integers little-endian)::

    b"RMCK"                 magic
    u16 version
    u8  tag length, tag     algorithm name (ascii)
    u32 tensor count
    per tensor:
        u16 name length, name (utf-8)
        u8  ndim, u32 * ndim shape
        float64 * prod(shape) little-endian, C order
"""
import dataclasses
import json
import os
import struct
from collections import OrderedDict
from typing import Dict, Optional, Tuple

import numpy as np

from .learner import ALGOS, Hyperparams, Learner

MAGIC = b"RMCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_tensors(algo: str, tensors: "OrderedDict[str, np.ndarray]") -> bytes:
    tag = algo.encode("ascii")
    out = [MAGIC, struct.pack("<HB", VERSION, len(tag)), tag, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        key = name.encode("utf-8")
        out.append(struct.pack("<H", len(key)) + key)
        out.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


def decode_tensors(data: bytes) -> Tuple[str, "OrderedDict[str, np.ndarray]"]:
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    try:
        version, tag_len = struct.unpack_from("<HB", data, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 7
        algo = data[pos:pos + tag_len].decode("ascii")
        pos += tag_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = OrderedDict()
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + n].decode("utf-8")
            pos += n
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * 8
            if pos + size > len(data):
                raise CheckpointError("truncated checkpoint")
            tensors[name] = np.frombuffer(data, dtype="<f8", count=size // 8,
                                          offset=pos).reshape(shape).astype(np.float64)
            pos += size
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return algo, tensors


def learner_tensors(learner: Learner) -> "OrderedDict[str, np.ndarray]":
    out = OrderedDict()
    for k, v in learner.params().items():
        out[k] = v
    for k, v in learner.target_params().items():
        out[f"target.{k}"] = v
    return out


def save_checkpoint(path: str, learner: Learner, meta: Optional[Dict] = None) -> str:
    """Write ``path`` and ``path + '.json'`` atomically; returns ``path``."""
    data = encode_tensors(learner.algo, learner_tensors(learner))
    sidecar = {"format_version": VERSION, "algo": learner.algo,
               "hyperparams": learner.hp.as_dict(), "train_steps": learner.train_steps,
               "n_agents": learner.n_agents, "obs_size": learner.obs_size,
               "n_actions": learner.n_actions}
    sidecar.update(meta or {})
    for target, payload, mode in ((path, data, "wb"),
                                  (path + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n", "w")):
        tmp = target + ".tmp"
        with open(tmp, mode) as fh:
            fh.write(payload)
        os.replace(tmp, target)
    return path


def load_checkpoint(path: str) -> Tuple[Learner, Dict]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        algo, tensors = decode_tensors(fh.read())
    if algo not in ALGOS:
        raise CheckpointError(f"unknown algorithm tag {algo!r}")
    meta = {}
    if os.path.exists(path + ".json"):
        with open(path + ".json") as fh:
            meta = json.load(fh)
    known = Hyperparams.field_types()
    hp = Hyperparams(**{k: v for k, v in meta.get("hyperparams", {}).items() if k in known})
    w0 = tensors.get("agent0.W0")
    if w0 is None:
        raise CheckpointError("checkpoint has no agent0.W0 tensor")
    shape_hp = {"hidden": int(w0.shape[1])}
    if "mixer.hb1" in tensors:
        shape_hp["embed"] = int(tensors["mixer.hb1"].shape[1])
    hp = dataclasses.replace(hp, **shape_hp)
    n_agents = sum(1 for k in tensors if k.startswith("agent") and k.endswith(".W0"))
    n_layers = sum(1 for k in tensors if k.startswith("agent0.W"))
    n_actions = tensors[f"agent0.W{n_layers - 1}"].shape[1]
    learner = Learner(algo, hp, n_agents=n_agents, obs_size=w0.shape[0], n_actions=n_actions)
    _fill(learner.params(), tensors, "")
    _fill(learner.target_params(), tensors, "target.")
    learner.train_steps = int(meta.get("train_steps", 0))
    return learner, meta


def _fill(dest: "OrderedDict[str, np.ndarray]", tensors, prefix: str):
    for k, arr in dest.items():
        src = tensors.get(prefix + k)
        if src is None:
            raise CheckpointError(f"checkpoint is missing tensor {prefix + k}")
        if src.shape != arr.shape:
            raise CheckpointError(f"tensor {prefix + k} has shape {src.shape}, expected {arr.shape}")
        arr[...] = src
