"""Value-decomposition mixers: additive (VDN) and monotone hypernetwork (QMIX)."""
from collections import OrderedDict
from typing import Dict, Tuple

import numpy as np

EMBED = 32


def vdn_mix(q_chosen) -> np.ndarray:
    """Sum of per-agent values along the last axis."""
    return np.asarray(q_chosen, dtype=np.float64).sum(axis=-1)


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


class QMixer:
    """Q_tot = |w2(s)| . elu(|W1(s)| q + b1(s)) + b2(s).

    W1, b1 and w2 come from single affine hypernetworks on the global state;
    b2 from a two-layer hypernetwork with a ReLU.
    """

    NAMES = ("hw1", "hw1_b", "hb1", "hb1_b", "hw2", "hw2_b", "v1", "v1_b", "v2", "v2_b")

    def __init__(self, n_agents: int, state_size: int, embed: int = EMBED, rng=None,
                 params: Dict[str, np.ndarray] = None):
        self.n_agents, self.state_size, self.embed = int(n_agents), int(state_size), int(embed)
        shapes = self.shapes()
        if params is not None:
            self.params = OrderedDict((k, np.array(params[k], dtype=np.float64)) for k in self.NAMES)
            for k in self.NAMES:
                if self.params[k].shape != shapes[k]:
                    raise ValueError(f"mixer parameter {k} has shape {self.params[k].shape}")
            return
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = OrderedDict()
        for k in self.NAMES:
            shp = shapes[k]
            if len(shp) == 2:
                bound = np.sqrt(6.0 / (shp[0] + shp[1]))
                self.params[k] = rng.uniform(-bound, bound, size=shp)
            else:
                self.params[k] = np.zeros(shp)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        n, s, e = self.n_agents, self.state_size, self.embed
        return {"hw1": (s, n * e), "hw1_b": (n * e,), "hb1": (s, e), "hb1_b": (e,),
                "hw2": (s, e), "hw2_b": (e,), "v1": (s, e), "v1_b": (e,), "v2": (e, 1),
                "v2_b": (1,)}

    def copy(self) -> "QMixer":
        return QMixer(self.n_agents, self.state_size, self.embed,
                      params={k: v.copy() for k, v in self.params.items()})

    def forward(self, q: np.ndarray, s: np.ndarray):
        p = self.params
        q = np.asarray(q, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if s.shape[-1] != self.state_size:
            raise ValueError(f"state must have width {self.state_size}")
        B = q.shape[0]
        a1 = s @ p["hw1"] + p["hw1_b"]
        w1 = np.abs(a1).reshape(B, self.n_agents, self.embed)
        b1 = s @ p["hb1"] + p["hb1_b"]
        pre = np.einsum("bn,bne->be", q, w1) + b1
        h = _elu(pre)
        a2 = s @ p["hw2"] + p["hw2_b"]
        w2 = np.abs(a2)
        u = s @ p["v1"] + p["v1_b"]
        hv = np.maximum(u, 0.0)
        v = (hv @ p["v2"])[:, 0] + p["v2_b"][0]
        q_tot = (h * w2).sum(axis=1) + v
        return q_tot, (q, s, a1, w1, pre, h, a2, w2, u, hv)

    def __call__(self, q, s) -> np.ndarray:
        return self.forward(q, s)[0]

    def backward(self, cache, dq_tot: np.ndarray):
        """Gradients of sum(dq_tot * Q_tot); returns (param grads, dQ/dq)."""
        q, s, a1, w1, pre, h, a2, w2, u, hv = cache
        p = self.params
        B = q.shape[0]
        g = {}
        d = dq_tot[:, None]
        # b2 branch
        g["v2"] = hv.T @ d
        g["v2_b"] = np.array([dq_tot.sum()])
        du = (d @ p["v2"].T) * (u > 0)
        g["v1"] = s.T @ du
        g["v1_b"] = du.sum(axis=0)
        # w2 branch
        da2 = d * h * np.sign(a2)
        g["hw2"] = s.T @ da2
        g["hw2_b"] = da2.sum(axis=0)
        # hidden layer
        dpre = d * w2 * _elu_grad(pre)
        g["hb1"] = s.T @ dpre
        g["hb1_b"] = dpre.sum(axis=0)
        dw1 = q[:, :, None] * dpre[:, None, :]
        da1 = (dw1 * np.sign(a1).reshape(B, self.n_agents, self.embed)).reshape(B, -1)
        g["hw1"] = s.T @ da1
        g["hw1_b"] = da1.sum(axis=0)
        dq = np.einsum("be,bne->bn", dpre, w1)
        return OrderedDict((k, g[k]) for k in self.NAMES), dq


def qmix_mix(q_chosen, state, mixer: QMixer) -> float:
    """Q_tot for a single (q, state) pair."""
    q = np.asarray(q_chosen, dtype=np.float64).reshape(1, -1)
    s = np.asarray(state, dtype=np.float64).reshape(1, -1)
    return float(mixer(q, s)[0])
