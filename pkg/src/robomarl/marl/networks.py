"""Small fully-connected networks with hand-written backpropagation."""
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import numpy as np

OBS_SIZE = 37
N_ACTIONS = 8
HIDDEN = 64


class MLP:
    """Affine layers with ReLU between them (none after the last)."""

    def __init__(self, sizes: Sequence[int], rng=None, params: Dict[str, np.ndarray] = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes!r}")
        if params is not None:
            self.params = OrderedDict((k, np.array(v, dtype=np.float64)) for k, v in params.items())
            self._check()
            return
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = OrderedDict()
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = np.sqrt(6.0 / (n_in + n_out))
            self.params[f"W{i}"] = rng.uniform(-bound, bound, size=(n_in, n_out))
            self.params[f"b{i}"] = np.zeros(n_out)

    def _check(self):
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if self.params[f"W{i}"].shape != (n_in, n_out) or self.params[f"b{i}"].shape != (n_out,):
                raise ValueError(f"parameter shapes do not match sizes {self.sizes}")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "MLP":
        return MLP(self.sizes, params={k: v.copy() for k, v in self.params.items()})

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Batch forward pass; returns the output and the per-layer inputs."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {h.shape[-1]}")
        cache = []
        for i in range(self.n_layers):
            cache.append(h)
            h = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: List[np.ndarray], dout: np.ndarray) -> Dict[str, np.ndarray]:
        """Gradients of sum(dout * output) with respect to every parameter."""
        grads = {}
        g = dout
        for i in reversed(range(self.n_layers)):
            h = cache[i]
            grads[f"W{i}"] = h.T @ g
            grads[f"b{i}"] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.params[f"W{i}"].T) * (h > 0)
        return grads


def q_network(rng, obs_size: int = OBS_SIZE, hidden: int = HIDDEN,
              n_actions: int = N_ACTIONS) -> MLP:
    return MLP((obs_size, hidden, hidden, n_actions), rng)


def q_forward(net: MLP, obs) -> np.ndarray:
    """Action values for a single observation."""
    x = np.asarray(obs, dtype=np.float64)
    if x.shape != (net.sizes[0],):
        raise ValueError(f"observation must have shape ({net.sizes[0]},), got {x.shape}")
    return net(x[None, :])[0]


def epsilon_greedy(q, eps: float, rng) -> int:
    """Uniform action with probability ``eps``, else the first argmax."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    q = np.asarray(q)
    if rng.random() < eps:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))
