"""Value-based multi-agent learners (IQL, VDN, QMIX) in plain numpy."""
from .checkpoint import load_checkpoint, save_checkpoint
from .learner import ALGOS, GreedyPolicy, Hyperparams, Learner, train_step
from .mixers import QMixer, qmix_mix, vdn_mix
from .networks import MLP, epsilon_greedy, q_forward, q_network
from .replay import ReplayBuffer

__all__ = ["ALGOS", "GreedyPolicy", "Hyperparams", "Learner", "MLP", "QMixer", "ReplayBuffer",
           "epsilon_greedy", "load_checkpoint", "q_forward", "q_network", "qmix_mix",
           "save_checkpoint", "train_step", "vdn_mix"]
