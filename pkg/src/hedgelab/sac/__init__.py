"""Self-contained soft actor-critic on numpy."""

from .agent import SacAgent, SacHyper, q_backup, q_loss, sample_action
from .buffer import ReplayBuffer
from .mlp import Adam, Mlp, mse_loss_and_gradients, polyak_update
from .train import TrainResult, evaluation_seeds, run_episode, train

__all__ = [
    "Adam", "Mlp", "ReplayBuffer", "SacAgent", "SacHyper", "TrainResult",
    "evaluation_seeds", "mse_loss_and_gradients", "polyak_update", "q_backup",
    "q_loss", "run_episode", "sample_action", "train",
]
