"""Numeric core: dense classifier with analytic gradients, SGD, Fisher diagonals, tabular Q."""

from .dense import (
    DenseNet,
    GradientBundle,
    backward,
    backward_ce,
    fisher_diagonal,
    forward,
    forward_cache,
    from_named_tensors,
    log_softmax,
    sgd_step,
    softmax,
    to_named_tensors,
)
from .qtable import (
    BinKey,
    ExactKey,
    IdentityKey,
    QTable,
    epsilon_greedy,
    greedy,
    q_update,
    q_update_batch,
)

__all__ = [
    "BinKey", "DenseNet", "ExactKey", "GradientBundle", "IdentityKey", "QTable", "backward",
    "backward_ce", "epsilon_greedy", "fisher_diagonal", "forward", "forward_cache",
    "from_named_tensors", "greedy", "log_softmax", "q_update", "q_update_batch", "sgd_step",
    "softmax", "to_named_tensors",
]
