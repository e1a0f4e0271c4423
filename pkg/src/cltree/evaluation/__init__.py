"""Train/test protocol, transfer matrices and the derived metrics."""

from .metrics import (
    backward_transfer,
    final_performance,
    forward_transfer,
    online_performance,
)
from .protocol import Setting, apply, default_schedule, evaluate
from .results import Results, ResultsError, TransferMatrix

__all__ = [
    "Results", "ResultsError", "Setting", "TransferMatrix", "apply", "backward_transfer",
    "default_schedule", "evaluate", "final_performance", "forward_transfer",
    "online_performance",
]
