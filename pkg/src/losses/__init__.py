"""
Loss stack for SGM-Net training
"""

from src.losses.matting_losses import (
    LossBreakdown, LossWeights, check_binary, compute_losses, loss_alpha, loss_d, loss_s, total_loss,
)

__all__ = [
    "LossBreakdown", "LossWeights", "check_binary", "compute_losses",
    "loss_alpha", "loss_d", "loss_s", "total_loss",
]
