"""
SGM-Net model
"""

from src.model.sgmnet import (
    ABLATION_ROWS, ForwardOutputs, ModelConfig, SGMNet, SemanticFeatures, load_model, save_model,
)

__all__ = [
    "ABLATION_ROWS", "ForwardOutputs", "ModelConfig", "SGMNet", "SemanticFeatures",
    "load_model", "save_model",
]
