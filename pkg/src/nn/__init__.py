"""
Layers, parameters and optimizer for the SGM-Net toolkit
"""

from src.nn.layers import conv, conv_block, down_stage, se_block, up_stage
from src.nn.optim import SgdConfig, sgd_step
from src.nn.params import FORMAT_VERSION, MAGIC, ParamStore, load_checkpoint, save_checkpoint

__all__ = [
    "conv", "conv_block", "down_stage", "se_block", "up_stage",
    "SgdConfig", "sgd_step",
    "FORMAT_VERSION", "MAGIC", "ParamStore", "load_checkpoint", "save_checkpoint",
]
