"""
Checkpoint evaluation on a dataset split
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.config_manager import TrainConfig
from src.core.errors import ConfigError, DataError
from src.data.compositing import MattingSample
from src.data.dataset import holdout_split, load_dataset, read_index
from src.data.image_io import write_image
from src.metrics.report import EvalReport, evaluate_pairs
from src.model.sgmnet import SGMNet, load_model
from src.pipeline.inference import predict_alpha

logger = logging.getLogger(__name__)

SPLITS = ("holdout", "all")


def select_ids(data_dir: Union[str, Path], split: str, holdout: float) -> List[str]:
    if split not in SPLITS:
        raise ConfigError(f"unknown split '{split}'", {"choices": list(SPLITS)})
    ids = read_index(data_dir)
    if split == "all":
        return ids
    return holdout_split(ids, holdout)[1]


def predict_samples(model: Optional[SGMNet], samples: Sequence[MattingSample]) -> List[Tuple[str, np.ndarray, np.ndarray]]:
    """(id, pred, gt) triples; without a model the ground truth is its own prediction"""
    pairs = []
    for sample in sorted(samples, key=lambda s: s.id):
        pred = sample.alpha if model is None else predict_alpha(model, sample.image)
        pairs.append((sample.id, pred, sample.alpha))
    return pairs


def evaluate_model(model: Optional[SGMNet], samples: Sequence[MattingSample], workers: int = 1,
                   pred_dir: Optional[Union[str, Path]] = None) -> EvalReport:
    pairs = predict_samples(model, samples)
    if pred_dir is not None:
        for sample_id, pred, _ in pairs:
            write_image(Path(pred_dir) / f"{sample_id}.png", pred)
    return evaluate_pairs(pairs, workers=workers)


def run_evaluation(data_dir: Union[str, Path], report_path: Union[str, Path], ckpt: Optional[Union[str, Path]] = None,
                   split: str = "holdout", holdout: Optional[float] = None, gt_as_pred: bool = False,
                   pred_dir: Optional[Union[str, Path]] = None, workers: int = 1) -> EvalReport:
    """
    Evaluate a checkpoint (or the ground truth itself) on a dataset split and write the CSV report.

    The held-out fraction defaults to the one stored in the checkpoint's training config.
    """
    model = None
    stored_holdout = TrainConfig().holdout
    if not gt_as_pred:
        if ckpt is None:
            raise ConfigError("a checkpoint is required unless the ground truth is evaluated against itself")
        model, config = load_model(ckpt)
        stored_holdout = config.get("train", {}).get("holdout", stored_holdout)
    fraction = stored_holdout if holdout is None else holdout
    ids = select_ids(data_dir, split, fraction)
    if not ids:
        raise DataError("split selects no images", {"split": split, "holdout": fraction})
    samples = load_dataset(data_dir, ids)
    report = evaluate_model(model, samples, workers=workers, pred_dir=pred_dir)
    report.write_csv(report_path)
    logger.info("\n%s", report.format_table(title=f"{split} split, {len(report)} images"))
    return report
