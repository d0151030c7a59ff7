"""
Run orchestration: training, evaluation, inference and ablation
"""

from src.pipeline.ablation import (
    ABLATION_COLUMNS, ABLATION_FILE, AblationResult, format_ablation_table, parameter_delta, run_ablation,
    write_ablation_csv,
)
from src.pipeline.evaluator import SPLITS, evaluate_model, predict_samples, run_evaluation, select_ids
from src.pipeline.inference import (
    center_crop, extract_foreground, fit_background, load_input, predict_alpha, replace_background, run_composite,
    run_infer,
)
from src.pipeline.trainer import (
    LOG_COLUMNS, LOG_FILE, RESULT_FILE, Trainer, epoch_batches, read_train_log, run_training, split_dataset,
)

__all__ = [
    "ABLATION_COLUMNS", "ABLATION_FILE", "AblationResult", "format_ablation_table", "parameter_delta",
    "run_ablation", "write_ablation_csv",
    "SPLITS", "evaluate_model", "predict_samples", "run_evaluation", "select_ids",
    "center_crop", "extract_foreground", "fit_background", "load_input", "predict_alpha", "replace_background",
    "run_composite", "run_infer",
    "LOG_COLUMNS", "LOG_FILE", "RESULT_FILE", "Trainer", "epoch_batches", "read_train_log", "run_training",
    "split_dataset",
]
