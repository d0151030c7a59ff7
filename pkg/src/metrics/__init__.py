"""
Matting evaluation metrics and reports
"""

from src.metrics.matting_metrics import (
    conn_metric, conn_thresholds, connectivity_levels, gaussian_derivative_kernels, grad_metric,
    gradient_magnitude, largest_component, mad, mse, sad,
)
from src.metrics.report import (
    AGGREGATE_ID, METRIC_NAMES, EvalReport, ImageMetrics, compute_image_metrics, evaluate_dataset,
    evaluate_pairs, format_metric_table,
)

__all__ = [
    "conn_metric", "conn_thresholds", "connectivity_levels", "gaussian_derivative_kernels", "grad_metric",
    "gradient_magnitude", "largest_component", "mad", "mse", "sad",
    "AGGREGATE_ID", "METRIC_NAMES", "EvalReport", "ImageMetrics", "compute_image_metrics",
    "evaluate_dataset", "evaluate_pairs", "format_metric_table",
]
