"""
Ablation harness: trains the three branch configurations on one split and compares them
"""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.core.config_manager import RunConfig
from src.data.dataset import load_dataset
from src.metrics.report import METRIC_NAMES, format_metric_table
from src.model.sgmnet import ABLATION_ROWS, SGMNet
from src.pipeline.evaluator import evaluate_model
from src.pipeline.trainer import ProgressCallback, Trainer, split_dataset

logger = logging.getLogger(__name__)

ABLATION_FILE = "ablation.csv"
ABLATION_COLUMNS = ("row", "fp_g", "sp_feed") + METRIC_NAMES


@dataclass
class AblationResult:
    row: str
    fp_g: bool
    sp_feed: bool
    metrics: Dict[str, float]

    def csv_row(self) -> List[str]:
        return [self.row, str(int(self.fp_g)), str(int(self.sp_feed))] + [repr(self.metrics[n]) for n in METRIC_NAMES]


def parameter_delta(a: SGMNet, b: SGMNet) -> Dict[str, List[str]]:
    """Parameter names only in a, only in b, and present in both with different shapes"""
    shapes_a = {name: a.params[name].shape for name in a.params}
    shapes_b = {name: b.params[name].shape for name in b.params}
    shared = set(shapes_a) & set(shapes_b)
    return {
        "only_a": sorted(set(shapes_a) - shared),
        "only_b": sorted(set(shapes_b) - shared),
        "reshaped": sorted(n for n in shared if shapes_a[n] != shapes_b[n]),
    }


def write_ablation_csv(results: Sequence[AblationResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ABLATION_COLUMNS)
        for result in results:
            writer.writerow(result.csv_row())
    return path


def format_ablation_table(results: Sequence[AblationResult]) -> str:
    def mark(flag: bool) -> str:
        return "yes" if flag else "no"

    rows = [(r.row, [mark(r.fp_g), mark(r.sp_feed)] + [r.metrics[n] for n in METRIC_NAMES]) for r in results]
    return format_metric_table(rows, key_header="row", extra_headers=("FP_G", "SP_FEED"), title="Ablation")


def run_ablation(config: RunConfig, data_dir: Union[str, Path], out_dir: Union[str, Path],
                 rows: Sequence[str] = tuple(ABLATION_ROWS),
                 progress_callback: Optional[ProgressCallback] = None) -> List[AblationResult]:
    """Train every row with the same data, split and seed; evaluate each on the held-out ids"""
    out_dir = Path(out_dir)
    train_samples, holdout_ids = split_dataset(data_dir, config.train.holdout)
    holdout_samples = load_dataset(data_dir, holdout_ids)
    results = []
    for position, row in enumerate(rows):
        row_config = replace(config, model=config.model.with_ablation(row))
        use_fpm, feed = ABLATION_ROWS[row]
        logger.info("ablation row %s (fp_g=%s, sp_feed=%s)", row, use_fpm, feed)
        trainer = Trainer(row_config, out_dir / f"row_{row}")
        trainer.fit(train_samples)
        report = evaluate_model(trainer.model, holdout_samples, workers=config.train.workers)
        report.write_csv(out_dir / f"row_{row}" / "report.csv")
        results.append(AblationResult(row, use_fpm, feed, report.aggregate))
        if progress_callback:
            progress_callback(int(100 * (position + 1) / len(rows)), f"row {row} done")

    write_ablation_csv(results, out_dir / ABLATION_FILE)
    logger.info("\n%s", format_ablation_table(results))
    return results
