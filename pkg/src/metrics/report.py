"""
Per-image evaluation reports
Rows are kept in id order and aggregated in that order so reports are bit-stable.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import DataError
from src.data.image_io import read_alpha
from src.metrics.matting_metrics import conn_metric, grad_metric, mad, mse, sad

logger = logging.getLogger(__name__)

METRIC_NAMES = ("sad", "mse", "mad", "grad", "conn")
AGGREGATE_ID = "AGGREGATE"


@dataclass
class ImageMetrics:
    id: str
    sad: float
    mse: float
    mad: float
    grad: float
    conn: float

    def values(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in METRIC_NAMES)


def compute_image_metrics(image_id: str, pred: np.ndarray, gt: np.ndarray) -> ImageMetrics:
    return ImageMetrics(image_id, sad(pred, gt), mse(pred, gt), mad(pred, gt),
                        grad_metric(pred, gt), conn_metric(pred, gt))


@dataclass
class EvalReport:
    rows: List[ImageMetrics] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def aggregate(self) -> Dict[str, float]:
        """Arithmetic mean of every metric, summed in row order"""
        if not self.rows:
            return {name: 0.0 for name in METRIC_NAMES}
        totals = {name: 0.0 for name in METRIC_NAMES}
        for row in self.rows:
            for name in METRIC_NAMES:
                totals[name] += getattr(row, name)
        return {name: totals[name] / len(self.rows) for name in METRIC_NAMES}

    def to_dict(self) -> Dict[str, object]:
        return {"rows": [asdict(r) for r in self.rows], "aggregate": self.aggregate}

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("id",) + METRIC_NAMES)
            for row in self.rows:
                writer.writerow([row.id] + [repr(v) for v in row.values()])
            aggregate = self.aggregate
            writer.writerow([AGGREGATE_ID] + [repr(aggregate[name]) for name in METRIC_NAMES])
        return path

    def format_table(self, title: Optional[str] = None) -> str:
        return format_metric_table([(r.id, r.values()) for r in self.rows]
                                   + [(AGGREGATE_ID, tuple(self.aggregate[n] for n in METRIC_NAMES))],
                                   key_header="id", title=title)


def format_metric_table(rows: Iterable[Tuple[str, Sequence[float]]], key_header: str = "id",
                        title: Optional[str] = None, extra_headers: Sequence[str] = ()) -> str:
    """Aligned plain-text table; each row is (key, values) with values after any extra columns"""
    headers = [key_header] + list(extra_headers) + [n.upper() for n in METRIC_NAMES]
    body = []
    for key, values in rows:
        body.append([str(key)] + [v if isinstance(v, str) else f"{v:.4f}" for v in values])
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body)
    return "\n".join(lines)


def evaluate_pairs(pairs: Sequence[Tuple[str, np.ndarray, np.ndarray]], workers: int = 1) -> EvalReport:
    """Metrics for (id, pred, gt) triples; rows come back in input order for any worker count"""
    def run(pair):
        return compute_image_metrics(*pair)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, pairs))
    else:
        rows = [run(p) for p in pairs]
    return EvalReport(rows)


def _matte_dir(root: Path) -> Path:
    """Dataset roots keep mattes under alpha/; any other directory is read flat"""
    return root / "alpha" if (root / "alpha").is_dir() else root


def _stems(directory: Path) -> List[str]:
    return sorted(p.stem for p in directory.glob("*.png"))


def evaluate_dataset(pred_dir: Union[str, Path], gt_dir: Union[str, Path],
                     ids: Optional[Sequence[str]] = None, workers: int = 1) -> EvalReport:
    """Compare predicted and ground-truth mattes by id; missing counterparts are reported together"""
    pred_root, gt_root = _matte_dir(Path(pred_dir)), _matte_dir(Path(gt_dir))
    for directory in (pred_root, gt_root):
        if not directory.is_dir():
            raise DataError("matte directory not found", {"path": str(directory)})
    if ids is None:
        pred_ids, gt_ids = set(_stems(pred_root)), set(_stems(gt_root))
        missing = sorted(pred_ids ^ gt_ids)
        if missing:
            raise DataError("ids without a counterpart", {"ids": missing[:10], "count": len(missing)})
        ids = sorted(pred_ids)
    else:
        ids = sorted(ids)
        missing = [i for i in ids
                   if not (pred_root / f"{i}.png").is_file() or not (gt_root / f"{i}.png").is_file()]
        if missing:
            raise DataError("ids without a counterpart", {"ids": missing[:10], "count": len(missing)})
    if not ids:
        raise DataError("no mattes to evaluate", {"pred": str(pred_root), "gt": str(gt_root)})

    pairs = [(i, read_alpha(pred_root / f"{i}.png"), read_alpha(gt_root / f"{i}.png")) for i in ids]
    report = evaluate_pairs(pairs, workers=workers)
    logger.info("evaluated %d mattes, mean MAD %.4f", len(report), report.aggregate["mad"])
    return report
