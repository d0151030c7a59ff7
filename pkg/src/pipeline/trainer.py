"""
Training loop for SGMNet Desk
Runs seeded SGD over a sample list and records logs, checkpoints and a run summary
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.config_manager import ConfigManager, RunConfig
from src.core.errors import DataError
from src.data.compositing import MattingSample
from src.data.dataset import augment, holdout_split, load_dataset, make_batch, read_index
from src.losses.matting_losses import LossBreakdown, compute_losses
from src.model.sgmnet import SGMNet, save_model
from src.nn.optim import sgd_step
from src.tensor import GradTape, backward

logger = logging.getLogger(__name__)

LOG_FILE = "train_log.csv"
RESULT_FILE = "run_result.json"
LOG_COLUMNS = ("epoch", "iteration", "lr", "l_s", "l_d", "l_alpha", "l_c", "total")

ProgressCallback = Callable[[int, str], None]


def epoch_batches(count: int, batch: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches covering every sample once; the last batch may be short"""
    order = rng.permutation(count)
    return [order[i:i + batch] for i in range(0, count, batch)]


class Trainer:
    """Fit an SGMNet on in-memory samples and keep the run directory up to date"""

    def __init__(self, config: RunConfig, run_dir: Union[str, Path], model: Optional[SGMNet] = None):
        self.config = config
        self.run_dir = Path(run_dir)
        self.config_manager = ConfigManager(self.run_dir)
        train = config.train
        self.model = model or SGMNet(config.model, seed=train.seed, dtype=train.dtype).initialize()
        self.history: List[Dict[str, float]] = []

    @property
    def crop_size(self) -> int:
        return self.config.train.crop_size or self.config.model.input_size

    def _checkpoint(self, name: str, epoch: int, iteration: int) -> Path:
        path = self.config_manager.get_checkpoint_dir() / name
        extra = {
            "train": self.config.train.to_dict(),
            "sgd": self.config.sgd.to_dict(),
            "weights": self.config.weights.to_dict(),
            "epoch": epoch,
            "iteration": iteration,
        }
        save_model(path, self.model, extra)
        logger.debug("wrote checkpoint %s", path)
        return path

    def step(self, samples: Sequence[MattingSample], epoch: int) -> LossBreakdown:
        """One forward/backward/update on a list of already augmented samples"""
        train = self.config.train
        batch = make_batch(samples, train.band_radius, dtype=self.model.params.dtype)
        if not batch.mask.any():
            logger.warning("batch %s has an empty transition mask", ",".join(batch.ids))
        tape = GradTape()
        outputs = self.model.forward(batch.image, tape)
        losses = compute_losses(outputs, batch, self.config.weights)
        grads = backward(tape, losses.total_tensor)
        sgd_step(self.model.params, grads, self.config.sgd, epoch)
        return losses

    def fit(self, samples: Sequence[MattingSample],
            progress_callback: Optional[ProgressCallback] = None) -> Dict[str, Any]:
        """
        Train for the configured epochs or iteration cap.

        Args:
            samples: training samples, all at least crop_size on each side
            progress_callback: Callback for progress updates (value, message)

        Returns:
            Dictionary with the run summary, also saved as run_result.json
        """
        if not samples:
            raise DataError("no training samples")
        train = self.config.train
        self.config_manager.save_run_config(self.config)
        rng = np.random.default_rng([train.seed, 1])

        per_epoch = math.ceil(len(samples) / train.batch)
        planned = train.epochs * per_epoch
        total_iterations = min(planned, train.iterations) if train.iterations else planned

        result: Dict[str, Any] = {
            'success': False,
            'run_dir': str(self.run_dir),
            'samples': len(samples),
            'ablation_row': self.config.model.ablation_row,
            'checkpoints': [],
        }
        iteration = 0
        epoch = 0
        log_path = self.run_dir / LOG_FILE
        with open(log_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(LOG_COLUMNS)
            while epoch < train.epochs and iteration < total_iterations:
                lr = self.config.sgd.lr_at(epoch)
                sums = np.zeros(5)
                steps = 0
                for indices in epoch_batches(len(samples), train.batch, rng):
                    if iteration >= total_iterations:
                        break
                    batch = [augment(samples[i], rng, self.crop_size, train.flip) for i in indices]
                    losses = self.step(batch, epoch)
                    iteration += 1
                    steps += 1
                    row = losses.as_row()
                    sums += [row[k] for k in ("l_s", "l_d", "l_alpha", "l_c", "total")]
                    writer.writerow([epoch, iteration, repr(lr)] + [repr(row[k]) for k in LOG_COLUMNS[3:]])
                    self.history.append(dict(epoch=epoch, iteration=iteration, lr=lr, **row))
                    logger.debug("iter %d loss %.6f", iteration, losses.total)
                    if not np.isfinite(losses.total):
                        raise DataError("training diverged", {"iteration": iteration, "total": losses.total})
                means = sums / max(steps, 1)
                logger.info("epoch %d lr %.4g  l_s %.4f  l_d %.4f  l_alpha %.4f  total %.4f",
                            epoch + 1, lr, means[0], means[1], means[2], means[4])
                epoch += 1
                if epoch % train.checkpoint_every == 0:
                    result['checkpoints'].append(str(self._checkpoint(f"epoch_{epoch:03d}.ckpt", epoch, iteration)))
                if progress_callback:
                    progress_callback(int(100 * iteration / total_iterations), f"epoch {epoch} done")

        final = self._checkpoint("final.ckpt", epoch, iteration)
        result['checkpoints'].append(str(final))
        result.update({
            'success': True,
            'final_checkpoint': str(final),
            'epochs_completed': epoch,
            'iterations': iteration,
            'first_total': self.history[0]['total'],
            'last_total': self.history[-1]['total'],
            'train_log': str(log_path),
        })
        self.save_result(result)
        if progress_callback:
            progress_callback(100, "training complete")
        return result

    def save_result(self, result: Dict[str, Any]):
        with open(self.run_dir / RESULT_FILE, 'w', encoding='utf-8') as f:
            json.dump(result, f, indent=2, ensure_ascii=False)


def read_train_log(path: Union[str, Path]) -> List[Dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


def split_dataset(data_dir: Union[str, Path], holdout: float):
    """Load the training part of a dataset and return it with the held-out ids"""
    train_ids, holdout_ids = holdout_split(read_index(data_dir), holdout)
    return load_dataset(data_dir, train_ids), holdout_ids


def run_training(config: RunConfig, data_dir: Union[str, Path], run_dir: Union[str, Path],
                 progress_callback: Optional[ProgressCallback] = None) -> Dict[str, Any]:
    ConfigManager(run_dir).save_run_config(config)
    samples, holdout_ids = split_dataset(data_dir, config.train.holdout)
    logger.info("training on %d samples, %d held out", len(samples), len(holdout_ids))
    trainer = Trainer(config, run_dir)
    result = trainer.fit(samples, progress_callback)
    result['data_dir'] = str(data_dir)
    result['holdout_ids'] = holdout_ids
    trainer.save_result(result)
    return result
