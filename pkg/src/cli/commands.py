"""
Command-line interface for SGMNet Desk
Subcommands: synth, train, eval, infer, composite, ablation
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from src import __version__
from src.core.config_manager import ConfigManager, RunConfig
from src.core.errors import ConfigError, MattingError
from src.core.log import setup_logging
from src.data.dataset import save_dataset
from src.data.synth import BACKGROUND_STYLES, SynthConfig, synth_dataset
from src.model.sgmnet import ABLATION_ROWS
from src.pipeline.ablation import run_ablation
from src.pipeline.evaluator import SPLITS, run_evaluation
from src.pipeline.inference import run_composite, run_infer
from src.pipeline.trainer import run_training

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# flag dest -> (config section, key)
_TRAIN_FLAGS = {
    "epochs": ("train", "epochs"),
    "batch": ("train", "batch"),
    "iterations": ("train", "iterations"),
    "seed": ("train", "seed"),
    "holdout": ("train", "holdout"),
    "band_radius": ("train", "band_radius"),
    "checkpoint_every": ("train", "checkpoint_every"),
    "dtype": ("train", "dtype"),
    "workers": ("train", "workers"),
    "lr": ("sgd", "lr"),
    "momentum": ("sgd", "momentum"),
    "weight_decay": ("sgd", "weight_decay"),
    "decay_every": ("sgd", "decay_every"),
    "decay_factor": ("sgd", "decay_factor"),
    "lambda_s": ("weights", "lambda_s"),
    "lambda_d": ("weights", "lambda_d"),
    "lambda_alpha": ("weights", "lambda_alpha"),
    "size": ("model", "input_size"),
}


def _add_train_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="dataset directory (index.txt + image/alpha/fg/bg)")
    parser.add_argument("--out", required=True, help="run directory")
    parser.add_argument("--config", help="YAML or JSON file with config section overrides")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--iterations", type=int, help="stop after this many SGD steps")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--holdout", type=float, help="fraction of ids held out for evaluation")
    parser.add_argument("--band-radius", type=int, help="radius of the unknown band used by the detail loss")
    parser.add_argument("--checkpoint-every", type=int, help="epochs between milestone checkpoints")
    parser.add_argument("--dtype", choices=("float32", "float64"))
    parser.add_argument("--workers", type=int, help="threads for per-image evaluation")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--decay-every", type=int, help="epochs between learning-rate decays")
    parser.add_argument("--decay-factor", type=float)
    parser.add_argument("--lambda-s", type=float)
    parser.add_argument("--lambda-d", type=float)
    parser.add_argument("--lambda-alpha", type=float)
    parser.add_argument("--size", type=int, help="training crop size, multiple of 32")
    parser.add_argument("--no-flip", action="store_true", help="disable random horizontal flips")


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then explicit flags"""
    overrides: Dict[str, Dict[str, Any]] = {}
    if getattr(args, "config", None):
        overrides = ConfigManager.load_overrides(args.config)
    config = RunConfig.from_dict(overrides)

    flags: Dict[str, Dict[str, Any]] = {}
    for dest, (section, key) in _TRAIN_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flags.setdefault(section, {})[key] = value
    if getattr(args, "no_flip", False):
        flags.setdefault("train", {})["flip"] = False
    config = config.merged(flags)
    row = getattr(args, "ablation", None)
    if row:
        config = RunConfig(config.model.with_ablation(row), config.sgd, config.weights, config.synth, config.train)
    return config


def cmd_synth(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.size < 32 or args.size % 32:
        parser.error(f"--size must be a positive multiple of 32, got {args.size}")
    if args.count < 1:
        parser.error("--count must be >= 1")
    try:
        cfg = SynthConfig(seed=args.seed, count=args.count, size=args.size,
                          strand_min=args.strands_min, strand_max=args.strands_max,
                          blob_complexity=args.blob_complexity,
                          backgrounds=tuple(args.backgrounds or BACKGROUND_STYLES))
    except ConfigError as e:
        parser.error(str(e))
    save_dataset(synth_dataset(cfg, workers=args.workers), args.out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        config = build_run_config(args)
    except ConfigError as e:
        parser.error(str(e))
    result = run_training(config, args.data, args.out)
    logger.info("final checkpoint %s (loss %.4f -> %.4f)",
                result['final_checkpoint'], result['first_total'], result['last_total'])
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if not args.gt_as_pred and not args.ckpt:
        parser.error("--ckpt is required unless --gt-as-pred is given")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    run_evaluation(args.data, args.report, ckpt=args.ckpt, split=args.split, holdout=args.holdout,
                   gt_as_pred=args.gt_as_pred, pred_dir=args.pred_out, workers=args.workers)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    run_infer(args.image, args.ckpt, args.alpha_out, args.foreground_out)
    return EXIT_OK


def cmd_composite(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    run_composite(args.image, args.ckpt, args.bg, args.out)
    return EXIT_OK


def cmd_ablation(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        config = build_run_config(args)
    except ConfigError as e:
        parser.error(str(e))
    ConfigManager(args.out).save_run_config(config)
    run_ablation(config, args.data, args.out, rows=args.rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgmnet", description="Trimap-free human matting toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="overrides SGMNET_LOG_LEVEL (DEBUG, INFO, WARNING, ...)")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic matting dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--count", type=int, default=64)
    synth.add_argument("--size", type=int, default=64)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--strands-min", type=int, default=4)
    synth.add_argument("--strands-max", type=int, default=12)
    synth.add_argument("--blob-complexity", type=int, default=3)
    synth.add_argument("--backgrounds", nargs="+", choices=BACKGROUND_STYLES)
    synth.add_argument("--workers", type=int, default=1)
    synth.set_defaults(handler=cmd_synth)

    train = sub.add_parser("train", help="train a model on a dataset")
    _add_train_arguments(train)
    train.add_argument("--ablation", choices=sorted(ABLATION_ROWS), help="branch configuration row")
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--ckpt")
    evaluate.add_argument("--report", required=True, help="CSV report path")
    evaluate.add_argument("--split", choices=SPLITS, default="holdout")
    evaluate.add_argument("--holdout", type=float, help="override the checkpoint's held-out fraction")
    evaluate.add_argument("--gt-as-pred", action="store_true", help="score the ground truth against itself")
    evaluate.add_argument("--pred-out", help="directory for predicted mattes")
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.set_defaults(handler=cmd_eval)

    infer = sub.add_parser("infer", help="predict an alpha matte for one image")
    infer.add_argument("--image", required=True)
    infer.add_argument("--ckpt", required=True)
    infer.add_argument("--alpha-out", required=True)
    infer.add_argument("--foreground-out", help="also write alpha * image")
    infer.set_defaults(handler=cmd_infer)

    composite = sub.add_parser("composite", help="place the predicted foreground on a new background")
    composite.add_argument("--image", required=True)
    composite.add_argument("--ckpt", required=True)
    composite.add_argument("--bg", required=True)
    composite.add_argument("--out", required=True)
    composite.set_defaults(handler=cmd_composite)

    ablation = sub.add_parser("ablation", help="train and compare the branch configurations")
    _add_train_arguments(ablation)
    ablation.add_argument("--rows", nargs="+", choices=sorted(ABLATION_ROWS), default=sorted(ABLATION_ROWS))
    ablation.set_defaults(handler=cmd_ablation)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args, parser)
    except MattingError as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
