"""Command-line interface argument parsers."""
import argparse
import logging
import math
from pathlib import Path
from typing import Any, Dict, List

from .feature_extractor import PRESETS
from .model import BACKENDS


def _clean_path(path: str) -> str:
    """Remove surrounding quotes from path."""
    path = path.strip()
    if path.startswith('"') and path.endswith('"'):
        path = path[1:-1]
    return path


def _scale(text: str) -> float:
    """argparse type for a scale factor: a finite real > 0."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid scale: {text!r}")
    if not math.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"scale must be > 0, got {text}")
    return value


def configure_logging(verbose: bool = False) -> None:
    """Route library log records to stderr as '[LEVEL] message'."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="[%(levelname)s] %(message)s",
    )


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="JSON run configuration (flags given here take precedence)"
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Random seed (default: 0)"
    )

    parser.add_argument(
        "--preset",
        type=str,
        default=None,
        choices=list(PRESETS),
        help="Feature extractor size: desk (small, CPU) or paper (16 blocks x 8 convs, 64 channels)"
    )

    parser.add_argument(
        "--backend",
        type=str,
        default=None,
        choices=list(BACKENDS),
        help="Upscale module: meta (Meta-Upscale), biconv or metabi baselines (default: meta)"
    )

    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="Single worker, synchronous batch production"
    )

    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads (default: CPU count, capped by METASR_THREADS)"
    )

    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Show informational log messages"
    )


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """RunConfig fields set on the command line (unset flags are None)."""
    mapping = {
        "seed": "seed",
        "preset": "preset",
        "backend": "backend",
        "deterministic": "deterministic",
        "threads": "threads",
        "train_dir": "train_dir",
        "val_dir": "val_dir",
        "output_dir": "output_dir",
        "epochs": "epochs",
        "iterations": "iterations_per_epoch",
        "batch_size": "batch_size",
        "patch_size": "lr_patch_size",
        "learning_rate": "learning_rate",
        "finetune_scale": "finetune_scale",
        "kernel_size": "kernel_size",
        "hidden": "hidden",
        "shave": "shave",
    }
    overrides = {field: getattr(args, name) for name, field in mapping.items() if hasattr(args, name)}
    if getattr(args, "no_scale_input", False):
        overrides["include_scale"] = False
    return overrides


def parse_train_args(argv: List[str] = None):
    """
    Parse arguments for train.py.

    Returns:
        Parsed arguments namespace with: train_dir, val_dir, output_dir, epochs,
        iterations, batch_size, patch_size, learning_rate, finetune_scale,
        kernel_size, hidden, no_scale_input, resume and the common flags
    """
    parser = argparse.ArgumentParser(
        description="Train a Meta-SR model that serves every scale factor."
    )

    parser.add_argument(
        "train_dir",
        type=str,
        nargs="?",
        default=None,
        help="Directory of HR training PNGs (or train_dir in --config)"
    )

    parser.add_argument("--val-dir", type=str, default=None, help="Directory of HR validation PNGs")
    parser.add_argument("--output-dir", type=str, default=None, help="Checkpoint and log directory (default: runs/metasr)")
    parser.add_argument("--epochs", type=int, default=None, help="Total epochs (default: 1000)")
    parser.add_argument("--iterations", type=int, default=None, help="Steps per epoch (default: 100)")
    parser.add_argument("--batch-size", type=int, default=None, help="Patch pairs per step (default: 16)")
    parser.add_argument("--patch-size", type=int, default=None, help="LR patch side (default: 50)")
    parser.add_argument("--learning-rate", type=float, default=None, help="Initial Adam learning rate (default: 1e-4)")
    parser.add_argument(
        "--finetune-scale",
        type=_scale,
        default=None,
        help="Train on this single scale instead of sampling 1.1..4.0"
    )
    parser.add_argument("--kernel-size", type=int, default=None, help="Predicted filter size k (default: 3)")
    parser.add_argument("--hidden", type=int, default=None, help="Weight-prediction hidden width (default: 256)")
    parser.add_argument(
        "--no-scale-input",
        action="store_true",
        help="Feed only the fractional offsets (no 1/r) to the weight-prediction network"
    )
    parser.add_argument("--resume", type=str, default=None, help="Checkpoint to resume training from")

    _add_common_args(parser)
    args = parser.parse_args(argv)

    if args.train_dir:
        args.train_dir = _clean_path(args.train_dir)
    if args.resume:
        args.resume = _clean_path(args.resume)

    return args


def parse_sr_args(argv: List[str] = None):
    """
    Parse arguments for sr.py.

    Returns:
        Parsed arguments namespace with: input_file, checkpoint, scales, output
    """
    parser = argparse.ArgumentParser(
        description="Upscale an image by one or more arbitrary scale factors with a single checkpoint."
    )

    parser.add_argument(
        "input_file",
        type=str,
        help="Path to input PNG"
    )

    parser.add_argument(
        "--checkpoint",
        type=str,
        required=True,
        help="Trained Meta-SR checkpoint"
    )

    parser.add_argument(
        "--scale",
        dest="scales",
        type=_scale,
        action="append",
        required=True,
        help="Scale factor (repeat for continuous zoom: --scale 1.5 --scale 2.7)"
    )

    parser.add_argument(
        "--output",
        type=str,
        default=None,
        help="Output .png (single scale) or directory (default: next to the input, suffixed _x<r>)"
    )

    parser.add_argument("--verbose", action="store_true", help="Show informational log messages")

    args = parser.parse_args(argv)
    args.input_file = _clean_path(args.input_file)
    args.checkpoint = _clean_path(args.checkpoint)
    if args.output:
        args.output = _clean_path(args.output)
        if len(args.scales) > 1 and args.output.lower().endswith(".png"):
            parser.error("--output must be a directory when several --scale values are given")

    return args


def parse_eval_args(argv: List[str] = None):
    """
    Parse arguments for evaluate.py.

    Returns:
        Parsed arguments namespace with: dataset_dir, checkpoint, scales,
        bicubic_only, csv, shave and the common flags
    """
    parser = argparse.ArgumentParser(
        description="Per-scale Y-channel PSNR/SSIM of a checkpoint and of bicubic upscaling."
    )

    parser.add_argument(
        "dataset_dir",
        type=str,
        help="Directory of HR test PNGs (LR inputs are generated by bicubic degradation)"
    )

    parser.add_argument("--checkpoint", type=str, default=None, help="Trained Meta-SR checkpoint")

    parser.add_argument(
        "--scale",
        dest="scales",
        type=_scale,
        action="append",
        default=None,
        help="Scale factor, repeatable (default: the configured val_scales)"
    )

    parser.add_argument(
        "--bicubic-only",
        action="store_true",
        help="Only compute the bicubic baseline column (no checkpoint needed)"
    )

    parser.add_argument("--csv", type=str, default=None, help="CSV output path (default: <dataset>_eval.csv in cwd)")
    parser.add_argument("--shave", type=str, default=None, help="Border shave: 'ceil' (ceil(r)) or a pixel count")

    _add_common_args(parser)
    args = parser.parse_args(argv)

    args.dataset_dir = _clean_path(args.dataset_dir)
    if not Path(args.dataset_dir).is_dir():
        parser.error(f"Dataset directory not found: {args.dataset_dir}")
    if args.checkpoint is None and not args.bicubic_only:
        parser.error("--checkpoint is required unless --bicubic-only is given")

    return args


def parse_degrade_args(argv: List[str] = None):
    """
    Parse arguments for degrade.py.

    Returns:
        Parsed arguments namespace with: input_dir, output_dir, scales
    """
    parser = argparse.ArgumentParser(
        description="Write bicubic-downscaled LR copies of an image tree."
    )

    parser.add_argument("input_dir", type=str, help="Directory of HR PNGs")

    parser.add_argument(
        "--output-dir",
        type=str,
        default=None,
        help="Output directory (default: {input_dir}_LR/)"
    )

    parser.add_argument(
        "--scale",
        dest="scales",
        type=_scale,
        action="append",
        required=True,
        help="Downscale factor, repeatable"
    )

    parser.add_argument("--verbose", action="store_true", help="Show informational log messages")

    args = parser.parse_args(argv)
    args.input_dir = _clean_path(args.input_dir)
    if not Path(args.input_dir).is_dir():
        parser.error(f"Input directory not found: {args.input_dir}")
    if args.output_dir is None:
        input_path = Path(args.input_dir)
        args.output_dir = str(input_path.parent / f"{input_path.name}_LR")
    else:
        args.output_dir = _clean_path(args.output_dir)

    return args


def parse_bench_args(argv: List[str] = None):
    """
    Parse arguments for bench.py.

    Returns:
        Parsed arguments namespace with: image, size, checkpoint, scales and the common flags
    """
    parser = argparse.ArgumentParser(
        description="Time feature learning, weight prediction and feature mapping per scale."
    )

    parser.add_argument(
        "image",
        type=str,
        nargs="?",
        default=None,
        help="Input PNG (default: random SIZExSIZE image)"
    )

    parser.add_argument("--size", type=int, default=100, help="Side of the random input (default: 100)")
    parser.add_argument(
        "--checkpoint",
        type=str,
        default=None,
        help="Checkpoint to time (default: freshly initialized model of --preset)"
    )

    parser.add_argument(
        "--scale",
        dest="scales",
        type=_scale,
        action="append",
        default=None,
        help="Scale factor, repeatable; repeating a scale shows weight-cache reuse (default: 2 2)"
    )

    _add_common_args(parser)
    args = parser.parse_args(argv)

    if args.image:
        args.image = _clean_path(args.image)
    if args.size < 1:
        parser.error(f"--size must be >= 1, got {args.size}")
    if args.scales is None:
        args.scales = [2.0, 2.0]

    return args
