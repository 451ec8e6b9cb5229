"""Evaluation tables, bicubic baseline and timing breakdown."""
import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .errors import ImageIOError
from .image_io import ImagePlane, read_png, write_png
from .metrics import psnr_y, shave_for_scale, ssim_y
from .model import MetaSR
from .resize import bicubic_resize
from .tensor import Tensor, no_grad
from .utils import find_images, format_scale, scaled_size

logger = logging.getLogger(__name__)


def degrade(hr: ImagePlane, r: float) -> ImagePlane:
    """LR image for scale r: bicubic downscale by 1/r to floor(size / r)."""
    inverse = 1.0 / r
    shape = (scaled_size(hr.height, inverse), scaled_size(hr.width, inverse))
    return bicubic_resize(hr, inverse, shape)


def degrade_tree(input_dir, output_dir, scales: Sequence[float], progress: bool = True) -> List[Path]:
    """
    Write LR copies of every PNG below input_dir, mirroring its layout.

    Each image gets one file per scale named <stem>_x<r>.png. Unreadable
    images are skipped with a warning.

    Returns:
        Paths written
    """
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    written = []
    for path in tqdm(find_images(input_dir), desc="Degrading", disable=not progress):
        try:
            hr = read_png(path)
        except ImageIOError as e:
            logger.warning("skipping %s: %s", path, e)
            continue
        target_dir = output_dir / path.parent.relative_to(input_dir)
        for r in scales:
            target = target_dir / f"{path.stem}_x{format_scale(r)}.png"
            written.append(write_png(degrade(hr, r), target))
    return written


@dataclass
class ScaleResult:
    """Mean metrics over a dataset at one scale."""

    scale: float
    images: int
    psnr: Optional[float]
    ssim: Optional[float]
    bicubic_psnr: float
    bicubic_ssim: float


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def evaluate(
    model: Optional[MetaSR],
    hr_images: Sequence[ImagePlane],
    scales: Sequence[float],
    shave_for: Callable[[float], int] = shave_for_scale,
    workers: int = 1,
    progress: bool = True,
) -> List[ScaleResult]:
    """
    PSNR/SSIM of the model and of bicubic upscaling for every scale.

    Args:
        model: Network to evaluate, or None for the bicubic column only
        hr_images: Ground-truth RGB planes
        scales: Scale factors
        shave_for: Border shave per scale
        workers: Images evaluated in parallel
        progress: Show a progress bar

    Returns:
        One ScaleResult per scale, in the given order
    """
    results = []
    for r in scales:
        shave = shave_for(r)

        def score(hr: ImagePlane):
            lr = degrade(hr, r)
            bicubic = bicubic_resize(lr, r)
            row = {"bicubic_psnr": psnr_y(bicubic, hr, shave), "bicubic_ssim": ssim_y(bicubic, hr, shave)}
            if model is not None:
                sr = model.super_resolve(lr, [r])[0]
                row["psnr"] = psnr_y(sr, hr, shave)
                row["ssim"] = ssim_y(sr, hr, shave)
            return row

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            rows = list(tqdm(
                pool.map(score, hr_images),
                total=len(hr_images),
                desc=f"Evaluating x{format_scale(r)}",
                disable=not progress,
            ))
        results.append(ScaleResult(
            scale=r,
            images=len(rows),
            psnr=_mean([row["psnr"] for row in rows]) if model is not None else None,
            ssim=_mean([row["ssim"] for row in rows]) if model is not None else None,
            bicubic_psnr=_mean([row["bicubic_psnr"] for row in rows]),
            bicubic_ssim=_mean([row["bicubic_ssim"] for row in rows]),
        ))
    return results


def write_results_csv(results: Sequence[ScaleResult], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(asdict(results[0]).keys()))
        writer.writeheader()
        for result in results:
            writer.writerow({k: ("" if v is None else v) for k, v in asdict(result).items()})
    return path


def format_results_table(results: Sequence[ScaleResult]) -> str:
    """Human-readable table of a results list."""
    lines = [f"{'scale':>6} | {'bicubic PSNR/SSIM':>20} | {'model PSNR/SSIM':>20}", "-" * 54]
    for res in results:
        bicubic = f"{res.bicubic_psnr:.2f} / {res.bicubic_ssim:.4f}"
        model = "-" if res.psnr is None else f"{res.psnr:.2f} / {res.ssim:.4f}"
        lines.append(f"{'x' + format_scale(res.scale):>6} | {bicubic:>20} | {model:>20}")
    return "\n".join(lines)


@dataclass
class BenchResult:
    """Wall-clock seconds of one inference, split by module."""

    scale: float
    feature_learning: float
    weight_prediction: float
    feature_mapping: float
    total: float
    cache_hits: int
    cache_misses: int

    @property
    def accounted(self) -> float:
        return self.feature_learning + self.weight_prediction + self.feature_mapping

    @property
    def weight_prediction_share(self) -> float:
        return self.weight_prediction / self.total if self.total > 0 else math.nan


def benchmark(model: MetaSR, image: ImagePlane, scales: Sequence[float]) -> List[BenchResult]:
    """
    Time full inference per scale; repeated scales reuse cached filters.

    Returns:
        One BenchResult per entry of scales
    """
    lr = Tensor(image.to_chw(model.extractor.dtype))
    results = []
    with no_grad():
        for r in scales:
            timings: Dict[str, float] = {}
            before = model.weight_cache.stats()
            start = time.perf_counter()
            model.forward(lr, r, timings)
            total = time.perf_counter() - start
            after = model.weight_cache.stats()
            results.append(BenchResult(
                scale=r,
                feature_learning=timings.get("feature_learning", 0.0),
                weight_prediction=timings.get("weight_prediction", 0.0),
                feature_mapping=timings.get("feature_mapping", 0.0),
                total=total,
                cache_hits=after["hits"] - before["hits"],
                cache_misses=after["misses"] - before["misses"],
            ))
    return results
