"""Training data: scale sampling, HR-first patch extraction, augmentation."""
import logging
import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .errors import ImageIOError
from .image_io import ImagePlane, read_png
from .resize import resize_array
from .utils import find_images, scaled_size

logger = logging.getLogger(__name__)

BATCH_SIZE = 16
LR_PATCH_SIZE = 50
MIN_TENTHS = 11
MAX_TENTHS = 40

BASE_LEARNING_RATE = 1e-4
DECAY_EVERY = 200
DECAY_FACTOR = 0.5


def training_scales() -> List[float]:
    """The 30 training scales 1.1, 1.2, ..., 4.0, built from integer tenths."""
    return [t / 10 for t in range(MIN_TENTHS, MAX_TENTHS + 1)]


def sample_scale(rng: np.random.Generator) -> float:
    """Uniform draw from training_scales()."""
    return int(rng.integers(MIN_TENTHS, MAX_TENTHS + 1)) / 10


def lr_schedule(epoch: int, base: float = BASE_LEARNING_RATE, every: int = DECAY_EVERY, factor: float = DECAY_FACTOR) -> float:
    """Learning rate for an epoch: base halved every ``every`` epochs."""
    return base * factor ** (epoch // every)


def batch_rng(seed: int, step: int) -> np.random.Generator:
    """Generator for one training step; a pure function of (seed, step)."""
    return np.random.default_rng([seed, step])


@dataclass
class PatchBatch:
    """LR/HR patch pairs sharing one scale factor."""

    lr_patches: np.ndarray   # (N, 3, P, P)
    hr_patches: np.ndarray   # (N, 3, floor(P·r), floor(P·r))
    scale: float

    def __len__(self):
        return self.lr_patches.shape[0]


def augment(array: np.ndarray, flip: int, rotate: bool) -> np.ndarray:
    """
    Apply one of {identity, h-flip, v-flip} × {0°, 90°} to an H×W×C array.

    Args:
        array: Patch
        flip: 0 none, 1 horizontal, 2 vertical
        rotate: Rotate by 90° after flipping
    """
    if flip == 1:
        array = array[:, ::-1]
    elif flip == 2:
        array = array[::-1, :]
    if rotate:
        array = np.rot90(array)
    return np.ascontiguousarray(array)


def make_batch(
    hr_images: Sequence[ImagePlane],
    scale: float,
    rng: np.random.Generator,
    batch_size: int = BATCH_SIZE,
    lr_patch_size: int = LR_PATCH_SIZE,
    dtype=np.float32,
) -> PatchBatch:
    """
    Crop HR patches of side floor(P·r), downscale each to exactly P×P.

    Images smaller than the HR patch are skipped with a warning. Every pair is
    augmented identically on both sides.

    Args:
        hr_images: Source RGB planes
        scale: Shared scale factor r
        rng: Generator driving image choice, crop position and augmentation
        batch_size: Number of pairs N
        lr_patch_size: LR side P

    Returns:
        PatchBatch

    Raises:
        ValueError: If no image is large enough
    """
    hr_size = scaled_size(lr_patch_size, scale)
    eligible = []
    for index, img in enumerate(hr_images):
        if img.height >= hr_size and img.width >= hr_size:
            eligible.append(img)
        else:
            logger.warning(
                "skipping image %d (%dx%d): smaller than the %dx%d HR patch for scale %s",
                index, img.height, img.width, hr_size, hr_size, scale,
            )
    if not eligible:
        raise ValueError(f"no training image is at least {hr_size}x{hr_size} for scale {scale}")

    lr_batch = np.empty((batch_size, 3, lr_patch_size, lr_patch_size), dtype=dtype)
    hr_batch = np.empty((batch_size, 3, hr_size, hr_size), dtype=dtype)
    for n in range(batch_size):
        img = eligible[int(rng.integers(len(eligible)))]
        top = int(rng.integers(img.height - hr_size + 1))
        left = int(rng.integers(img.width - hr_size + 1))
        flip = int(rng.integers(3))
        rotate = bool(rng.integers(2))

        hr = img.pixels[top:top + hr_size, left:left + hr_size]
        lr = np.clip(resize_array(hr, 1.0 / scale, (lr_patch_size, lr_patch_size)), 0.0, 1.0)
        hr_batch[n] = augment(hr, flip, rotate).transpose(2, 0, 1)
        lr_batch[n] = augment(lr, flip, rotate).transpose(2, 0, 1)
    return PatchBatch(lr_batch, hr_batch, scale)


class BatchProducer:
    """
    Yields training batches for consecutive global steps.

    Batches depend only on (seed, step), so the threaded producer (bounded
    queue) and the synchronous one return identical sequences.
    """

    def __init__(
        self,
        hr_images: Sequence[ImagePlane],
        seed: int,
        batch_size: int = BATCH_SIZE,
        lr_patch_size: int = LR_PATCH_SIZE,
        fixed_scale: Optional[float] = None,
        threaded: bool = False,
        queue_size: int = 4,
        dtype=np.float32,
    ):
        self.hr_images = list(hr_images)
        self.seed = seed
        self.batch_size = batch_size
        self.lr_patch_size = lr_patch_size
        self.fixed_scale = fixed_scale
        self.threaded = threaded
        self.queue_size = queue_size
        self.dtype = dtype

    def batch_for_step(self, step: int) -> PatchBatch:
        rng = batch_rng(self.seed, step)
        scale = self.fixed_scale if self.fixed_scale is not None else sample_scale(rng)
        return make_batch(self.hr_images, scale, rng, self.batch_size, self.lr_patch_size, self.dtype)

    def iterate(self, start_step: int, count: int) -> Iterator[PatchBatch]:
        """Batches for steps start_step .. start_step + count - 1."""
        if not self.threaded:
            for step in range(start_step, start_step + count):
                yield self.batch_for_step(step)
            return
        yield from self._threaded(start_step, count)

    def _threaded(self, start_step: int, count: int) -> Iterator[PatchBatch]:
        items: "queue.Queue" = queue.Queue(maxsize=self.queue_size)
        stop = threading.Event()

        def produce():
            try:
                for step in range(start_step, start_step + count):
                    if stop.is_set():
                        return
                    items.put(self.batch_for_step(step))
            except Exception as e:  # surfaced in the consumer
                items.put(e)

        worker = threading.Thread(target=produce, name="batch-producer", daemon=True)
        worker.start()
        try:
            for _ in range(count):
                item = items.get()
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            while not items.empty():
                items.get_nowait()
            worker.join(timeout=1.0)


def load_image_dir(directory) -> List[ImagePlane]:
    """
    Read every PNG below a directory.

    Unreadable files are skipped with a warning.

    Raises:
        ImageIOError: If the directory holds no readable image
    """
    paths = find_images(Path(directory))
    images = []
    for path in paths:
        try:
            images.append(read_png(path))
        except ImageIOError as e:
            logger.warning("skipping %s: %s", path, e)
    if not images:
        raise ImageIOError(f"No readable PNG images found in {directory}")
    return images
