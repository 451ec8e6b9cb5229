"""Image planes and 8-bit PNG input/output."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError


COLORSPACES = ("RGB", "Y", "YCbCr")


@dataclass
class ImagePlane:
    """H×W×C image with values in [0, 1]."""

    pixels: np.ndarray
    colorspace: str = "RGB"

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise ValueError(f"ImagePlane expects H×W×{{1,3}} pixels, got shape {pixels.shape}")
        if self.colorspace not in COLORSPACES:
            raise ValueError(f"Unknown colorspace: {self.colorspace}")
        expected = 1 if self.colorspace == "Y" else 3
        if pixels.shape[2] != expected:
            raise ValueError(f"{self.colorspace} plane needs {expected} channel(s), got {pixels.shape[2]}")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def clamped(self) -> "ImagePlane":
        return ImagePlane(np.clip(self.pixels, 0.0, 1.0), self.colorspace)

    def to_chw(self, dtype=np.float32) -> np.ndarray:
        """Channel-first array for the network."""
        return np.ascontiguousarray(self.pixels.transpose(2, 0, 1), dtype=dtype)

    @classmethod
    def from_chw(cls, array: np.ndarray, colorspace: str = "RGB") -> "ImagePlane":
        """Build a clamped plane from a channel-first array."""
        return cls(np.clip(np.asarray(array, dtype=np.float64).transpose(1, 2, 0), 0.0, 1.0), colorspace)


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Round [0, 1] values to the nearest of the 256 8-bit levels (still in [0, 1])."""
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0) / 255.0


def read_png(path) -> ImagePlane:
    """
    Read an 8-bit image as an RGB plane.

    Raises:
        ImageIOError: If the file is missing or not a decodable image
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            array = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as e:
        raise ImageIOError(f"Cannot read image {path}: {e}") from e
    return ImagePlane(array / 255.0, "RGB")


def write_png(plane: ImagePlane, path) -> Path:
    """
    Write a plane as 8-bit PNG, creating parent directories.

    Returns:
        Path written
    """
    path = Path(path)
    if plane.colorspace == "YCbCr":
        raise ValueError("write_png expects an RGB or Y plane")
    levels = np.round(np.clip(plane.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    if plane.channels == 1:
        levels = levels[:, :, 0]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(levels).save(path, format="PNG")
    except OSError as e:
        raise ImageIOError(f"Cannot write image {path}: {e}") from e
    return path
