"""Matlab-compatible bicubic resizing and bilinear interpolation matrices.

Both resizers are separable: a (out_len, in_len) weight matrix per axis, applied
as ``R @ X @ C.T``. The bicubic weights reproduce Matlab's ``imresize``
(a = -0.5, kernel widened by 1/scale when shrinking, symmetric border
extension); output size is floor(size * scale).
"""
from typing import Optional, Tuple

import numpy as np

from .image_io import ImagePlane
from .utils import scaled_size

CUBIC_A = -0.5
CUBIC_WIDTH = 4.0


def cubic(x: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel with a = -0.5."""
    absx = np.abs(x)
    absx2 = absx * absx
    absx3 = absx2 * absx
    near = (1.5 * absx3 - 2.5 * absx2 + 1.0) * (absx <= 1)
    far = (CUBIC_A * absx3 - 5 * CUBIC_A * absx2 + 8 * CUBIC_A * absx - 4 * CUBIC_A) * ((absx > 1) & (absx <= 2))
    return near + far


def bicubic_matrix(in_len: int, out_len: int, scale: float, antialias: bool = True) -> np.ndarray:
    """
    Dense (out_len, in_len) imresize weight matrix for one axis.

    Args:
        in_len: Input length
        out_len: Output length
        scale: Scale factor along this axis
        antialias: Widen the kernel when shrinking (Matlab default)

    Returns:
        Weight matrix whose rows sum to 1
    """
    if scale < 1 and antialias:
        kernel = lambda x: scale * cubic(scale * x)
        width = CUBIC_WIDTH / scale
    else:
        kernel = cubic
        width = CUBIC_WIDTH

    # 1-based output coordinates mapped into input space (Matlab convention)
    x = np.arange(1, out_len + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1 - 1 / scale)
    left = np.floor(u - width / 2)
    taps = int(np.ceil(width)) + 2
    indices = left[:, None] + np.arange(taps)[None, :]
    weights = kernel(u[:, None] - indices)
    weights = weights / weights.sum(axis=1, keepdims=True)

    mirror = np.concatenate([np.arange(in_len), np.arange(in_len - 1, -1, -1)])
    source = mirror[np.mod(indices.astype(np.int64) - 1, 2 * in_len)]

    matrix = np.zeros((out_len, in_len), dtype=np.float64)
    rows = np.repeat(np.arange(out_len), taps)
    np.add.at(matrix, (rows, source.ravel()), weights.ravel())
    return matrix


def bilinear_matrix(in_len: int, out_len: int) -> np.ndarray:
    """
    Dense (out_len, in_len) bilinear weights with half-pixel centers.

    Source coordinates below 0 are clamped to 0 and the right neighbor is
    clamped to the last sample, so constants are preserved.
    """
    ratio = in_len / out_len
    src = (np.arange(out_len, dtype=np.float64) + 0.5) * ratio - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), in_len - 1)
    i1 = np.minimum(i0 + 1, in_len - 1)
    w1 = src - i0
    matrix = np.zeros((out_len, in_len), dtype=np.float64)
    rows = np.arange(out_len)
    np.add.at(matrix, (rows, i0), 1.0 - w1)
    np.add.at(matrix, (rows, i1), w1)
    return matrix


def resize_output_shape(height: int, width: int, scale: float) -> Tuple[int, int]:
    return scaled_size(height, scale), scaled_size(width, scale)


def resize_array(
    pixels: np.ndarray,
    scale: float,
    output_shape: Optional[Tuple[int, int]] = None,
    antialias: bool = True,
) -> np.ndarray:
    """
    Bicubic-resize an H×W×C array (no clamping).

    Args:
        pixels: Input array
        scale: Scale factor used for the kernel
        output_shape: Explicit (height, width); defaults to floor(size * scale)
        antialias: Matlab antialiasing when shrinking

    Raises:
        ValueError: If scale <= 0 or the output would be empty
    """
    if not scale > 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    height, width = pixels.shape[:2]
    out_h, out_w = output_shape if output_shape is not None else resize_output_shape(height, width, scale)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"resizing {height}x{width} by {scale} gives an empty image ({out_h}x{out_w})")
    if (out_h, out_w) == (height, width) and scale == 1:
        return pixels.copy()
    rows = bicubic_matrix(height, out_h, scale, antialias)
    cols = bicubic_matrix(width, out_w, scale, antialias)
    return np.einsum("ah,hwc,bw->abc", rows, pixels, cols, optimize=True)


def bicubic_resize(
    img: ImagePlane,
    scale: float,
    output_shape: Optional[Tuple[int, int]] = None,
    antialias: bool = True,
) -> ImagePlane:
    """
    Resize an image plane like Matlab ``imresize(img, scale, 'bicubic')``.

    Args:
        img: Input plane
        scale: Scale factor (> 0)
        output_shape: Explicit (height, width) overriding floor(size * scale)
        antialias: Matlab antialiasing when shrinking

    Returns:
        Resized plane clamped to [0, 1]
    """
    resized = resize_array(img.pixels, scale, output_shape, antialias)
    return ImagePlane(np.clip(resized, 0.0, 1.0), img.colorspace)
