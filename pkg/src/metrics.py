"""PSNR and SSIM on the Y channel of YCbCr, with border shaving."""
import math
from typing import Tuple

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from .image_io import ImagePlane, quantize

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Matlab rgb2ycbcr (BT.601 studio swing), inputs in [0, 1], outputs in [0, 255]
_YCBCR_MATRIX = np.array([
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
])
_YCBCR_OFFSET = np.array([16.0, 128.0, 128.0])


def rgb_to_ycbcr(img: ImagePlane) -> ImagePlane:
    """
    Convert RGB in [0, 1] to studio-swing YCbCr in [0, 1].

    Raises:
        ValueError: If the plane is not a 3-channel RGB image
    """
    if img.colorspace != "RGB" or img.channels != 3:
        raise ValueError(f"rgb_to_ycbcr expects an RGB plane, got {img.colorspace} with {img.channels} channel(s)")
    ycbcr = (img.pixels @ _YCBCR_MATRIX.T + _YCBCR_OFFSET) / 255.0
    return ImagePlane(ycbcr, "YCbCr")


def luma(img: ImagePlane) -> np.ndarray:
    """Y channel (H×W) of an RGB, YCbCr or Y plane."""
    if img.colorspace == "Y":
        return img.pixels[:, :, 0]
    if img.colorspace == "RGB":
        img = rgb_to_ycbcr(img)
    return img.pixels[:, :, 0]


def shave_for_scale(r: float) -> int:
    """Border width excluded from metrics at scale r: ceil(r)."""
    return int(math.ceil(r))


def center_crop_pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Center-crop two H×W arrays to their common size."""
    h = min(a.shape[0], b.shape[0])
    w = min(a.shape[1], b.shape[1])

    def crop(x):
        top = (x.shape[0] - h) // 2
        left = (x.shape[1] - w) // 2
        return x[top:top + h, left:left + w]

    return crop(a), crop(b)


def _prepared_luma(sr: ImagePlane, hr: ImagePlane, shave: int) -> Tuple[np.ndarray, np.ndarray]:
    if shave < 0:
        raise ValueError(f"shave must be >= 0, got {shave}")
    y_sr, y_hr = center_crop_pair(quantize(luma(sr)), quantize(luma(hr)))
    if shave:
        y_sr = y_sr[shave:-shave, shave:-shave]
        y_hr = y_hr[shave:-shave, shave:-shave]
    if y_sr.size == 0:
        raise ValueError(f"nothing left to compare after shaving {shave} pixels")
    return y_sr, y_hr


def psnr_y(sr: ImagePlane, hr: ImagePlane, shave: int = 0) -> float:
    """
    PSNR in dB on 8-bit-rounded Y, peak 1.0.

    Returns:
        PSNR, or math.inf when the shaved Y planes are identical
    """
    y_sr, y_hr = _prepared_luma(sr, hr, shave)
    if np.array_equal(y_sr, y_hr):
        return math.inf
    return float(peak_signal_noise_ratio(y_hr, y_sr, data_range=1.0))


def ssim_y(sr: ImagePlane, hr: ImagePlane, shave: int = 0) -> float:
    """
    Mean SSIM on 8-bit-rounded Y: 11×11 Gaussian window (σ = 1.5),
    K1 = 0.01, K2 = 0.03, dynamic range 1.

    Raises:
        ValueError: If the shaved image is smaller than the window
    """
    y_sr, y_hr = _prepared_luma(sr, hr, shave)
    if min(y_sr.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image {y_sr.shape[0]}x{y_sr.shape[1]} after shaving is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    return float(structural_similarity(
        y_sr,
        y_hr,
        data_range=1.0,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
    ))
