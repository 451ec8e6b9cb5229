"""Shared fixtures: small networks, synthetic images and image directories."""
import numpy as np
import pytest

from src.config import RunConfig
from src.feature_extractor import FeatureNetConfig
from src.image_io import ImagePlane, write_png
from src.model import ModelConfig

TINY_FEATURES = FeatureNetConfig(num_blocks=1, convs_per_block=2, growth_rate=4, feature_channels=4)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def smooth_image(rng: np.random.Generator, height: int, width: int) -> ImagePlane:
    """Band-limited random RGB image (sum of a few low-frequency waves)."""
    y = np.linspace(0.0, 1.0, height)[:, None, None]
    x = np.linspace(0.0, 1.0, width)[None, :, None]
    pixels = np.full((height, width, 3), 0.5)
    for _ in range(4):
        fy, fx = rng.uniform(0.5, 3.0, 2)
        phase = rng.uniform(0.0, 2 * np.pi, 3)
        pixels = pixels + 0.1 * np.sin(2 * np.pi * (fy * y + fx * x) + phase)
    return ImagePlane(np.clip(pixels, 0.0, 1.0))


def textured_image(rng: np.random.Generator, height: int, width: int) -> ImagePlane:
    """Overlapping flat rectangles with hard edges on a gently shaded background."""
    pixels = smooth_image(rng, height, width).pixels.copy()
    for _ in range(height * width // 64):
        h, w = rng.integers(2, 12, 2)
        top, left = rng.integers(0, height - h), rng.integers(0, width - w)
        pixels[top:top + h, left:left + w] = rng.uniform(0.1, 0.9, 3)
    return ImagePlane(pixels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(features=TINY_FEATURES, hidden=16)


@pytest.fixture
def toy_images():
    rng = np.random.default_rng(7)
    return [smooth_image(rng, 40, 44) for _ in range(4)]


@pytest.fixture
def image_dir(tmp_path, toy_images):
    """Directory of four PNGs, one in a subdirectory."""
    root = tmp_path / "images"
    for index, img in enumerate(toy_images):
        sub = root / "nested" if index == 3 else root
        write_png(img, sub / f"img{index}.png")
    return root


@pytest.fixture
def tiny_run_config(tmp_path, image_dir):
    return RunConfig(
        train_dir=str(image_dir),
        output_dir=str(tmp_path / "run"),
        batch_size=2,
        lr_patch_size=8,
        epochs=2,
        iterations_per_epoch=3,
        hidden=16,
        deterministic=True,
        val_scales=[2.0],
    )
