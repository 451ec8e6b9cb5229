import numpy as np
import pytest
from PIL import Image

from src.errors import ImageIOError
from src.image_io import ImagePlane, quantize, read_png, write_png


def test_plane_validation():
    assert ImagePlane(np.zeros((4, 5)), "Y").channels == 1
    with pytest.raises(ValueError):
        ImagePlane(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        ImagePlane(np.zeros((4, 5, 2)))
    with pytest.raises(ValueError):
        ImagePlane(np.zeros((4, 5, 3)), "Y")
    with pytest.raises(ValueError):
        ImagePlane(np.zeros((4, 5, 3)), "HSV")


def test_chw_conversion(rng):
    plane = ImagePlane(rng.uniform(size=(3, 4, 3)))
    chw = plane.to_chw(np.float64)
    assert chw.shape == (3, 3, 4)
    np.testing.assert_array_equal(ImagePlane.from_chw(chw).pixels, plane.pixels)
    assert ImagePlane.from_chw(np.full((3, 2, 2), 1.7)).pixels.max() == 1.0


def test_quantize():
    np.testing.assert_array_equal(quantize(np.array([-0.2, 0.5, 1.3])), [0.0, 128 / 255, 1.0])


def test_png_round_trip_is_exact_on_8bit_levels(tmp_path, rng):
    levels = rng.integers(0, 256, size=(6, 7, 3))
    path = write_png(ImagePlane(levels / 255.0), tmp_path / "deep" / "a.png")
    np.testing.assert_array_equal(np.round(read_png(path).pixels * 255), levels)


def test_grayscale_and_alpha_are_read_as_rgb(tmp_path):
    Image.fromarray(np.full((3, 3), 200, dtype=np.uint8)).save(tmp_path / "g.png")
    Image.fromarray(np.full((3, 3, 4), 100, dtype=np.uint8), "RGBA").save(tmp_path / "a.png")
    assert read_png(tmp_path / "g.png").pixels.shape == (3, 3, 3)
    np.testing.assert_allclose(read_png(tmp_path / "a.png").pixels, 100 / 255)


def test_write_luma_plane(tmp_path):
    path = write_png(ImagePlane(np.full((2, 2), 0.5), "Y"), tmp_path / "y.png")
    with Image.open(path) as img:
        assert img.mode == "L"


def test_read_errors(tmp_path):
    with pytest.raises(ImageIOError, match="Cannot read"):
        read_png(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"\x89PNG but not really")
    with pytest.raises(ImageIOError):
        read_png(tmp_path / "junk.png")
