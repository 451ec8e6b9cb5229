import csv
import math

import numpy as np
import pytest

from conftest import TINY_FEATURES, smooth_image
from src.evaluation import (
    ScaleResult,
    benchmark,
    degrade,
    degrade_tree,
    evaluate,
    format_results_table,
    write_results_csv,
)
from src.feature_extractor import PRESETS
from src.image_io import ImagePlane, quantize, read_png, write_png
from src.metrics import psnr_y
from src.model import MetaSR, ModelConfig
from src.resize import bicubic_resize


class IdentityModel:
    """Stands in for a network that reproduces the ground truth exactly."""

    def __init__(self, hr_images):
        self.hr_images = hr_images

    def super_resolve(self, lr, scales):
        (r,) = scales
        for hr in self.hr_images:
            if np.array_equal(degrade(hr, r).pixels, lr.pixels):
                return [hr]
        raise AssertionError("unknown LR image")


def test_degrade_sizes():
    hr = ImagePlane(np.zeros((100, 90, 3)))
    assert degrade(hr, 2.0).pixels.shape == (50, 45, 3)
    assert degrade(hr, 3.0).pixels.shape == (33, 30, 3)
    assert degrade(hr, 1.5).pixels.shape == (66, 60, 3)


def test_perfect_model_scores_sentinels(toy_images):
    (result,) = evaluate(IdentityModel(toy_images), toy_images, [2.0], progress=False)
    assert result.images == len(toy_images)
    assert result.psnr == math.inf
    assert result.ssim == pytest.approx(1.0)
    assert 0 < result.bicubic_psnr < math.inf


def test_bicubic_only(toy_images):
    results = evaluate(None, toy_images, [1.5, 2.0, 3.0], progress=False)
    assert [r.scale for r in results] == [1.5, 2.0, 3.0]
    assert all(r.psnr is None and r.ssim is None for r in results)
    # smooth images lose more detail at larger factors
    assert results[0].bicubic_psnr > results[2].bicubic_psnr
    assert all(0 < r.bicubic_ssim <= 1 for r in results)


def test_bicubic_column_matches_direct_computation(toy_images):
    hr = toy_images[0]
    expected = psnr_y(bicubic_resize(degrade(hr, 2.0), 2.0), hr, shave=2)
    (result,) = evaluate(None, [hr], [2.0], progress=False)
    assert result.bicubic_psnr == pytest.approx(expected)


def test_threaded_evaluation_matches_serial(toy_images, tiny_model_config):
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
    serial = evaluate(model, toy_images, [2.0, 2.5], workers=1, progress=False)
    threaded = evaluate(model, toy_images, [2.0, 2.5], workers=4, progress=False)
    assert serial == threaded


def test_custom_shave(toy_images):
    wide = evaluate(None, toy_images[:1], [2.0], shave_for=lambda r: 6, progress=False)[0]
    narrow = evaluate(None, toy_images[:1], [2.0], shave_for=lambda r: 0, progress=False)[0]
    assert wide.bicubic_psnr != narrow.bicubic_psnr


def test_results_csv(tmp_path):
    results = [
        ScaleResult(2.0, 5, 33.1, 0.91, 31.0, 0.88),
        ScaleResult(3.0, 5, None, None, 28.2, 0.80),
    ]
    path = write_results_csv(results, tmp_path / "out" / "results.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["scale", "images", "psnr", "ssim", "bicubic_psnr", "bicubic_ssim"]
    assert rows[0]["psnr"] == "33.1"
    assert rows[1]["psnr"] == "" and rows[1]["bicubic_psnr"] == "28.2"


def test_results_table():
    table = format_results_table([ScaleResult(1.5, 2, None, None, 35.0, 0.95)])
    assert "x1.5" in table and "35.00 / 0.9500" in table


class TestDegradeTree:
    def test_layout_and_sizes(self, tmp_path, image_dir):
        out = tmp_path / "lr"
        written = degrade_tree(image_dir, out, [2.0, 4.0], progress=False)
        assert len(written) == 8
        assert (out / "img0_x2.png").exists() and (out / "nested" / "img3_x4.png").exists()
        lr = read_png(out / "img0_x2.png")
        assert (lr.height, lr.width) == (20, 22)
        assert (read_png(out / "img1_x4.png").height, read_png(out / "img1_x4.png").width) == (10, 11)

    def test_hundred_to_fifty(self, tmp_path):
        hr_dir = tmp_path / "hr"
        write_png(smooth_image(np.random.default_rng(0), 100, 100), hr_dir / "a.png")
        (path,) = degrade_tree(hr_dir, tmp_path / "lr", [2.0], progress=False)
        lr = read_png(path)
        assert (lr.height, lr.width) == (50, 50)

    def test_scale_one_is_byte_identical(self, tmp_path, image_dir):
        (path,) = [p for p in degrade_tree(image_dir, tmp_path / "same", [1.0], progress=False) if p.name == "img0_x1.png"]
        assert path.read_bytes() == (image_dir / "img0.png").read_bytes()

    def test_written_file_matches_in_memory_result(self, tmp_path, image_dir, toy_images):
        for r, name in [(2.0, "img0_x2.png"), (1.7, "img0_x1.7.png")]:
            degrade_tree(image_dir, tmp_path / "lr", [r], progress=False)
            on_disk = read_png(tmp_path / "lr" / name)
            np.testing.assert_array_equal(on_disk.pixels, quantize(degrade(toy_images[0], r).pixels))

    def test_unreadable_files_are_skipped(self, tmp_path, image_dir, caplog):
        (image_dir / "broken.png").write_bytes(b"junk")
        written = degrade_tree(image_dir, tmp_path / "lr", [2.0], progress=False)
        assert len(written) == 4
        assert "broken.png" in caplog.text


class TestBenchmark:
    def test_breakdown(self, rng, tiny_model_config):
        model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
        results = benchmark(model, ImagePlane(rng.uniform(size=(12, 12, 3))), [2.0, 2.0, 3.0])
        assert [r.scale for r in results] == [2.0, 2.0, 3.0]
        for res in results:
            assert res.feature_learning > 0 and res.feature_mapping > 0
            assert res.weight_prediction >= 0
            assert 0.9 * res.total <= res.accounted <= res.total * 1.000001
            assert 0 <= res.weight_prediction_share <= 1
        assert (results[0].cache_misses, results[0].cache_hits) == (1, 0)
        assert (results[1].cache_misses, results[1].cache_hits) == (0, 1)
        assert results[2].cache_misses == 1

    def test_repeated_scale_predicts_faster(self, rng):
        # ×3.7 on 40×40 gives 37×37 distinct offsets, so a miss runs the weight net on 1369 rows
        model = MetaSR(ModelConfig(features=PRESETS["desk"]), rng=np.random.default_rng(0))
        first, second = benchmark(model, ImagePlane(rng.uniform(size=(40, 40, 3))), [3.7, 3.7])
        assert (first.cache_misses, second.cache_hits) == (1, 1)
        assert second.weight_prediction < first.weight_prediction

    def test_baseline_backend_has_no_weight_prediction(self, rng):
        model = MetaSR(ModelConfig(features=TINY_FEATURES, backend="biconv"), rng=np.random.default_rng(0))
        (res,) = benchmark(model, ImagePlane(rng.uniform(size=(10, 10, 3))), [2.0])
        assert res.weight_prediction == 0.0
        assert res.cache_hits == res.cache_misses == 0
