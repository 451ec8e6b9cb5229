import numpy as np
import pytest

from conftest import TINY_FEATURES
from src.image_io import ImagePlane
from src.model import MetaSR, ModelConfig
from src.tensor import Tensor


@pytest.mark.parametrize("backend", ["meta", "biconv", "metabi"])
def test_output_size_for_every_backend(rng, backend):
    model = MetaSR(ModelConfig(features=TINY_FEATURES, backend=backend, hidden=8), rng=np.random.default_rng(0))
    out = model(Tensor(rng.uniform(size=(2, 3, 9, 7))), 2.5)
    assert out.shape == (2, 3, 22, 17)


def test_parameter_names(tiny_model_config):
    names = list(MetaSR(tiny_model_config, rng=None).parameters())
    assert names[0] == "features.sfe1.weight"
    assert "weight_net.fc2.bias" in names
    biconv = MetaSR(ModelConfig(features=TINY_FEATURES, backend="biconv"), rng=None).parameters()
    assert {"upscale.biconv.weight", "upscale.biconv.bias"} <= set(biconv)


def test_super_resolve_continuous_zoom(rng, tiny_model_config):
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
    image = ImagePlane(rng.uniform(size=(12, 16, 3)))
    outputs = model.super_resolve(image, [1.0, 1.1, 2.5, 3.7])
    assert [(o.height, o.width) for o in outputs] == [(12, 16), (13, 17), (30, 40), (44, 59)]
    for plane in outputs:
        assert plane.pixels.min() >= 0.0 and plane.pixels.max() <= 1.0


def test_super_resolve_matches_forward(rng, tiny_model_config):
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
    image = ImagePlane(rng.uniform(size=(8, 8, 3)))
    direct = model(Tensor(image.to_chw()), 1.7).data
    np.testing.assert_allclose(model.super_resolve(image, [1.7])[0].pixels, np.clip(direct, 0, 1).transpose(1, 2, 0), atol=1e-6)


def test_inference_fills_weight_cache(rng, tiny_model_config):
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
    image = ImagePlane(rng.uniform(size=(8, 8, 3)))
    model.super_resolve(image, [2.0, 2.0])
    assert model.weight_cache.stats()["hits"] == 1
    model.invalidate_cache()
    assert model.weight_cache.stats()["entries"] == 0


def test_forward_records_timings(rng, tiny_model_config):
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(0))
    timings = {}
    model(Tensor(rng.uniform(size=(3, 8, 8))), 2.0, timings)
    assert set(timings) == {"feature_learning", "weight_prediction", "feature_mapping"}


def test_config_round_trip(tiny_model_config):
    assert ModelConfig.from_dict(tiny_model_config.to_dict()) == tiny_model_config


def test_config_rejects_unknown_backend():
    with pytest.raises(ValueError, match="backend"):
        ModelConfig(backend="pixelshuffle")
