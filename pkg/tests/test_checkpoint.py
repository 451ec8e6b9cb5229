import struct

import numpy as np
import pytest

from conftest import TINY_FEATURES
from src.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from src.errors import CheckpointError
from src.image_io import ImagePlane
from src.model import MetaSR, ModelConfig
from src.optim import Adam
from src.tensor import Tensor


@pytest.fixture
def trained(rng, tiny_model_config):
    """Model and optimizer after two steps, so every moment is non-zero."""
    model = MetaSR(tiny_model_config, rng=np.random.default_rng(3))
    optimizer = Adam(model.parameters(), learning_rate=2e-4)
    for _ in range(2):
        optimizer.zero_grad()
        model(Tensor(rng.uniform(size=(3, 6, 6))), 1.5).sum().backward()
        optimizer.step()
    return model, optimizer


def test_round_trip_is_bit_exact(tmp_path, trained):
    model, optimizer = trained
    path = save_checkpoint(tmp_path / "a.ckpt", model, optimizer, metadata={"epoch": 3, "seed": 9})
    ckpt = load_checkpoint(path)

    assert ckpt.model_config == model.config
    assert ckpt.metadata["epoch"] == 3 and ckpt.metadata["seed"] == 9
    assert ckpt.metadata["adam_step_count"] == 2
    for name, p in model.parameters().items():
        assert ckpt.params[name].dtype == p.data.dtype
        np.testing.assert_array_equal(ckpt.params[name], p.data)
        np.testing.assert_array_equal(ckpt.first_moment[name], optimizer.state.first_moment[name])
        np.testing.assert_array_equal(ckpt.second_moment[name], optimizer.state.second_moment[name])


def test_rebuilt_model_gives_identical_output(tmp_path, rng, trained):
    model, _ = trained
    image = ImagePlane(rng.uniform(size=(7, 9, 3)))
    rebuilt = load_checkpoint(save_checkpoint(tmp_path / "m.ckpt", model)).build_model()
    for r in (1.0, 2.3, 4.0):
        np.testing.assert_array_equal(
            rebuilt.super_resolve(image, [r])[0].pixels,
            model.super_resolve(image, [r])[0].pixels,
        )


def test_rebuilt_optimizer_continues_identically(tmp_path, rng, trained):
    model, optimizer = trained
    ckpt = load_checkpoint(save_checkpoint(tmp_path / "o.ckpt", model, optimizer))
    twin = ckpt.build_model()
    twin_optimizer = ckpt.build_optimizer(twin)
    assert twin_optimizer.state.step_count == 2
    assert twin_optimizer.learning_rate == 2e-4

    x = rng.uniform(size=(3, 6, 6))
    for m, opt in ((model, optimizer), (twin, twin_optimizer)):
        opt.zero_grad()
        m(Tensor(x), 2.0).sum().backward()
        opt.step()
    for name, p in model.parameters().items():
        np.testing.assert_array_equal(twin.parameters()[name].data, p.data)


def test_without_optimizer(tmp_path, tiny_model_config):
    ckpt = load_checkpoint(save_checkpoint(tmp_path / "p.ckpt", MetaSR(tiny_model_config, rng=None)))
    assert ckpt.build_optimizer(ckpt.build_model()) is None


@pytest.mark.parametrize("backend", ["biconv", "metabi"])
def test_other_backends(tmp_path, backend):
    model = MetaSR(ModelConfig(features=TINY_FEATURES, backend=backend, hidden=8), rng=np.random.default_rng(0))
    rebuilt = load_checkpoint(save_checkpoint(tmp_path / f"{backend}.ckpt", model)).build_model()
    assert rebuilt.config.backend == backend
    assert set(rebuilt.parameters()) == set(model.parameters())


def test_header_layout(tmp_path, tiny_model_config):
    blob = save_checkpoint(tmp_path / "h.ckpt", MetaSR(tiny_model_config, rng=None)).read_bytes()
    assert blob[:8] == MAGIC
    assert struct.unpack("<I", blob[8:12])[0] == FORMAT_VERSION


class TestCorruptFiles:
    @pytest.fixture
    def blob(self, tmp_path, tiny_model_config):
        return save_checkpoint(tmp_path / "good.ckpt", MetaSR(tiny_model_config, rng=None)).read_bytes()

    def load(self, tmp_path, blob):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(blob)
        return load_checkpoint(path)

    def test_bad_magic(self, tmp_path, blob):
        with pytest.raises(CheckpointError, match="magic"):
            self.load(tmp_path, b"NOTMETA!" + blob[8:])

    def test_future_version(self, tmp_path, blob):
        with pytest.raises(CheckpointError, match="version 2"):
            self.load(tmp_path, blob[:8] + struct.pack("<I", 2) + blob[12:])

    @pytest.mark.parametrize("keep", [4, 20, -1])
    def test_truncated(self, tmp_path, blob, keep):
        with pytest.raises(CheckpointError):
            self.load(tmp_path, blob[:keep])

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="Cannot read"):
            load_checkpoint(tmp_path / "absent.ckpt")


def test_parameter_mismatch(tmp_path, tiny_model_config):
    ckpt = load_checkpoint(save_checkpoint(tmp_path / "x.ckpt", MetaSR(tiny_model_config, rng=None)))
    del ckpt.params["weight_net.fc2.bias"]
    with pytest.raises(CheckpointError, match="missing"):
        ckpt.build_model()


def test_shape_mismatch(tmp_path, tiny_model_config):
    ckpt = load_checkpoint(save_checkpoint(tmp_path / "y.ckpt", MetaSR(tiny_model_config, rng=None)))
    ckpt.params["weight_net.fc1.bias"] = np.zeros(3, dtype=np.float32)
    with pytest.raises(CheckpointError, match="shape"):
        ckpt.build_model()
