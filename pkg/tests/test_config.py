import json

import numpy as np
import pytest

from src.config import CONFIG_VERSION, RunConfig, load_run_config, validate_run_config
from src.errors import ConfigError
from src.feature_extractor import PRESETS


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults():
    config = load_run_config()
    assert config.batch_size == 16
    assert config.lr_patch_size == 50
    assert config.learning_rate == 1e-4
    assert config.decay_every == 200
    assert config.kernel_size == 3 and config.hidden == 256
    assert config.numpy_dtype is np.float32
    assert config.model_config().features == PRESETS["desk"]


def test_json_and_overrides(tmp_path):
    path = write_config(tmp_path, {"version": CONFIG_VERSION, "epochs": 5, "seed": 3, "preset": "paper"})
    config = load_run_config(path, overrides={"seed": 8, "batch_size": None})
    assert config.epochs == 5
    assert config.seed == 8
    assert config.batch_size == 16
    assert config.model_config().features == PRESETS["paper"]


def test_every_problem_is_reported(tmp_path):
    path = write_config(tmp_path, {
        "version": CONFIG_VERSION,
        "kernel_size": 4,
        "batch_size": 0,
        "learning_rate": -1,
        "colour": "red",
    })
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    message = str(info.value)
    for fragment in ("kernel_size", "batch_size", "learning_rate", "unknown field(s): colour"):
        assert fragment in message


def test_version_is_required(tmp_path):
    with pytest.raises(ConfigError, match="unsupported config version"):
        load_run_config(write_config(tmp_path, {"epochs": 5}))


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{epochs: 5", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(str(bad))


def test_train_dir_required_for_training(tmp_path):
    with pytest.raises(ConfigError, match="train_dir is required"):
        load_run_config(require_train_dir=True)
    with pytest.raises(ConfigError, match="train_dir not found"):
        load_run_config(overrides={"train_dir": str(tmp_path / "none")}, require_train_dir=True)
    assert load_run_config(overrides={"train_dir": str(tmp_path)}, require_train_dir=True).train_dir == str(tmp_path)


@pytest.mark.parametrize("field,value", [
    ("preset", "huge"),
    ("backend", "pixelshuffle"),
    ("dtype", "float16"),
    ("val_scales", []),
    ("val_scales", [2.0, -1.0]),
    ("finetune_scale", 0),
    ("shave", "wide"),
    ("threads", 0),
    ("lr_patch_size", 1),
])
def test_invalid_fields(field, value):
    assert validate_run_config(RunConfig(**{field: value}))


def test_shave_policy():
    assert RunConfig().shave_for(2.5) == 3
    assert RunConfig(shave="4").shave_for(2.5) == 4


def test_to_dict_is_loadable(tmp_path):
    config = RunConfig(epochs=7, val_scales=[2.0])
    assert load_run_config(write_config(tmp_path, config.to_dict())) == config
