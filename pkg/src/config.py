"""Run configuration: JSON loading, command-line overrides and validation."""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import ConfigError
from .feature_extractor import PRESETS
from .metrics import shave_for_scale
from .model import BACKENDS, ModelConfig

CONFIG_VERSION = 1
DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class RunConfig:
    """Settings shared by the train / sr / eval / bench / degrade commands."""

    train_dir: Optional[str] = None
    val_dir: Optional[str] = None
    output_dir: str = "runs/metasr"
    preset: str = "desk"
    backend: str = "meta"
    kernel_size: int = 3
    hidden: int = 256
    include_scale: bool = True
    batch_size: int = 16
    lr_patch_size: int = 50
    epochs: int = 1000
    iterations_per_epoch: int = 100
    learning_rate: float = 1e-4
    decay_every: int = 200
    seed: int = 0
    deterministic: bool = False
    threads: Optional[int] = None
    save_every: int = 1
    validate_every: int = 10
    val_scales: List[float] = field(default_factory=lambda: [1.5, 2.0, 3.3])
    shave: str = "ceil"
    finetune_scale: Optional[float] = None
    dtype: str = "float32"

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            features=PRESETS[self.preset],
            backend=self.backend,
            kernel_size=self.kernel_size,
            hidden=self.hidden,
            include_scale=self.include_scale,
        )

    @property
    def numpy_dtype(self):
        return DTYPES[self.dtype]

    def shave_for(self, r: float) -> int:
        """Border shave at scale r under the configured policy."""
        if self.shave == "ceil":
            return shave_for_scale(r)
        return int(self.shave)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["version"] = CONFIG_VERSION
        return data


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_run_config(config: RunConfig, require_train_dir: bool = False) -> List[str]:
    """
    Check every field and collect all problems.

    Args:
        config: Configuration to check
        require_train_dir: The train command needs a dataset directory

    Returns:
        List of human-readable problems (empty if valid)
    """
    problems = []
    if config.preset not in PRESETS:
        problems.append(f"preset must be one of {', '.join(PRESETS)}, got {config.preset!r}")
    if config.backend not in BACKENDS:
        problems.append(f"backend must be one of {', '.join(BACKENDS)}, got {config.backend!r}")
    if config.dtype not in DTYPES:
        problems.append(f"dtype must be one of {', '.join(DTYPES)}, got {config.dtype!r}")
    if not isinstance(config.kernel_size, int) or config.kernel_size < 1 or config.kernel_size % 2 == 0:
        problems.append(f"kernel_size must be a positive odd integer, got {config.kernel_size}")
    for name in ("hidden", "batch_size", "lr_patch_size", "epochs", "iterations_per_epoch",
                 "decay_every", "save_every", "validate_every"):
        value = getattr(config, name)
        if not isinstance(value, int) or value < 1:
            problems.append(f"{name} must be a positive integer, got {value!r}")
    if isinstance(config.lr_patch_size, int) and isinstance(config.kernel_size, int) \
            and config.lr_patch_size < config.kernel_size:
        problems.append(f"lr_patch_size ({config.lr_patch_size}) must be at least kernel_size ({config.kernel_size})")
    if not _is_number(config.learning_rate) or not config.learning_rate > 0:
        problems.append(f"learning_rate must be > 0, got {config.learning_rate}")
    if config.threads is not None and (not isinstance(config.threads, int) or config.threads < 1):
        problems.append(f"threads must be >= 1, got {config.threads}")
    if not isinstance(config.val_scales, list) or not config.val_scales \
            or any(not _is_number(s) or not s > 0 for s in config.val_scales):
        problems.append(f"val_scales must be a non-empty list of positive numbers, got {config.val_scales}")
    if config.finetune_scale is not None and (not _is_number(config.finetune_scale) or not config.finetune_scale > 0):
        problems.append(f"finetune_scale must be > 0, got {config.finetune_scale}")
    if config.shave != "ceil":
        try:
            if int(config.shave) < 0:
                problems.append(f"shave must be 'ceil' or a non-negative integer, got {config.shave!r}")
        except (TypeError, ValueError):
            problems.append(f"shave must be 'ceil' or a non-negative integer, got {config.shave!r}")
    if require_train_dir:
        if not config.train_dir:
            problems.append("train_dir is required")
        elif not Path(config.train_dir).is_dir():
            problems.append(f"train_dir not found: {config.train_dir}")
    if config.val_dir and not Path(config.val_dir).is_dir():
        problems.append(f"val_dir not found: {config.val_dir}")
    return problems


def load_run_config(json_path: str = None, overrides: Dict[str, Any] = None, require_train_dir: bool = False) -> RunConfig:
    """
    Load configuration from JSON (optional) and apply command-line overrides.

    Args:
        json_path: Path to a config file with "version": 1, or None for defaults
        overrides: Field values that take precedence (None values are ignored)
        require_train_dir: Validate for the train command

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: Listing every invalid or unknown field
    """
    data: Dict[str, Any] = {}
    problems: List[str] = []
    if json_path is not None:
        json_file = Path(json_path)
        if not json_file.exists():
            raise ConfigError(f"Config file not found: {json_path}")
        try:
            with open(json_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {json_path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {json_path} must contain a JSON object")
        version = data.pop("version", None)
        if version != CONFIG_VERSION:
            problems.append(f"unsupported config version: {version!r} (expected {CONFIG_VERSION})")

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        problems.append(f"unknown field(s): {', '.join(unknown)}")
    config = RunConfig(**{k: v for k, v in data.items() if k in known})
    problems.extend(validate_run_config(config, require_train_dir))
    if problems:
        raise ConfigError("Invalid configuration:\n  - " + "\n  - ".join(problems))
    return config
