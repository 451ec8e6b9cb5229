"""Residual-dense feature learning module.

Layout: two shallow 3×3 convs, D residual dense blocks, 1×1 global fusion of
all block outputs, a 3×3 conv, and a global residual from the first shallow
feature. Every conv uses same-padding, so spatial size is preserved.
"""
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Union

import numpy as np

from .errors import ShapeError
from .image_io import ImagePlane
from .tensor import Tensor, add, concat, conv2d, relu


@dataclass(frozen=True)
class FeatureNetConfig:
    """Size of the feature extractor."""

    num_blocks: int = 2         # D
    convs_per_block: int = 3    # C
    growth_rate: int = 16       # G
    feature_channels: int = 16  # inC
    kernel_size: int = 3
    image_channels: int = 3

    def __post_init__(self):
        for name in ("num_blocks", "convs_per_block", "growth_rate", "feature_channels", "image_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


PRESETS = {
    "desk": FeatureNetConfig(),
    "paper": FeatureNetConfig(num_blocks=16, convs_per_block=8, growth_rate=64, feature_channels=64),
}


def parameter_count(config: FeatureNetConfig) -> int:
    """Closed-form number of scalars in the extractor (weights and biases)."""
    k2 = config.kernel_size ** 2
    f = config.feature_channels
    g = config.growth_rate
    total = config.image_channels * f * k2 + f      # shallow 1
    total += f * f * k2 + f                         # shallow 2
    block = 0
    for c in range(config.convs_per_block):
        block += (f + c * g) * g * k2 + g
    block += (f + config.convs_per_block * g) * f + f
    total += config.num_blocks * block
    total += config.num_blocks * f * f + f          # global 1×1 fusion
    total += f * f * k2 + f                         # global 3×3
    return total


def _conv_params(rng, c_out, c_in, k, dtype):
    fan_in = c_in * k * k
    if rng is None:
        return np.zeros((c_out, c_in, k, k)), np.zeros(c_out)
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, (c_out, c_in, k, k)), rng.uniform(-bound, bound, c_out)


def build_rdb(x: Tensor, block_params: Dict[str, Tensor], convs_per_block: int) -> Tensor:
    """
    Residual dense block.

    Each conv+ReLU sees the concatenation of the block input and all earlier
    layer outputs; a 1×1 fusion conv maps back to the input width and the
    block input is added.

    Args:
        x: (inC, H, W) or (N, inC, H, W) input
        block_params: 'convs.{c}.weight/bias' and 'fusion.weight/bias'
        convs_per_block: Number of dense layers C

    Raises:
        ShapeError: If the input width differs from the fusion output width
    """
    fusion = block_params["fusion.weight"]
    channel_axis = x.ndim - 3
    if x.shape[channel_axis] != fusion.shape[0]:
        raise ShapeError(f"RDB input has {x.shape[channel_axis]} channels, block expects {fusion.shape[0]}")
    state = x
    for c in range(convs_per_block):
        kernel = block_params[f"convs.{c}.weight"]
        grown = relu(conv2d(state, kernel, block_params[f"convs.{c}.bias"], padding=kernel.shape[-1] // 2))
        state = concat([state, grown], axis=channel_axis)
    return add(conv2d(state, fusion, block_params["fusion.bias"]), x)


class FeatureExtractor:
    """Parameters and forward pass of the residual-dense feature module."""

    def __init__(self, config: FeatureNetConfig = None, rng: np.random.Generator = None, dtype=np.float32):
        """
        Args:
            config: Network size (desk preset when None)
            rng: Generator for fan-in uniform initialization (zeros when None)
            dtype: Parameter precision
        """
        self.config = config or PRESETS["desk"]
        cfg = self.config
        f, g, k = cfg.feature_channels, cfg.growth_rate, cfg.kernel_size

        shapes = [("sfe1", f, cfg.image_channels, k), ("sfe2", f, f, k)]
        for d in range(cfg.num_blocks):
            for c in range(cfg.convs_per_block):
                shapes.append((f"rdb{d}.convs.{c}", g, f + c * g, k))
            shapes.append((f"rdb{d}.fusion", f, f + cfg.convs_per_block * g, 1))
        shapes.append(("gff1", f, cfg.num_blocks * f, 1))
        shapes.append(("gff2", f, f, k))

        self.params: Dict[str, Tensor] = OrderedDict()
        for prefix, c_out, c_in, size in shapes:
            weight, bias = _conv_params(rng, c_out, c_in, size, dtype)
            self.params[f"{prefix}.weight"] = Tensor(weight, requires_grad=True, dtype=dtype, name=f"{prefix}.weight")
            self.params[f"{prefix}.bias"] = Tensor(bias, requires_grad=True, dtype=dtype, name=f"{prefix}.bias")

    @property
    def dtype(self):
        return self.params["sfe1.weight"].dtype

    def block_params(self, d: int) -> Dict[str, Tensor]:
        prefix = f"rdb{d}."
        return {name[len(prefix):]: p for name, p in self.params.items() if name.startswith(prefix)}

    def __call__(self, image: Union[ImagePlane, Tensor]) -> Tensor:
        return extract_features(image, self.config, self.params)


def extract_features(image: Union[ImagePlane, Tensor], config: FeatureNetConfig, params: Dict[str, Tensor]) -> Tensor:
    """
    Feature map of an LR image.

    Args:
        image: RGB ImagePlane, or (3, H, W) / (N, 3, H, W) tensor
        config: Network size
        params: Parameters named as FeatureExtractor creates them

    Returns:
        (inC, H, W) or (N, inC, H, W) features

    Raises:
        ShapeError: If the image is smaller than the kernel
    """
    if isinstance(image, ImagePlane):
        x = Tensor(image.to_chw(params["sfe1.weight"].dtype))
    else:
        x = image
    if x.ndim not in (3, 4):
        raise ShapeError(f"image tensor must be (C, H, W) or (N, C, H, W), got {x.shape}")
    height, width = x.shape[-2:]
    k = config.kernel_size
    if height < k or width < k:
        raise ShapeError(f"image {height}x{width} is smaller than the {k}x{k} kernel")

    pad = k // 2
    channel_axis = x.ndim - 3
    shallow = conv2d(x, params["sfe1.weight"], params["sfe1.bias"], padding=pad)
    state = conv2d(shallow, params["sfe2.weight"], params["sfe2.bias"], padding=pad)
    block_outputs = []
    for d in range(config.num_blocks):
        prefix = f"rdb{d}."
        block = {name[len(prefix):]: p for name, p in params.items() if name.startswith(prefix)}
        state = build_rdb(state, block, config.convs_per_block)
        block_outputs.append(state)
    fused = conv2d(concat(block_outputs, axis=channel_axis), params["gff1.weight"], params["gff1.bias"])
    fused = conv2d(fused, params["gff2.weight"], params["gff2.bias"], padding=pad)
    return add(fused, shallow)
