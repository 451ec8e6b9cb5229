"""Meta-SR network: feature extractor followed by a selectable upscale backend."""
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .feature_extractor import PRESETS, FeatureExtractor, FeatureNetConfig
from .image_io import ImagePlane
from .meta_upscale import (
    WeightCache,
    WeightPredictionNet,
    biconv_upscale,
    meta_upscale,
    metabi_upscale,
)
from .tensor import Tensor, no_grad

BACKENDS = ("meta", "biconv", "metabi")


@dataclass
class ModelConfig:
    """Architecture of the whole network."""

    features: FeatureNetConfig = field(default_factory=lambda: PRESETS["desk"])
    backend: str = "meta"
    kernel_size: int = 3
    hidden: int = 256
    include_scale: bool = True
    out_channels: int = 3

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {', '.join(BACKENDS)}, got {self.backend!r}")
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "features": self.features.to_dict(),
            "backend": self.backend,
            "kernel_size": self.kernel_size,
            "hidden": self.hidden,
            "include_scale": self.include_scale,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "ModelConfig":
        data = dict(data)
        data["features"] = FeatureNetConfig(**data["features"])
        return cls(**data)


class MetaSR:
    """Single network serving every scale factor."""

    def __init__(self, config: ModelConfig = None, rng: np.random.Generator = None, dtype=np.float32):
        """
        Args:
            config: Architecture (desk preset, meta backend when None)
            rng: Generator for parameter initialization (zeros when None)
            dtype: Parameter precision
        """
        self.config = config or ModelConfig()
        cfg = self.config
        in_c = cfg.features.feature_channels
        self.extractor = FeatureExtractor(cfg.features, rng=rng, dtype=dtype)
        self.weight_net = None
        self.fixed_kernel = None
        self.fixed_bias = None
        if cfg.backend in ("meta", "metabi"):
            self.weight_net = WeightPredictionNet(
                in_channels=in_c,
                out_channels=cfg.out_channels,
                kernel_size=cfg.kernel_size,
                hidden=cfg.hidden,
                include_scale=cfg.include_scale,
                rng=rng,
                dtype=dtype,
            )
        else:
            k = cfg.kernel_size
            bound = 1.0 / math.sqrt(in_c * k * k)
            if rng is None:
                kernel, bias = np.zeros((cfg.out_channels, in_c, k, k)), np.zeros(cfg.out_channels)
            else:
                kernel = rng.uniform(-bound, bound, (cfg.out_channels, in_c, k, k))
                bias = rng.uniform(-bound, bound, cfg.out_channels)
            self.fixed_kernel = Tensor(kernel, requires_grad=True, dtype=dtype, name="biconv.weight")
            self.fixed_bias = Tensor(bias, requires_grad=True, dtype=dtype, name="biconv.bias")
        self.weight_cache = WeightCache()

    # ── parameters ──────────────────────────────

    def parameters(self) -> Dict[str, Tensor]:
        """All trainable tensors by qualified name."""
        params = OrderedDict((f"features.{n}", p) for n, p in self.extractor.params.items())
        if self.weight_net is not None:
            params.update((f"weight_net.{n}", p) for n, p in self.weight_net.params.items())
        else:
            params["upscale.biconv.weight"] = self.fixed_kernel
            params["upscale.biconv.bias"] = self.fixed_bias
        return params

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def invalidate_cache(self) -> None:
        """Drop cached filters; call after parameters change."""
        self.weight_cache.clear()

    # ── forward ─────────────────────────────────

    def extract(self, lr: Tensor) -> Tensor:
        return self.extractor(lr)

    def upscale(self, features: Tensor, r: float, timings: Dict[str, float] = None) -> Tensor:
        backend = self.config.backend
        if backend == "meta":
            return meta_upscale(features, r, self.weight_net, weight_cache=self.weight_cache, timings=timings)
        start = time.perf_counter()
        if backend == "metabi":
            out = metabi_upscale(features, r, self.weight_net)
        else:
            out = biconv_upscale(features, r, self.fixed_kernel, self.fixed_bias)
        if timings is not None:
            timings["feature_mapping"] = timings.get("feature_mapping", 0.0) + time.perf_counter() - start
        return out

    def forward(self, lr: Tensor, r: float, timings: Dict[str, float] = None) -> Tensor:
        """SR output for an LR tensor (3, H, W) or (N, 3, H, W)."""
        start = time.perf_counter()
        features = self.extract(lr)
        if timings is not None:
            timings["feature_learning"] = timings.get("feature_learning", 0.0) + time.perf_counter() - start
        return self.upscale(features, r, timings)

    __call__ = forward

    def super_resolve(self, image: ImagePlane, scales: Sequence[float]) -> List[ImagePlane]:
        """
        Upscale one image to several scales, extracting features once.

        Returns:
            One clamped RGB plane per scale
        """
        with no_grad():
            features = self.extract(Tensor(image.to_chw(self.extractor.dtype)))
            return [ImagePlane.from_chw(self.upscale(features, r).data) for r in scales]
