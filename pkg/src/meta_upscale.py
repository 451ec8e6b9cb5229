"""Meta-Upscale: per-pixel filters predicted from coordinate offsets and scale.

Each SR pixel (i, j) is projected onto LR pixel (floor(i/r), floor(j/r)); the
weight-prediction network maps its offset vector to a (k²·inC, outC) filter
that is applied to the zero-padded k×k feature neighborhood of that pixel.
Also provides the BiConv and Meta-Bi baseline upscalers.
"""
import logging
import math
import numbers
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import ShapeError
from .resize import bilinear_matrix
from .tensor import (
    Tensor,
    col2im,
    conv2d,
    fully_connected,
    grad_enabled,
    im2col,
    matmul,
    relu,
    resample,
)
from .utils import scaled_size, split_coordinate

logger = logging.getLogger(__name__)

TRAINING_SCALE_RANGE = (1.0, 4.0)


def validate_scale(r: float) -> float:
    """
    Check a scale factor; warns outside the trained range (1, 4].

    Raises:
        ValueError: If r is not a positive finite number
    """
    if not (isinstance(r, numbers.Real) and math.isfinite(r) and r > 0):
        raise ValueError(f"scale factor must be a positive number, got {r!r}")
    low, high = TRAINING_SCALE_RANGE
    if not low < r <= high:
        logger.warning("scale %s is outside the trained range (%s, %s]", r, low, high)
    return float(r)


def output_size(in_h: int, in_w: int, r: float) -> Tuple[int, int]:
    """(floor(inH·r), floor(inW·r))."""
    return scaled_size(in_h, r), scaled_size(in_w, r)


# =============================================================================
# Location projection and offsets
# =============================================================================

class OffsetVector(NamedTuple):
    """Fractional offsets of a projected pixel plus 1/r (absent without scale input)."""

    frac_i: float
    frac_j: float
    inv_r: Optional[float] = None

    def as_array(self) -> np.ndarray:
        values = [self.frac_i, self.frac_j]
        if self.inv_r is not None:
            values.append(self.inv_r)
        return np.array(values, dtype=np.float64)


def project_location(i: int, j: int, r: float) -> Tuple[int, int]:
    """LR pixel (floor(i/r), floor(j/r)) that SR pixel (i, j) is computed from."""
    return int(split_coordinate(i, r)[0]), int(split_coordinate(j, r)[0])


def offset_vector(i: int, j: int, r: float, include_scale: bool = True) -> OffsetVector:
    """Offset vector (i/r - floor(i/r), j/r - floor(j/r)[, 1/r]) of SR pixel (i, j)."""
    frac_i = float(split_coordinate(i, r)[1])
    frac_j = float(split_coordinate(j, r)[1])
    return OffsetVector(frac_i, frac_j, 1.0 / r if include_scale else None)


class OffsetGroup(NamedTuple):
    """SR pixels rows × cols that share one offset vector."""

    offset: OffsetVector
    rows: np.ndarray
    cols: np.ndarray


@dataclass
class OffsetTable:
    """Vectorized projection of a whole SR grid."""

    src_rows: np.ndarray      # (outH,) LR row of each SR row
    src_cols: np.ndarray      # (outW,) LR col of each SR col
    row_fracs: np.ndarray     # distinct row fractions
    col_fracs: np.ndarray     # distinct col fractions
    row_group: np.ndarray     # (outH,) index into row_fracs
    col_group: np.ndarray     # (outW,) index into col_fracs
    inv_r: float

    def offsets(self, include_scale: bool = True) -> np.ndarray:
        """Distinct offset vectors, row-fraction major, shape (G, 2 or 3)."""
        fi = np.repeat(self.row_fracs, len(self.col_fracs))
        fj = np.tile(self.col_fracs, len(self.row_fracs))
        columns = [fi, fj]
        if include_scale:
            columns.append(np.full(fi.shape, self.inv_r))
        return np.stack(columns, axis=1)


def build_offset_table(r: float, out_h: int, out_w: int, in_h: int = None, in_w: int = None) -> OffsetTable:
    src_rows, frac_rows = split_coordinate(np.arange(out_h), r)
    src_cols, frac_cols = split_coordinate(np.arange(out_w), r)
    # Float-only scales can round i/r up to inH at the last row
    if in_h is not None:
        src_rows = np.minimum(src_rows, in_h - 1)
    if in_w is not None:
        src_cols = np.minimum(src_cols, in_w - 1)
    row_fracs, row_group = np.unique(frac_rows, return_inverse=True)
    col_fracs, col_group = np.unique(frac_cols, return_inverse=True)
    return OffsetTable(
        src_rows=src_rows.astype(np.int64),
        src_cols=src_cols.astype(np.int64),
        row_fracs=row_fracs,
        col_fracs=col_fracs,
        row_group=row_group.reshape(-1),
        col_group=col_group.reshape(-1),
        inv_r=1.0 / r,
    )


def distinct_offsets(r: float, out_h: int, out_w: int, include_scale: bool = True) -> List[OffsetGroup]:
    """
    Group SR pixels by offset vector.

    Fractions are compared exactly; they are computed by the same routine as
    the per-pixel path, so grouping never diverges from it.

    Returns:
        One group per distinct offset; the groups partition the SR grid
    """
    table = build_offset_table(r, out_h, out_w)
    inv_r = table.inv_r if include_scale else None
    groups = []
    for a, fi in enumerate(table.row_fracs):
        rows = np.flatnonzero(table.row_group == a)
        for b, fj in enumerate(table.col_fracs):
            cols = np.flatnonzero(table.col_group == b)
            groups.append(OffsetGroup(OffsetVector(float(fi), float(fj), inv_r), rows, cols))
    return groups


# =============================================================================
# Weight prediction
# =============================================================================

@dataclass
class PredictedFilter:
    """Dynamic filter stored flat as (k²·inC, outC), rows ordered (channel, dy, dx)."""

    weights: Tensor
    in_channels: int
    out_channels: int
    kernel_size: int

    def logical(self) -> np.ndarray:
        """Values in logical (inC, outC, k, k) layout."""
        k = self.kernel_size
        return self.weights.data.reshape(self.in_channels, k, k, self.out_channels).transpose(0, 3, 1, 2)

    def as_conv_kernel(self) -> Tensor:
        """Differentiable (outC, inC, k, k) kernel for conv2d."""
        k = self.kernel_size
        return self.weights.reshape(self.in_channels, k, k, self.out_channels).transpose(3, 0, 1, 2)


class WeightPredictionNet:
    """Two fully-connected layers: offset (2 or 3) → hidden → k²·inC·outC, ReLU between."""

    def __init__(
        self,
        in_channels: int = 64,
        out_channels: int = 3,
        kernel_size: int = 3,
        hidden: int = 256,
        include_scale: bool = True,
        rng: np.random.Generator = None,
        dtype=np.float32,
    ):
        """
        Args:
            in_channels: Feature channels inC
            out_channels: Image channels outC
            kernel_size: Odd filter size k
            hidden: Hidden units
            include_scale: Feed 1/r as third input (otherwise offsets only)
            rng: Generator for initialization (zeros when None)
            dtype: Parameter precision
        """
        if kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.hidden = hidden
        self.include_scale = include_scale

        n_in = self.input_dim
        n_out = self.output_dim
        if rng is None:
            w1 = np.zeros((hidden, n_in))
            b1 = np.zeros(hidden)
            w2 = np.zeros((n_out, hidden))
            b2 = np.zeros(n_out)
        else:
            bound1 = 1.0 / math.sqrt(n_in)
            bound2 = 0.1 / math.sqrt(hidden)
            w1 = rng.uniform(-bound1, bound1, (hidden, n_in))
            b1 = rng.uniform(-bound1, bound1, hidden)
            w2 = rng.uniform(-bound2, bound2, (n_out, hidden))
            b2 = rng.uniform(-bound2, bound2, n_out)
        self.params: Dict[str, Tensor] = OrderedDict(
            (name, Tensor(value, requires_grad=True, dtype=dtype, name=name))
            for name, value in (("fc1.weight", w1), ("fc1.bias", b1), ("fc2.weight", w2), ("fc2.bias", b2))
        )

    @property
    def input_dim(self) -> int:
        return 3 if self.include_scale else 2

    @property
    def patch_size(self) -> int:
        return self.kernel_size ** 2 * self.in_channels

    @property
    def output_dim(self) -> int:
        return self.patch_size * self.out_channels

    @property
    def dtype(self):
        return self.params["fc1.weight"].dtype

    def config(self) -> Dict[str, object]:
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "hidden": self.hidden,
            "include_scale": self.include_scale,
        }

    def forward(self, offsets: Tensor) -> Tensor:
        """Map (M, input_dim) offsets to (M, k²·inC·outC) flat filters."""
        if offsets.shape[-1] != self.input_dim:
            raise ShapeError(
                f"weight net expects {self.input_dim}-dim offsets, got shape {offsets.shape}"
            )
        p = self.params
        hidden = relu(fully_connected(offsets, p["fc1.weight"], p["fc1.bias"]))
        return fully_connected(hidden, p["fc2.weight"], p["fc2.bias"])


def predict_weights(v: OffsetVector, net: WeightPredictionNet) -> PredictedFilter:
    """
    Predict the filter W(i, j) = φ(v; θ) for one offset vector.

    Raises:
        ShapeError: If the vector's dimension does not match the network input
    """
    values = v.as_array()
    if values.shape[0] != net.input_dim:
        raise ShapeError(f"offset vector has {values.shape[0]} components, weight net expects {net.input_dim}")
    flat = net.forward(Tensor(values, dtype=net.dtype))
    return PredictedFilter(
        weights=flat.reshape(net.patch_size, net.out_channels),
        in_channels=net.in_channels,
        out_channels=net.out_channels,
        kernel_size=net.kernel_size,
    )


def map_feature(feature_patch: Tensor, filt: PredictedFilter) -> Tensor:
    """Pixel value = flattened k×k feature neighborhood (1 × k²·inC) times the filter."""
    if feature_patch.shape != (filt.weights.shape[0],):
        raise ShapeError(
            f"feature patch has shape {feature_patch.shape}, filter expects ({filt.weights.shape[0]},)"
        )
    row = feature_patch.reshape(1, feature_patch.shape[0])
    return matmul(row, filt.weights).reshape(filt.out_channels)


class WeightCache:
    """Predicted filters for inference, keyed by (scale, output size, scale input)."""

    def __init__(self, max_entries: int = 32):
        self.max_entries = max_entries
        self._entries: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key) -> Optional[np.ndarray]:
        with self._lock:
            value = self._entries.get(key)
            if value is None:
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return value

    def put(self, key, value: np.ndarray) -> None:
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_entries:
                self._entries.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def stats(self) -> Dict[str, int]:
        return {"hits": self.hits, "misses": self.misses, "entries": len(self._entries)}


# =============================================================================
# Feature mapping
# =============================================================================

def _map_pixels(
    features: Tensor,
    weights: Tensor,
    src_rows: np.ndarray,
    src_cols: np.ndarray,
    blocks: List[Tuple[np.ndarray, np.ndarray]],
    kernel_size: int,
    out_channels: int,
) -> Tensor:
    """
    Apply per-pixel filters to projected feature neighborhoods.

    Args:
        features: (N, C, H, W) LR features
        weights: (G, k²·C·outC) filters, one per offset group
        src_rows, src_cols: LR row/col of each SR row/col
        blocks: (SR rows, per-column filter index) pairs; the rows of a block
            share the same filter index for every column
        kernel_size: k
        out_channels: outC

    Returns:
        (N, outC, outH, outW) SR output
    """
    x = features.data
    n, c, h, w = x.shape
    k = kernel_size
    pad = k // 2
    cols, _ = im2col(x, k, pad)
    patch = c * k * k
    table = weights.data.reshape(-1, patch, out_channels)
    out_h, out_w = len(src_rows), len(src_cols)
    dtype = np.result_type(x.dtype, table.dtype)
    out = np.empty((n, out_channels, out_h, out_w), dtype=dtype)

    def gather(rows):
        # (N, R, outW, K) -> (outW, N*R, K)
        patches = cols[:, src_rows[rows]][:, :, src_cols]
        return patches.transpose(2, 0, 1, 3).reshape(out_w, n * len(rows), patch)

    for rows, widx in blocks:
        result = np.matmul(gather(rows), table[widx])
        out[:, :, rows, :] = result.reshape(out_w, n, len(rows), out_channels).transpose(1, 3, 2, 0)

    def backward(g):
        grad_cols = np.zeros_like(cols, dtype=dtype)
        grad_table = np.zeros_like(table, dtype=dtype)
        for rows, widx in blocks:
            patches = gather(rows)
            g_block = g[:, :, rows, :].transpose(3, 0, 2, 1).reshape(out_w, n * len(rows), out_channels)
            np.add.at(grad_table, widx, np.matmul(patches.transpose(0, 2, 1), g_block))
            g_patches = np.matmul(g_block, table[widx].transpose(0, 2, 1))
            g_patches = g_patches.reshape(out_w, n, len(rows), patch).transpose(1, 2, 0, 3)
            np.add.at(grad_cols, (slice(None), src_rows[rows][:, None], src_cols[None, :]), g_patches)
        grad_x = col2im(grad_cols, c, h, w, k, pad)
        return grad_x, grad_table.reshape(weights.shape)

    return Tensor.from_op(out, (features, weights), backward)


def _as_batch(f_lr: Tensor) -> Tuple[Tensor, bool]:
    if f_lr.ndim == 3:
        return f_lr.reshape(1, *f_lr.shape), False
    if f_lr.ndim == 4:
        return f_lr, True
    raise ShapeError(f"features must be (C, H, W) or (N, C, H, W), got {f_lr.shape}")


def meta_upscale(
    f_lr: Tensor,
    r: float,
    net: WeightPredictionNet,
    use_cache: bool = True,
    weight_cache: WeightCache = None,
    timings: Dict[str, float] = None,
) -> Tensor:
    """
    Upscale LR features to an SR image of size (floor(inH·r), floor(inW·r)).

    Args:
        f_lr: (inC, inH, inW) or (N, inC, inH, inW) features
        r: Scale factor (> 0)
        net: Weight-prediction network
        use_cache: Run the weight net once per distinct offset instead of per pixel
        weight_cache: Inference cache of predicted filters (used without grad only)
        timings: Accumulates 'weight_prediction' and 'feature_mapping' seconds

    Returns:
        (outC, outH, outW) or (N, outC, outH, outW) tensor
    """
    start = time.perf_counter()
    r = validate_scale(r)
    features, batched = _as_batch(f_lr)
    _, c, in_h, in_w = features.shape
    if c != net.in_channels:
        raise ShapeError(f"features have {c} channels, weight net expects inC={net.in_channels}")
    if in_h < net.kernel_size or in_w < net.kernel_size:
        raise ShapeError(f"feature map {in_h}x{in_w} is smaller than the {net.kernel_size}x{net.kernel_size} kernel")
    out_h, out_w = output_size(in_h, in_w, r)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"scale {r} maps {in_h}x{in_w} to an empty output")

    table = build_offset_table(r, out_h, out_w, in_h, in_w)

    if use_cache:
        n_col_groups = len(table.col_fracs)
        key = (float(r), out_h, out_w, net.include_scale)
        cached = None
        if weight_cache is not None and not grad_enabled():
            cached = weight_cache.get(key)
        if cached is not None:
            weights = Tensor(cached, dtype=cached.dtype)
        else:
            offsets = Tensor(table.offsets(net.include_scale), dtype=net.dtype)
            weights = net.forward(offsets)
            if weight_cache is not None and not grad_enabled():
                weight_cache.put(key, weights.data)
        blocks = [
            (np.flatnonzero(table.row_group == a), a * n_col_groups + table.col_group)
            for a in range(len(table.row_fracs))
        ]
    else:
        frac_rows = table.row_fracs[table.row_group]
        frac_cols = table.col_fracs[table.col_group]
        columns = [np.repeat(frac_rows, out_w), np.tile(frac_cols, out_h)]
        if net.include_scale:
            columns.append(np.full(out_h * out_w, table.inv_r))
        weights = net.forward(Tensor(np.stack(columns, axis=1), dtype=net.dtype))
        blocks = [(np.array([i]), i * out_w + np.arange(out_w)) for i in range(out_h)]
    mid = time.perf_counter()

    out = _map_pixels(features, weights, table.src_rows, table.src_cols, blocks, net.kernel_size, net.out_channels)
    if not batched:
        out = out.reshape(net.out_channels, out_h, out_w)
    end = time.perf_counter()
    if timings is not None:
        timings["weight_prediction"] = timings.get("weight_prediction", 0.0) + (mid - start)
        timings["feature_mapping"] = timings.get("feature_mapping", 0.0) + (end - mid)
    return out


# =============================================================================
# Baselines
# =============================================================================

def interpolate_features(f_lr: Tensor, r: float) -> Tensor:
    """Bilinearly interpolate features to (floor(inH·r), floor(inW·r))."""
    in_h, in_w = f_lr.shape[-2:]
    out_h, out_w = output_size(in_h, in_w, r)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"scale {r} maps {in_h}x{in_w} to an empty output")
    return resample(f_lr, bilinear_matrix(in_h, out_h), bilinear_matrix(in_w, out_w))


def biconv_upscale(f_lr: Tensor, r: float, fixed_kernel: Tensor, bias: Tensor = None) -> Tensor:
    """BiConv baseline: bilinear feature interpolation then one shared convolution."""
    r = validate_scale(r)
    k = fixed_kernel.shape[-1]
    return conv2d(interpolate_features(f_lr, r), fixed_kernel, bias, padding=k // 2)


def metabi_upscale(f_lr: Tensor, r: float, net: WeightPredictionNet) -> Tensor:
    """Meta-Bi baseline: bilinear interpolation then a convolution predicted from (0, 0[, 1/r])."""
    r = validate_scale(r)
    filt = predict_weights(OffsetVector(0.0, 0.0, 1.0 / r if net.include_scale else None), net)
    return conv2d(interpolate_features(f_lr, r), filt.as_conv_kernel(), padding=net.kernel_size // 2)
