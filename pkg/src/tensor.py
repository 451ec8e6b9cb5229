"""Dense tensors with reverse-mode gradients.

Only the operations the super-resolution model needs are provided. Each op
records its parents and a backward closure returning one gradient per parent;
``Tensor.backward`` walks the recorded graph in reverse topological order.
"""
import contextlib
import threading
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError

DEFAULT_DTYPE = np.float32

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (per thread)."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """N-dimensional array of reals with an optional gradient."""

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        dtype=None,
        name: str = None,
    ):
        """
        Args:
            data: Array-like values. Floating ndarrays keep their precision
                unless ``dtype`` is given.
            requires_grad: Whether backward() should populate ``grad``.
            dtype: Element precision (np.float32 or np.float64).
            name: Optional label used in diagnostics.
        """
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype, order="C")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    # ── properties ──────────────────────────────

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # ── graph ───────────────────────────────────

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
    ) -> "Tensor":
        """Wrap the result of an operation, recording it when gradients are needed."""
        out = cls(data, dtype=data.dtype)
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _topological_order(self):
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.ndim != 0:
            raise ShapeError(
                f"backward() needs a scalar loss, got shape {self.shape}"
            )
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that does not require grad")

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, contribution in zip(node._parents, node._backward(g)):
                if contribution is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + contribution
                else:
                    grads[key] = contribution

    # ── shape helpers ───────────────────────────

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.from_op(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(original),)
        )

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),)
        )

    def sum(self) -> "Tensor":
        shape = self.shape
        return Tensor.from_op(
            np.asarray(self.data.sum(), dtype=self.dtype),
            (self,),
            lambda g: (np.broadcast_to(g, shape).copy(),),
        )

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)


# ── operations ──────────────────────────────────


def _result_dtype(*tensors: Tensor):
    return np.result_type(*(t.dtype for t in tensors))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Join tensors along ``axis``; all other dimensions must agree."""
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: no tensors given")
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            d1 != d2 for k, (d1, d2) in enumerate(zip(t.shape, reference)) if k != axis % len(reference)
        ):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {reference} on axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the gradient at 0 is 0."""
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward)


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine layer ``bias + weight @ x`` for a vector or a batch of row vectors.

    Args:
        x: Input of shape (n_in,) or (M, n_in)
        weight: Weight matrix of shape (n_out, n_in)
        bias: Bias vector of shape (n_out,)

    Returns:
        Tensor of shape (n_out,) or (M, n_out)
    """
    if weight.ndim != 2 or bias.shape != (weight.shape[0],):
        raise ShapeError(
            f"fully_connected: weight {weight.shape} and bias {bias.shape} do not form a layer"
        )
    if x.ndim not in (1, 2) or x.shape[-1] != weight.shape[1]:
        raise ShapeError(
            f"fully_connected: input {x.shape} does not match weight with n_in={weight.shape[1]}"
        )
    rows = x.data.reshape(-1, weight.shape[1])
    out = rows @ weight.data.T + bias.data

    def backward(g):
        g2 = g.reshape(-1, weight.shape[0])
        return (
            (g2 @ weight.data).reshape(x.shape),
            g2.T @ rows,
            g2.sum(axis=0),
        )

    if x.ndim == 1:
        out = out[0]
    return Tensor.from_op(out, (x, weight, bias), backward)


def l1_loss(prediction: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference; subgradient sign(pred - target) / N."""
    if prediction.shape != target.shape:
        raise ShapeError(f"l1_loss: prediction {prediction.shape} vs target {target.shape}")
    diff = prediction.data - target.data
    n = diff.size

    def backward(g):
        s = np.sign(diff) * (g / n)
        return s, -s

    return Tensor.from_op(np.asarray(np.abs(diff).mean(), dtype=diff.dtype), (prediction, target), backward)


def im2col(x: np.ndarray, k: int, padding: int) -> Tuple[np.ndarray, Tuple[int, int]]:
    """Gather k×k neighborhoods of a (N, C, H, W) array.

    Returns:
        (columns of shape (N, H', W', C*k*k) ordered channel-major, (H', W'))
    """
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    n, c, h_out, w_out = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, h_out, w_out, c * k * k)
    return cols, (h_out, w_out)


def col2im(cols: np.ndarray, channels: int, height: int, width: int, k: int, padding: int) -> np.ndarray:
    """Scatter-add neighborhood columns back onto a (N, C, H, W) array."""
    n, h_out, w_out, _ = cols.shape
    cols = cols.reshape(n, h_out, w_out, channels, k, k)
    padded = np.zeros((n, channels, height + 2 * padding, width + 2 * padding), dtype=cols.dtype)
    for dy in range(k):
        for dx in range(k):
            padded[:, :, dy:dy + h_out, dx:dx + w_out] += cols[:, :, :, :, dy, dx].transpose(0, 3, 1, 2)
    return padded[:, :, padding:padding + height, padding:padding + width]


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor = None, padding: int = 0) -> Tensor:
    """Stride-1 cross-correlation via im2col.

    Args:
        x: Input (C_in, H, W) or batched (N, C_in, H, W)
        kernel: (C_out, C_in, k, k) with k odd
        bias: Optional (C_out,)
        padding: Zero padding on each spatial side

    Returns:
        Tensor (C_out, H', W') or (N, C_out, H', W') with H' = H + 2*padding - k + 1
    """
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3] or kernel.shape[2] % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be (C_out, C_in, k, k) with odd k, got {kernel.shape}")
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d: input must be (C, H, W) or (N, C, H, W), got {x.shape}")
    if padding < 0:
        raise ShapeError(f"conv2d: padding must be >= 0, got {padding}")
    c_out, c_in, k, _ = kernel.shape
    batched = x.ndim == 4
    data = x.data if batched else x.data[None]
    n, channels, height, width = data.shape
    if channels != c_in:
        raise ShapeError(
            f"conv2d: input has {channels} channels but kernel {kernel.shape} expects C_in={c_in}"
        )
    if height + 2 * padding < k or width + 2 * padding < k:
        raise ShapeError(f"conv2d: input {x.shape} with padding {padding} is smaller than kernel {k}x{k}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match C_out={c_out}")

    cols, (h_out, w_out) = im2col(data, k, padding)
    flat_cols = cols.reshape(-1, c_in * k * k)
    weight = kernel.data.reshape(c_out, -1)
    out = flat_cols @ weight.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(n, h_out, w_out, c_out).transpose(0, 3, 1, 2)
    if not batched:
        out = out[0]

    def backward(g):
        g4 = g if batched else g[None]
        g2 = g4.transpose(0, 2, 3, 1).reshape(-1, c_out)
        grad_kernel = (g2.T @ flat_cols).reshape(kernel.shape)
        grad_cols = (g2 @ weight).reshape(n, h_out, w_out, -1)
        grad_x = col2im(grad_cols, c_in, height, width, k, padding)
        if not batched:
            grad_x = grad_x[0]
        grad_bias = g2.sum(axis=0) if bias is not None else None
        return grad_x, grad_kernel, grad_bias

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(np.ascontiguousarray(out), parents, backward)


def resample(x: Tensor, row_matrix: np.ndarray, col_matrix: np.ndarray) -> Tensor:
    """Separable linear resampling ``R @ X @ C.T`` over the last two axes.

    The matrices are constants (interpolation weights); gradients flow to ``x``.
    """
    h, w = x.shape[-2:]
    if row_matrix.shape[1] != h or col_matrix.shape[1] != w:
        raise ShapeError(
            f"resample: matrices {row_matrix.shape}/{col_matrix.shape} do not fit input {x.shape}"
        )
    rows = row_matrix.astype(x.dtype)
    cols = col_matrix.astype(x.dtype)
    out = np.matmul(np.matmul(rows, x.data), cols.T)

    def backward(g):
        return (np.matmul(np.matmul(rows.T, g), cols),)

    return Tensor.from_op(out, (x,), backward)
