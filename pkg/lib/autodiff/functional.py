"""
Differentiable ops.

Every op computes its forward value with numpy and registers a local backward
rule that accumulates into the parents' gradients. Gradients of broadcast
operands are summed back to the operand shape.
"""

from typing import Any, Optional, Sequence, Tuple

import numpy as np

from lib.errors import IndexOutOfRange, ShapeMismatch

from .tensor import Tensor, count_flops


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcast to reach its shape from `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad, b.shape))

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-grad, b.shape))

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad * a.data, b.shape))

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def scale(x: Tensor, factor: float) -> Tensor:
    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad * factor)

    return Tensor.from_op(x.data * factor, (x,), backward, "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes, broadcasting leading axes.

    a: (..., m, k), b: (..., k, n) -> (..., m, n)
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeMismatch(f"matmul leading dimensions differ: {a.shape} @ {b.shape}") from e
    count_flops(2 * out.size * a.shape[-1])

    def backward(grad: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(_unbroadcast(np.matmul(grad, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), grad), b.shape))

    return Tensor.from_op(out, (a, b), backward, "matmul")


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad * positive)

    return Tensor.from_op(np.where(positive, x.data, 0.0), (x,), backward, "relu")


def _stable_softmax(values: np.ndarray, axis: int) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.ndim == 0 or x.shape[axis] < 1:
        raise ShapeMismatch(f"softmax needs a non-empty axis, got shape {x.shape}")
    probs = _stable_softmax(x.data, axis)

    def backward(grad: np.ndarray) -> None:
        inner = (grad * probs).sum(axis=axis, keepdims=True)
        x.accumulate(probs * (grad - inner))

    return Tensor.from_op(probs, (x,), backward, "softmax")


def _logsumexp(values: np.ndarray, axis: int) -> np.ndarray:
    peak = values.max(axis=axis, keepdims=True)
    return peak + np.log(np.exp(values - peak).sum(axis=axis, keepdims=True))


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = x.data - _logsumexp(x.data, axis)

    def backward(grad: np.ndarray) -> None:
        probs = np.exp(out)
        x.accumulate(grad - probs * grad.sum(axis=axis, keepdims=True))

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then apply gamma/beta."""
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise ShapeMismatch(
            f"layer_norm gain/bias must have shape ({width},), got {gamma.shape} and {beta.shape}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv_std

    def backward(grad: np.ndarray) -> None:
        if gamma.requires_grad:
            gamma.accumulate((grad * normalized).reshape(-1, width).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate(grad.reshape(-1, width).sum(axis=0))
        if x.requires_grad:
            g_norm = grad * gamma.data
            x.accumulate(
                inv_std
                * (
                    g_norm
                    - g_norm.mean(axis=-1, keepdims=True)
                    - normalized * (g_norm * normalized).mean(axis=-1, keepdims=True)
                )
            )

    out = normalized * gamma.data + beta.data
    return Tensor.from_op(out, (x, gamma, beta), backward, "layer_norm")


def embedding_lookup(table: Tensor, ids: Any) -> Tensor:
    """Gather rows of a (V, d) table; `ids` may have any integer shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeMismatch(f"embedding table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexOutOfRange(
            f"ids must lie in [0, {table.shape[0]}), got {ids.min()}..{ids.max()}"
        )

    def backward(grad: np.ndarray) -> None:
        table_grad = np.zeros_like(table.data)
        np.add.at(table_grad, ids, grad)
        table.accumulate(table_grad)

    return Tensor.from_op(table.data[ids], (table,), backward, "embedding_lookup")


def getitem(x: Tensor, key: Any) -> Tensor:
    """numpy indexing (slices and integer arrays) with scatter-add backward."""
    try:
        out = x.data[key]
    except IndexError as e:
        raise IndexOutOfRange(f"index {key!r} out of range for shape {x.shape}") from e

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        np.add.at(full, key, grad)
        x.accumulate(full)

    return Tensor.from_op(np.array(out, dtype=np.float64), (x,), backward, "getitem")


def pad_axis(x: Tensor, length: int, axis: int = 1) -> Tensor:
    """Zero-pad `x` along `axis` up to `length` entries."""
    current = x.shape[axis]
    if current > length:
        raise ShapeMismatch(f"cannot pad axis {axis} of size {current} down to {length}")
    if current == length:
        return x
    widths = [(0, 0)] * x.ndim
    widths[axis] = (0, length - current)

    def backward(grad: np.ndarray) -> None:
        x.accumulate(np.take(grad, np.arange(current), axis=axis))

    return Tensor.from_op(np.pad(x.data, widths), (x,), backward, "pad_axis")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(f"cannot reshape {original} to {tuple(shape)}") from e

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad.reshape(original))

    return Tensor.from_op(out, (x,), backward, "reshape")


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(grad: np.ndarray) -> None:
        x.accumulate(np.transpose(grad, inverse))

    return Tensor.from_op(np.transpose(x.data, axes), (x,), backward, "transpose")


def sum(x: Tensor, axis: Optional[Any] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def backward(grad: np.ndarray) -> None:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        x.accumulate(np.broadcast_to(grad, x.shape))

    return Tensor.from_op(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward, "sum")


def mean(x: Tensor, axis: Optional[Any] = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def cross_entropy(
    logits: Tensor, labels: Any, class_weights: Optional[np.ndarray] = None
) -> Tensor:
    """
    Mean negative log-likelihood of `labels` under softmax(logits).

    logits: (B, K); labels: (B,) integers in [0, K). With `class_weights`, the
    mean is weighted by the weight of each item's label.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch(
            f"cross_entropy needs (B, K) logits and (B,) labels, "
            f"got {logits.shape} and {labels.shape}"
        )
    batch, num_classes = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise IndexOutOfRange(f"labels must lie in [0, {num_classes})")

    log_probs = logits.data - _logsumexp(logits.data, axis=1)
    rows = np.arange(batch)
    if class_weights is None:
        item_weights = np.full(batch, 1.0 / batch)
    else:
        raw = np.asarray(class_weights, dtype=np.float64)[labels]
        item_weights = raw / raw.sum()
    loss = -(item_weights * log_probs[rows, labels]).sum()

    def backward(grad: np.ndarray) -> None:
        local = np.exp(log_probs)
        local[rows, labels] -= 1.0
        logits.accumulate(float(grad) * local * item_weights[:, None])

    return Tensor.from_op(np.array(loss), (logits,), backward, "cross_entropy")
