"""Central finite-difference gradient checks."""

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_gradient(
    loss_fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-5
) -> np.ndarray:
    """d loss / d tensor by central differences, perturbing `tensor.data` in place."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = loss_fn().item()
        flat[i] = original - h
        minus = loss_fn().item()
        flat[i] = original
        flat_grad[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| scaled by the larger gradient magnitude (floored at 1e-8)."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradient_check(
    loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], h: float = 1e-5
) -> float:
    """
    Largest relative error between backward() and finite differences over `tensors`.

    `loss_fn` must rebuild the scalar loss from the current tensor values.
    """
    for tensor in tensors:
        tensor.zero_grad()
    loss_fn().backward()
    analytic = [
        np.zeros_like(t.data) if t.grad is None else np.array(t.grad) for t in tensors
    ]
    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        worst = max(worst, relative_error(grad, numerical_gradient(loss_fn, tensor, h)))
    return worst
