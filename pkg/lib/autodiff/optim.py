"""Adam with bias correction."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from lib.errors import ShapeMismatch

from .tensor import Tensor


@dataclass
class AdamState:
    """
    Moment buffers and step counter.

    Buffers are created lazily, shaped like their parameter, keyed by the
    parameter name.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
) -> None:
    """
    Apply one Adam update in place.

    A missing gradient counts as a zero gradient: the moments still decay.
    """
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)
        if grad.shape != param.shape:
            raise ShapeMismatch(
                f"gradient for '{name}' has shape {grad.shape}, parameter has {param.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m = state.m[name]
        v = state.v[name]
        if m.shape != param.shape:
            raise ShapeMismatch(f"moment buffer for '{name}' has shape {m.shape}")

        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)

        param.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class Adam:
    """Optimizer bound to a named parameter set."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        adam_step(self.params, {name: p.grad for name, p in self.params.items()}, self.state)
