"""
Softmax classification head over a pooled representation.

linear:       x = W.h + b,                          W: (K, H)
relu_hidden:  z = relu(W_p.h + b_p); x = W.z + b,   W_p: (P, H), W: (K, P)
"""

import logging
from typing import Dict, Mapping, Optional

import numpy as np

from config.base_config import HeadConfig
from config.enums import HeadKind
from lib.autodiff import Tensor
from lib.autodiff import functional as F
from lib.errors import ShapeMismatch

logger = logging.getLogger(__name__)

INIT_STD = 0.02


class ClassificationHead:
    def __init__(
        self,
        weight: Tensor,
        bias: Tensor,
        hidden_weight: Optional[Tensor] = None,
        hidden_bias: Optional[Tensor] = None,
    ):
        if (hidden_weight is None) != (hidden_bias is None):
            raise ShapeMismatch("hidden_weight and hidden_bias must be given together")
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeMismatch(f"head weight {weight.shape} and bias {bias.shape} disagree")
        if hidden_weight is not None and (
            hidden_weight.ndim != 2
            or hidden_bias.shape != (hidden_weight.shape[0],)
            or weight.shape[1] != hidden_weight.shape[0]
        ):
            raise ShapeMismatch(
                f"hidden layer {hidden_weight.shape} does not feed head weight {weight.shape}"
            )
        self.weight = weight
        self.bias = bias
        self.hidden_weight = hidden_weight
        self.hidden_bias = hidden_bias

    @property
    def kind(self) -> HeadKind:
        return HeadKind.LINEAR if self.hidden_weight is None else HeadKind.RELU_HIDDEN

    @property
    def num_classes(self) -> int:
        return int(self.weight.shape[0])

    @property
    def input_dim(self) -> int:
        source = self.weight if self.hidden_weight is None else self.hidden_weight
        return int(source.shape[1])

    @classmethod
    def init(cls, config: HeadConfig, input_dim: int, seed: int) -> "ClassificationHead":
        rng = np.random.default_rng(seed)
        if config.kind == HeadKind.RELU_HIDDEN:
            hidden_weight = Tensor(rng.normal(0.0, INIT_STD, (config.intermediate_dim, input_dim)))
            hidden_bias = Tensor(np.zeros(config.intermediate_dim))
            shape = (config.num_classes, config.intermediate_dim)
            weight = Tensor(rng.normal(0.0, INIT_STD, shape))
            return cls(weight, Tensor(np.zeros(config.num_classes)), hidden_weight, hidden_bias)
        weight = Tensor(rng.normal(0.0, INIT_STD, (config.num_classes, input_dim)))
        return cls(weight, Tensor(np.zeros(config.num_classes)))

    def params(self) -> Dict[str, Tensor]:
        named = {"head.weight": self.weight, "head.bias": self.bias}
        if self.hidden_weight is not None:
            named["head.hidden.weight"] = self.hidden_weight
            named["head.hidden.bias"] = self.hidden_bias
        return named

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self.params().items()}

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ClassificationHead":
        hidden_weight = arrays.get("head.hidden.weight")
        hidden_bias = arrays.get("head.hidden.bias")
        return cls(
            Tensor(arrays["head.weight"]),
            Tensor(arrays["head.bias"]),
            None if hidden_weight is None else Tensor(hidden_weight),
            None if hidden_bias is None else Tensor(hidden_bias),
        )

    def copy(self, requires_grad: bool = False) -> "ClassificationHead":
        head = ClassificationHead.from_arrays(self.arrays())
        head.set_requires_grad(requires_grad)
        return head

    def set_requires_grad(self, flag: bool) -> None:
        for tensor in self.params().values():
            tensor.requires_grad = flag

    def logits(self, pooled: Tensor) -> Tensor:
        """(H,) -> (K,) or (B, H) -> (B, K)."""
        single = pooled.ndim == 1
        if single:
            pooled = F.reshape(pooled, (1, pooled.shape[0]))
        if pooled.shape[-1] != self.input_dim:
            raise ShapeMismatch(
                f"pooled width {pooled.shape[-1]} does not match head input {self.input_dim}"
            )
        features = pooled
        if self.hidden_weight is not None:
            features = F.relu(
                F.add(F.matmul(features, F.transpose(self.hidden_weight)), self.hidden_bias)
            )
        logits = F.add(F.matmul(features, F.transpose(self.weight)), self.bias)
        if single:
            return F.reshape(logits, (self.num_classes,))
        return logits
