"""
Named encoder parameters.

Names are dotted paths, e.g. `layers.0.attention.query`; their order is fixed
by `expected_shapes` and is the order used for initialization, checkpoints and
optimizer state.
"""

import logging
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from config.base_config import EncoderConfig
from config.enums import EncoderKind
from lib.autodiff import Tensor, tensors_digest
from lib.autodiff.checkpoint import check_shapes
from lib.errors import NonFiniteValue

logger = logging.getLogger(__name__)

INIT_STD = 0.02


def expected_shapes(config: EncoderConfig) -> Dict[str, Tuple[int, ...]]:
    """Parameter names and shapes implied by a config, in canonical order."""
    hidden, ffn = config.hidden_dim, config.ffn_dim
    shapes: Dict[str, Tuple[int, ...]] = {"embeddings.token": (config.vocab_size, hidden)}

    if config.kind == EncoderKind.DAN:
        shapes.update(
            {
                "dan.inner.weight": (hidden, ffn),
                "dan.inner.bias": (ffn,),
                "dan.outer.weight": (ffn, hidden),
                "dan.outer.bias": (hidden,),
            }
        )
        return shapes

    shapes["embeddings.position"] = (config.max_len, hidden)
    for layer in range(config.num_layers):
        prefix = f"layers.{layer}"
        for projection in ("query", "key", "value", "output"):
            shapes[f"{prefix}.attention.{projection}"] = (hidden, hidden)
        shapes[f"{prefix}.attention_norm.gamma"] = (hidden,)
        shapes[f"{prefix}.attention_norm.beta"] = (hidden,)
        shapes[f"{prefix}.ffn.inner.weight"] = (hidden, ffn)
        shapes[f"{prefix}.ffn.inner.bias"] = (ffn,)
        shapes[f"{prefix}.ffn.outer.weight"] = (ffn, hidden)
        shapes[f"{prefix}.ffn.outer.bias"] = (hidden,)
        shapes[f"{prefix}.ffn_norm.gamma"] = (hidden,)
        shapes[f"{prefix}.ffn_norm.beta"] = (hidden,)
    return shapes


class EncoderParams:
    """Ordered mapping of parameter name to Tensor."""

    def __init__(self, tensors: Mapping[str, Tensor]):
        self._tensors: Dict[str, Tensor] = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self) -> Dict[str, Tensor]:
        return dict(self._tensors)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self._tensors.items()}

    @classmethod
    def from_arrays(
        cls, arrays: Mapping[str, np.ndarray], requires_grad: bool = False
    ) -> "EncoderParams":
        return cls(
            {
                name: Tensor(values, requires_grad=requires_grad, name=name)
                for name, values in arrays.items()
            }
        )

    def copy(self, requires_grad: Optional[bool] = None) -> "EncoderParams":
        """Deep copy; `requires_grad` overrides the tracking flag of every tensor."""
        copied = {}
        for name, tensor in self._tensors.items():
            flag = tensor.requires_grad if requires_grad is None else requires_grad
            copied[name] = Tensor(tensor.data, requires_grad=flag, name=name)
        return EncoderParams(copied)

    def set_requires_grad(self, flag: bool) -> None:
        for tensor in self._tensors.values():
            tensor.requires_grad = flag

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def parameter_count(self) -> int:
        return int(sum(tensor.size for tensor in self._tensors.values()))

    def digest(self) -> str:
        return tensors_digest(self.arrays())

    def validate(self, config: EncoderConfig, check_finite: bool = True) -> None:
        """Raise ShapeMismatch on config disagreement, NonFiniteValue on NaN/Inf."""
        check_shapes(self.arrays(), expected_shapes(config))
        if check_finite:
            for name, tensor in self._tensors.items():
                if not np.isfinite(tensor.data).all():
                    raise NonFiniteValue(f"Encoder parameter '{name}' holds non-finite values")


def init_encoder_params(config: EncoderConfig, seed: int) -> EncoderParams:
    """Normal(0, 0.02) weights and embeddings, unit layer-norm gains, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in expected_shapes(config).items():
        if name.endswith(".gamma"):
            arrays[name] = np.ones(shape)
        elif name.endswith(".beta") or name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.normal(0.0, INIT_STD, size=shape)
    params = EncoderParams.from_arrays(arrays)
    logger.info(
        f"Initialized {config.kind.value} encoder: "
        f"{params.parameter_count()} parameters (seed={seed})"
    )
    return params
