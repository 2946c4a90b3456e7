"""Deep averaging network: mean of content-token embeddings, then two ReLU layers."""

import numpy as np

from config.base_config import EncoderConfig
from config.enums import EncoderKind
from lib.autodiff import Tensor
from lib.autodiff import functional as F
from lib.errors import ConfigError, EmptySequence, ShapeMismatch

from .params import EncoderParams
from .transformer import SequenceInput, as_batch


def content_weights(mask: np.ndarray) -> np.ndarray:
    """
    (B, T) averaging weights over text tokens, CLS and SEP excluded.

    Raises EmptySequence when a row holds no text token.
    """
    lengths = mask.sum(axis=1)
    positions = np.arange(mask.shape[1])[None, :]
    content = (positions >= 1) & (positions < (lengths[:, None] - 1))
    counts = content.sum(axis=1)
    if np.any(counts == 0):
        raise EmptySequence("DAN encoding needs at least one text token per sequence")
    return content / counts[:, None]


def encode_dan(params: EncoderParams, config: EncoderConfig, seq: SequenceInput) -> Tensor:
    """Pooled representation of shape (H,) for a sequence, (B, H) for a batch."""
    if config.kind != EncoderKind.DAN:
        raise ConfigError(f"encode_dan needs a dan config, got {config.kind.value}")
    params.validate(config, check_finite=False)
    batch, single = as_batch(seq)
    if batch.max_len > config.max_len:
        raise ShapeMismatch(f"sequence length {batch.max_len} exceeds max_len {config.max_len}")

    length = int(batch.lengths.max())
    ids = batch.ids[:, :length]
    weights = content_weights(batch.mask[:, :length])

    embedded = F.embedding_lookup(params["embeddings.token"], ids)
    averaged = F.matmul(Tensor(weights[:, None, :]), embedded)
    averaged = F.reshape(averaged, (len(batch), config.hidden_dim))

    inner = F.relu(F.add(F.matmul(averaged, params["dan.inner.weight"]), params["dan.inner.bias"]))
    pooled = F.relu(F.add(F.matmul(inner, params["dan.outer.weight"]), params["dan.outer.bias"]))
    if single:
        return F.getitem(pooled, 0)
    return pooled
