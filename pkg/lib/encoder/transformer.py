"""
Micro transformer encoder (BERT-style, post-norm, learned positions).

Each batch is trimmed to its longest real sequence before computing, so cost
grows with the number of real tokens; hidden states are padded back to
max_len afterwards. Padding keys receive a -1e9 attention bias, which makes
their softmax weight exactly zero.
"""

from typing import Tuple, Union

import numpy as np

from config.base_config import EncoderConfig
from config.enums import EncoderKind
from lib.autodiff import Tensor
from lib.autodiff import functional as F
from lib.errors import ConfigError, ShapeMismatch
from lib.tokenizer import TokenBatch, TokenSequence

from .params import EncoderParams

MASK_BIAS = -1e9

SequenceInput = Union[TokenSequence, TokenBatch]


def as_batch(seq: SequenceInput) -> Tuple[TokenBatch, bool]:
    """Wrap a single sequence as a batch of one; the flag records the wrap."""
    if isinstance(seq, TokenSequence):
        return TokenBatch(ids=seq.ids[None, :], mask=seq.mask[None, :]), True
    return seq, False


def key_mask_bias(mask: np.ndarray) -> np.ndarray:
    """(B, T) mask -> (B, 1, 1, T) additive bias, MASK_BIAS at padding keys."""
    return np.where(mask[:, None, None, :] > 0, 0.0, MASK_BIAS)


def multi_head_attention(
    x: Tensor,
    params: EncoderParams,
    mask: np.ndarray,
    num_heads: int,
    layer: int = 0,
    return_weights: bool = False,
):
    """
    Scaled dot-product self-attention over `num_heads` heads.

    x: (B, T, H) or (T, H); mask: matching (B, T) or (T,) with 1 for real tokens.
    Returns the output-projected context, and the (B, A, T, T) attention
    weights when `return_weights` is set.
    """
    single = x.ndim == 2
    if single:
        x = F.reshape(x, (1,) + x.shape)
        mask = np.asarray(mask)[None, :]
    batch, length, hidden = x.shape
    if hidden % num_heads != 0:
        raise ShapeMismatch(f"hidden size {hidden} is not divisible by {num_heads} heads")
    if mask.shape != (batch, length):
        raise ShapeMismatch(f"mask shape {mask.shape} does not match input {(batch, length)}")
    head_dim = hidden // num_heads
    prefix = f"layers.{layer}.attention"

    def split_heads(t: Tensor) -> Tensor:
        return F.transpose(F.reshape(t, (batch, length, num_heads, head_dim)), (0, 2, 1, 3))

    query = split_heads(F.matmul(x, params[f"{prefix}.query"]))
    key = split_heads(F.matmul(x, params[f"{prefix}.key"]))
    value = split_heads(F.matmul(x, params[f"{prefix}.value"]))

    scores = F.scale(F.matmul(query, F.transpose(key, (0, 1, 3, 2))), 1.0 / np.sqrt(head_dim))
    scores = F.add(scores, Tensor(key_mask_bias(mask)))
    weights = F.softmax(scores, axis=-1)

    context = F.transpose(F.matmul(weights, value), (0, 2, 1, 3))
    context = F.reshape(context, (batch, length, hidden))
    out = F.matmul(context, params[f"{prefix}.output"])

    if single:
        out = F.reshape(out, (length, hidden))
    if return_weights:
        return out, weights
    return out


def _feed_forward(x: Tensor, params: EncoderParams, prefix: str) -> Tensor:
    inner = F.add(F.matmul(x, params[f"{prefix}.inner.weight"]), params[f"{prefix}.inner.bias"])
    inner = F.relu(inner)
    return F.add(F.matmul(inner, params[f"{prefix}.outer.weight"]), params[f"{prefix}.outer.bias"])


def encode_transformer(
    params: EncoderParams, config: EncoderConfig, seq: SequenceInput
) -> Tuple[Tensor, Tensor]:
    """
    Hidden states and [CLS]-pooled representation.

    Returns (hidden, pooled) of shapes (max_len, H) and (H,) for a single
    sequence, (B, max_len, H) and (B, H) for a batch.
    """
    if config.kind != EncoderKind.TRANSFORMER:
        raise ConfigError(
            f"encode_transformer needs a transformer config, got {config.kind.value}"
        )
    params.validate(config, check_finite=False)
    batch, single = as_batch(seq)
    if batch.max_len > config.max_len:
        raise ShapeMismatch(f"sequence length {batch.max_len} exceeds max_len {config.max_len}")

    length = int(batch.lengths.max())
    ids = batch.ids[:, :length]
    mask = batch.mask[:, :length]

    positions = F.getitem(params["embeddings.position"], slice(0, length))
    x = F.add(F.embedding_lookup(params["embeddings.token"], ids), positions)

    for layer in range(config.num_layers):
        prefix = f"layers.{layer}"
        attended = multi_head_attention(x, params, mask, config.num_heads, layer=layer)
        x = F.layer_norm(
            F.add(x, attended),
            params[f"{prefix}.attention_norm.gamma"],
            params[f"{prefix}.attention_norm.beta"],
        )
        x = F.layer_norm(
            F.add(x, _feed_forward(x, params, f"{prefix}.ffn")),
            params[f"{prefix}.ffn_norm.gamma"],
            params[f"{prefix}.ffn_norm.beta"],
        )

    pooled = F.getitem(x, (slice(None), 0))
    hidden = F.pad_axis(x, batch.max_len, axis=1)
    if single:
        return F.getitem(hidden, 0), F.getitem(pooled, 0)
    return hidden, pooled
