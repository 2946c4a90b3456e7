"""
Masked-LM pretraining of the transformer encoder.

Content positions are masked independently with `mask_prob` and replaced by
[MASK] (no keep/replace split). The output projection is tied to the token
embedding table: logits = hidden . embeddings^T. Only masked positions enter
the loss.
"""

import json
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.base_config import EncoderConfig, MaskingSpec, PretrainConfig
from config.enums import EncoderKind
from lib.autodiff import Adam, Tensor, no_grad
from lib.autodiff import functional as F
from lib.encoder import EncoderParams, encode_transformer
from lib.errors import ConfigError, EmptyCorpus, ShapeMismatch
from lib.tokenizer import MASK_ID, TokenBatch, TokenSequence
from utils.seeds import derive_seed, rng_for

from .corpus import clean_text

logger = logging.getLogger(__name__)

MaskTargets = List[Tuple[int, int]]


def mask_tokens(seq: TokenSequence, spec: MaskingSpec) -> Tuple[TokenSequence, MaskTargets]:
    """
    Replace a random subset of content tokens by [MASK].

    Returns the masked sequence and (position, original id) targets in
    position order. The draw depends only on the sequence length and the seed.
    """
    positions = seq.content_positions()
    draws = np.random.default_rng(spec.seed).random(len(positions))
    selected = positions[draws < spec.mask_prob]
    if not len(selected):
        return seq, []
    ids = seq.ids.copy()
    targets = [(int(p), int(seq.ids[p])) for p in selected]
    ids[selected] = MASK_ID
    return TokenSequence(ids=ids, mask=seq.mask.copy()), targets


def masked_lm_loss(
    hidden: Tensor, token_table: Tensor, positions: np.ndarray, targets: np.ndarray
) -> Tensor:
    """
    Mean cross-entropy of `targets` at `positions` under tied-embedding logits.

    hidden (T, H) takes positions of shape (M,); hidden (B, T, H) takes (M, 2)
    rows of (batch index, position).
    """
    positions = np.asarray(positions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if hidden.ndim == 2:
        key = positions
    elif hidden.ndim == 3 and positions.ndim == 2 and positions.shape[1] == 2:
        key = (positions[:, 0], positions[:, 1])
    else:
        raise ShapeMismatch(f"positions {positions.shape} do not index hidden {hidden.shape}")
    if len(targets) != len(positions) or not len(targets):
        raise ShapeMismatch(f"{len(positions)} positions for {len(targets)} targets")
    gathered = F.getitem(hidden, key)
    logits = F.matmul(gathered, F.transpose(token_table))
    return F.cross_entropy(logits, targets)


def _mask_batch(
    sequences: Sequence[TokenSequence], indices: Sequence[int], spec: MaskingSpec, epoch: int
) -> Tuple[TokenBatch, np.ndarray, np.ndarray]:
    masked, positions, targets = [], [], []
    for row, index in enumerate(indices):
        seed = derive_seed(spec.seed, epoch, index)
        sequence_spec = MaskingSpec(mask_prob=spec.mask_prob, seed=seed)
        seq, seq_targets = mask_tokens(sequences[index], sequence_spec)
        masked.append(seq)
        for position, original in seq_targets:
            positions.append((row, position))
            targets.append(original)
    return (
        TokenBatch.from_sequences(masked),
        np.array(positions, dtype=np.int64).reshape(-1, 2),
        np.array(targets, dtype=np.int64),
    )


def _check_corpus(config: EncoderConfig, corpus: Sequence[TokenSequence]) -> None:
    if config.kind != EncoderKind.TRANSFORMER:
        raise ConfigError(
            f"Masked-LM pretraining needs a transformer encoder, got {config.kind.value}"
        )
    if not corpus:
        raise EmptyCorpus("Pretraining corpus is empty")
    if not any(len(seq.content_positions()) for seq in corpus):
        raise EmptyCorpus("Pretraining corpus holds no text token to mask")


def pretrain_mlm(
    params: EncoderParams,
    config: EncoderConfig,
    corpus: Sequence[TokenSequence],
    pconf: PretrainConfig,
) -> Tuple[EncoderParams, List[float]]:
    """
    Train the encoder on masked-token prediction.

    The input parameters are never modified; a trained copy is returned with
    the per-epoch mean loss over masked positions. Batch order and masks are
    derived from the masking seed, the epoch and the sequence index.
    """
    _check_corpus(config, corpus)
    params.validate(config)
    trained = params.copy(requires_grad=True)
    curve: List[float] = []
    if pconf.epochs == 0:
        trained.set_requires_grad(False)
        return trained, curve

    optimizer = Adam(trained.tensors(), lr=pconf.learning_rate)
    spec = pconf.masking
    logger.info(
        f"Pretraining on {len(corpus)} sequences: {pconf.epochs} epochs, "
        f"batch {pconf.batch_size}, lr {pconf.learning_rate}, mask_prob {spec.mask_prob}"
    )

    for epoch in range(pconf.epochs):
        order = rng_for(spec.seed, epoch).permutation(len(corpus))
        total_loss, total_targets = 0.0, 0
        for start in range(0, len(order), pconf.batch_size):
            indices = order[start : start + pconf.batch_size]
            batch, positions, targets = _mask_batch(corpus, indices, spec, epoch)
            if not len(targets):
                continue
            optimizer.zero_grad()
            hidden, _ = encode_transformer(trained, config, batch)
            loss = masked_lm_loss(hidden, trained["embeddings.token"], positions, targets)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(targets)
            total_targets += len(targets)
            logger.debug(f"Pretrain epoch {epoch + 1} batch at {start}: loss {loss.item():.4f}")

        if total_targets:
            curve.append(total_loss / total_targets)
        else:
            logger.warning(f"Epoch {epoch + 1} masked no position; loss recorded as NaN")
            curve.append(math.nan)
        logger.info(f"Pretrain epoch {epoch + 1}/{pconf.epochs}: mlm loss {curve[-1]:.4f}")

    trained.set_requires_grad(False)
    trained.zero_grad()
    return trained, curve


def evaluate_mlm(
    params: EncoderParams,
    config: EncoderConfig,
    corpus: Sequence[TokenSequence],
    masking: MaskingSpec,
    batch_size: int = 64,
) -> Tuple[float, float]:
    """Mean masked-LM loss and masked-position accuracy (first-index argmax)."""
    _check_corpus(config, corpus)
    total_loss, correct, count = 0.0, 0, 0
    with no_grad():
        for start in range(0, len(corpus), batch_size):
            indices = list(range(start, min(start + batch_size, len(corpus))))
            batch, positions, targets = _mask_batch(corpus, indices, masking, epoch=0)
            if not len(targets):
                continue
            hidden, _ = encode_transformer(params, config, batch)
            gathered = hidden.data[positions[:, 0], positions[:, 1]]
            logits = gathered @ params["embeddings.token"].data.T
            loss = masked_lm_loss(hidden, params["embeddings.token"], positions, targets)
            total_loss += loss.item() * len(targets)
            correct += int((logits.argmax(axis=1) == targets).sum())
            count += len(targets)
    if not count:
        raise EmptyCorpus("No position was masked during evaluation")
    return total_loss / count, correct / count


def read_unlabeled_corpus(path: str) -> List[str]:
    """
    Cleaned texts of a pretraining corpus.

    Lines holding a JSON object are read through their "text" field, other
    lines are taken as plain text. Texts empty after cleaning are skipped.
    """
    texts = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                line = json.loads(line).get("text", "")
            text = clean_text(line)
            if text:
                texts.append(text)
    if not texts:
        raise EmptyCorpus(f"No text found in {path}")
    return texts


def _json_loss(value: float) -> Optional[float]:
    """Loss value for the curve file, None (null) when non-finite."""
    value = float(value)
    return value if math.isfinite(value) else None


def loss_curve_json(curve: Sequence[float], initial: Optional[float] = None) -> str:
    payload = {"epochs": len(curve), "loss": [_json_loss(v) for v in curve]}
    if initial is not None:
        payload["initial_loss"] = _json_loss(initial)
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
