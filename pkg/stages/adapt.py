"""
Target-task adaptation: softmax classification head over the pooled encoder output.

Frozen mode trains the head on features extracted once with the encoder
untracked; unfrozen mode trains encoder and head jointly. Both use Adam,
cross-entropy and a seeded per-epoch shuffle.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from config.base_config import EncoderConfig, FineTuneConfig
from config.enums import AdaptMode, EmotionClass
from lib.autodiff import Adam, Tensor, no_grad
from lib.autodiff import functional as F
from lib.encoder import EncoderParams, encode
from lib.encoder.transformer import SequenceInput
from lib.errors import EmptyDataset, LabelOutOfRange, ShapeMismatch
from lib.head import ClassificationHead
from lib.tokenizer import TokenBatch, TokenSequence, Vocabulary, encode_many
from lib.tokenizer import encode as encode_text

from .corpus import Dataset
from .evaluation import MetricsReport, confusion, mean_std, metrics

logger = logging.getLogger(__name__)

FEATURE_BATCH = 256


def forward_classify(
    encoder_params: EncoderParams,
    config: EncoderConfig,
    head: ClassificationHead,
    seq: SequenceInput,
) -> Tensor:
    """softmax(W.h + b) for a TokenSequence (K,) or a TokenBatch (B, K)."""
    if head.input_dim != config.hidden_dim:
        raise ShapeMismatch(
            f"head input {head.input_dim} does not match encoder hidden size {config.hidden_dim}"
        )
    return F.softmax(head.logits(encode(encoder_params, config, seq)), axis=-1)


@dataclass
class EmotionClassifier:
    """Everything needed to classify text: encoder, head and vocabulary."""

    encoder_config: EncoderConfig
    encoder_params: EncoderParams
    head: ClassificationHead
    vocab: Vocabulary

    @property
    def max_len(self) -> int:
        return self.encoder_config.max_len

    def probabilities(self, sequences: Sequence[TokenSequence]) -> np.ndarray:
        """(N, K) class probabilities, computed without tracking in fixed-size batches."""
        if not sequences:
            return np.zeros((0, self.head.num_classes))
        chunks = []
        with no_grad():
            for start in range(0, len(sequences), FEATURE_BATCH):
                batch = TokenBatch.from_sequences(sequences[start : start + FEATURE_BATCH])
                probs = forward_classify(
                    self.encoder_params, self.encoder_config, self.head, batch
                )
                chunks.append(probs.data)
        return np.concatenate(chunks, axis=0)

    def predict_indices(self, texts: Sequence[str]) -> np.ndarray:
        probs = self.probabilities(encode_many(texts, self.vocab, self.max_len))
        return probs.argmax(axis=1) if len(probs) else np.zeros(0, dtype=np.int64)

    def predict_classes(self, texts: Sequence[str]) -> List[EmotionClass]:
        return [EmotionClass.from_index(int(i)) for i in self.predict_indices(texts)]


def predict(
    model: EmotionClassifier,
    text: str,
    vocab: Optional[Vocabulary] = None,
    max_len: Optional[int] = None,
) -> Tuple[EmotionClass, np.ndarray]:
    """
    Most probable class and the probability vector.

    Ties go to the first class in canonical order.
    """
    seq = encode_text(text, vocab or model.vocab, max_len or model.max_len)
    with no_grad():
        probs = forward_classify(
            model.encoder_params, model.encoder_config, model.head, seq
        ).data
    return EmotionClass.from_index(int(np.argmax(probs))), probs


def predict_batch(
    model: EmotionClassifier, texts: Sequence[str]
) -> List[Tuple[EmotionClass, np.ndarray]]:
    probs = model.probabilities(encode_many(texts, model.vocab, model.max_len))
    return [(EmotionClass.from_index(int(np.argmax(row))), row) for row in probs]


class EpochRecord(BaseModel):
    epoch: int = Field(ge=1)
    train_loss: float
    val_micro_f1: float = Field(ge=0.0, le=1.0)
    val_accuracy: float = Field(ge=0.0, le=1.0)


class FineTuneHistory(BaseModel):
    mode: AdaptMode
    batch_size: int
    learning_rate: float
    seed: int
    epochs: List[EpochRecord] = Field(default_factory=list)
    encoder_unchanged: Optional[bool] = None

    def val_scores(self) -> List[float]:
        return [record.val_micro_f1 for record in self.epochs]

    def summary(self) -> Dict[str, float]:
        """Mean and sample standard deviation of the per-epoch validation micro-F."""
        mean, std = mean_std(self.val_scores())
        return {"val_micro_f1_mean": mean, "val_micro_f1_std": std}


def class_weights(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Inverse-frequency weights N / (K * count); classes absent from training get 0."""
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    weights = np.zeros(num_classes)
    present = counts > 0
    weights[present] = len(labels) / (num_classes * counts[present])
    return weights


def _check_inputs(
    config: EncoderConfig, head: ClassificationHead, train: Dataset, val: Dataset
) -> Tuple[np.ndarray, np.ndarray]:
    if not len(train):
        raise EmptyDataset("Fine-tuning needs a non-empty training set")
    if not len(val):
        raise EmptyDataset("Fine-tuning needs a non-empty validation set")
    if head.input_dim != config.hidden_dim:
        raise ShapeMismatch(
            f"head input {head.input_dim} does not match encoder hidden size {config.hidden_dim}"
        )
    train_labels, val_labels = train.label_indices(), val.label_indices()
    top = max(int(train_labels.max()), int(val_labels.max()))
    if top >= head.num_classes:
        raise LabelOutOfRange(f"label index {top} outside the head's {head.num_classes} classes")
    return train_labels, val_labels


def _features(
    params: EncoderParams, config: EncoderConfig, sequences: Sequence[TokenSequence]
) -> np.ndarray:
    chunks = []
    with no_grad():
        for start in range(0, len(sequences), FEATURE_BATCH):
            batch = TokenBatch.from_sequences(sequences[start : start + FEATURE_BATCH])
            chunks.append(encode(params, config, batch).data)
    return np.concatenate(chunks, axis=0)


def _validation_scores(probs: np.ndarray, labels: np.ndarray) -> Tuple[float, float]:
    report = metrics(confusion(probs.argmax(axis=1), labels, probs.shape[1]))
    return report.micro_f, report.accuracy


def fine_tune(
    encoder_params: EncoderParams,
    config: EncoderConfig,
    head: ClassificationHead,
    train: Dataset,
    val: Dataset,
    fconf: FineTuneConfig,
    vocab: Vocabulary,
) -> Tuple[EmotionClassifier, FineTuneHistory]:
    """
    Train a classifier on `train`, scoring `val` after every epoch.

    The inputs are never modified: the returned model owns copies of the
    encoder parameters and the head. In frozen mode the returned encoder is
    bit-identical to the input and the check is recorded in the history.
    """
    train_labels, val_labels = _check_inputs(config, head, train, val)
    encoder_params.validate(config)
    history = FineTuneHistory(
        mode=fconf.mode,
        batch_size=fconf.batch_size,
        learning_rate=fconf.learning_rate,
        seed=fconf.seed,
    )
    frozen = fconf.mode == AdaptMode.FROZEN
    digest_before = encoder_params.digest() if frozen else None

    encoder = encoder_params.copy(requires_grad=not frozen)
    trained_head = head.copy(requires_grad=True)
    train_seqs = encode_many(train.texts(), vocab, config.max_len)
    val_seqs = encode_many(val.texts(), vocab, config.max_len)
    weights = class_weights(train_labels, head.num_classes) if fconf.class_weighting else None

    trainable = dict(trained_head.params())
    if frozen:
        train_features = _features(encoder, config, train_seqs)
        val_features = _features(encoder, config, val_seqs)
    else:
        trainable.update(encoder.tensors())
    optimizer = Adam(trainable, lr=fconf.learning_rate)
    rng = np.random.default_rng(fconf.seed)

    logger.info(
        f"Fine-tuning ({fconf.mode.value}) on {len(train)} messages, validating on {len(val)}: "
        f"{fconf.epochs} epochs, batch {fconf.batch_size}, lr {fconf.learning_rate}"
    )
    for epoch in range(1, fconf.epochs + 1):
        order = rng.permutation(len(train))
        total_loss = 0.0
        for start in range(0, len(order), fconf.batch_size):
            idx = order[start : start + fconf.batch_size]
            optimizer.zero_grad()
            if frozen:
                pooled = Tensor(train_features[idx])
            else:
                batch = TokenBatch.from_sequences([train_seqs[i] for i in idx])
                pooled = encode(encoder, config, batch)
            loss = F.cross_entropy(trained_head.logits(pooled), train_labels[idx], weights)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(idx)
            logger.debug(f"epoch {epoch} batch at {start}: loss {loss.item():.4f}")

        with no_grad():
            if frozen:
                val_probs = F.softmax(trained_head.logits(Tensor(val_features)), axis=-1).data
            else:
                model = EmotionClassifier(config, encoder, trained_head, vocab)
                val_probs = model.probabilities(val_seqs)
        micro_f, accuracy = _validation_scores(val_probs, val_labels)
        history.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_loss=total_loss / len(train),
                val_micro_f1=micro_f,
                val_accuracy=accuracy,
            )
        )
        logger.info(
            f"Epoch {epoch}/{fconf.epochs}: train loss {total_loss / len(train):.4f}, "
            f"val micro-F {micro_f:.4f}, val accuracy {accuracy:.4f}"
        )

    encoder.set_requires_grad(False)
    encoder.zero_grad()
    trained_head.set_requires_grad(False)
    for tensor in trained_head.params().values():
        tensor.zero_grad()

    if frozen:
        history.encoder_unchanged = encoder.digest() == digest_before
        logger.info(f"encoder unchanged: {str(history.encoder_unchanged).lower()}")
    return EmotionClassifier(config, encoder, trained_head, vocab), history


def evaluate_dataset(model: EmotionClassifier, dataset: Dataset) -> MetricsReport:
    """MetricsReport of `model` on a labeled dataset."""
    if not len(dataset):
        raise EmptyDataset("Cannot evaluate on an empty dataset")
    preds = model.predict_indices(dataset.texts())
    return metrics(confusion(preds, dataset.label_indices(), model.head.num_classes))
