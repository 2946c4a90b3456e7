import json
import math

import numpy as np
import pytest
from scipy.special import log_softmax

from config.base_config import EncoderConfig, MaskingSpec, PretrainConfig
from lib.autodiff import Tensor, gradient_check
from lib.encoder import init_encoder_params
from lib.errors import ConfigError, EmptyCorpus, ShapeMismatch
from lib.tokenizer import CLS_ID, MASK_ID, SEP_ID, build_vocab, encode_many
from lib.tokenizer import encode as tokenize
from stages.pretrain import (
    evaluate_mlm,
    loss_curve_json,
    mask_tokens,
    masked_lm_loss,
    pretrain_mlm,
    read_unlabeled_corpus,
)
from stages.synthetic import generate_unlabeled


@pytest.fixture
def mlm_setup(synthetic_spec):
    """One-layer encoder over a small keyword-context corpus."""
    texts = generate_unlabeled(60, synthetic_spec)
    vocab = build_vocab(texts)
    config = EncoderConfig(
        num_layers=1, num_heads=2, hidden_dim=16, ffn_dim=32, max_len=10, vocab_size=vocab.size
    )
    corpus = encode_many(texts, vocab, config.max_len)
    return config, init_encoder_params(config, seed=1), corpus


def test_mask_tokens_masks_content_only(tiny_vocab):
    """Test that CLS, SEP and padding are never masked."""
    seq = tokenize("the sun is bright today", tiny_vocab, 10)
    masked, targets = mask_tokens(seq, MaskingSpec(mask_prob=1.0, seed=3))
    assert [p for p, _ in targets] == [1, 2, 3, 4, 5]
    assert [t for _, t in targets] == list(seq.ids[1:6])
    assert masked.ids[0] == CLS_ID and masked.ids[6] == SEP_ID
    assert set(masked.ids[1:6]) == {MASK_ID}
    np.testing.assert_array_equal(masked.mask, seq.mask)
    assert seq.ids[1] != MASK_ID


def test_mask_tokens_is_seeded(tiny_vocab):
    """Test reproducible draws and the zero-probability case."""
    seq = tokenize("the sun is bright today", tiny_vocab, 10)
    spec = MaskingSpec(mask_prob=0.5, seed=11)
    assert mask_tokens(seq, spec)[1] == mask_tokens(seq, spec)[1]
    unchanged, targets = mask_tokens(seq, MaskingSpec(mask_prob=0.0, seed=11))
    assert unchanged is seq
    assert targets == []


def test_masked_lm_loss_value_and_gradients(rng):
    """Test the tied-embedding cross-entropy at masked positions."""
    hidden = Tensor(rng.normal(size=(2, 5, 4)), requires_grad=True)
    table = Tensor(rng.normal(size=(9, 4)), requires_grad=True)
    positions = np.array([[0, 1], [1, 3], [1, 1]])
    targets = np.array([6, 2, 8])

    gathered = hidden.data[positions[:, 0], positions[:, 1]]
    expected = -log_softmax(gathered @ table.data.T, axis=1)[np.arange(3), targets].mean()
    loss = masked_lm_loss(hidden, table, positions, targets)
    assert loss.item() == pytest.approx(expected)

    def rebuild():
        return masked_lm_loss(hidden, table, positions, targets)

    assert gradient_check(rebuild, [hidden, table]) < 1e-6


def test_masked_lm_loss_ignores_unmasked_positions(rng):
    """Test that rewriting hidden states away from the masked positions leaves the loss as is."""
    hidden = rng.normal(size=(2, 5, 4))
    table = Tensor(rng.normal(size=(9, 4)))
    positions = np.array([[0, 1], [1, 3], [1, 1]])
    targets = np.array([6, 2, 8])
    loss = masked_lm_loss(Tensor(hidden), table, positions, targets).item()

    masked = np.zeros((2, 5), dtype=bool)
    masked[positions[:, 0], positions[:, 1]] = True
    changed = hidden.copy()
    changed[~masked] = rng.normal(size=(int((~masked).sum()), 4)) * 100.0
    assert masked_lm_loss(Tensor(changed), table, positions, targets).item() == loss


def test_masked_lm_loss_shape_checks(rng):
    """Test mismatched positions and targets."""
    hidden = Tensor(rng.normal(size=(2, 5, 4)))
    table = Tensor(rng.normal(size=(9, 4)))
    with pytest.raises(ShapeMismatch):
        masked_lm_loss(hidden, table, np.array([1, 2]), np.array([3, 4]))
    with pytest.raises(ShapeMismatch):
        masked_lm_loss(hidden, table, np.array([[0, 1]]), np.array([3, 4]))
    with pytest.raises(ShapeMismatch):
        masked_lm_loss(hidden, table, np.zeros((0, 2)), np.array([]))


def test_pretraining_lowers_the_loss(mlm_setup):
    """Test a decreasing curve and an untouched input."""
    config, params, corpus = mlm_setup
    digest = params.digest()
    pconf = PretrainConfig(
        epochs=8, batch_size=16, learning_rate=1e-2, masking=MaskingSpec(mask_prob=0.3, seed=2)
    )
    trained, curve = pretrain_mlm(params, config, corpus, pconf)
    assert len(curve) == 8
    assert all(math.isfinite(v) for v in curve)
    assert curve[-1] < curve[0]
    assert params.digest() == digest
    assert trained.digest() != digest
    assert not trained["embeddings.token"].requires_grad


def test_pretraining_is_deterministic(mlm_setup):
    """Test identical results for identical seeds."""
    config, params, corpus = mlm_setup
    pconf = PretrainConfig(epochs=2, batch_size=16, masking=MaskingSpec(seed=5))
    first, curve_a = pretrain_mlm(params, config, corpus, pconf)
    second, curve_b = pretrain_mlm(params, config, corpus, pconf)
    assert curve_a == curve_b
    assert first.digest() == second.digest()


def test_zero_epochs_returns_a_copy(mlm_setup):
    """Test that no epoch means no update."""
    config, params, corpus = mlm_setup
    trained, curve = pretrain_mlm(params, config, corpus, PretrainConfig(epochs=0))
    assert curve == []
    assert trained.digest() == params.digest()
    assert trained is not params


def test_pretraining_input_checks(mlm_setup, dan_config, dan_params, tiny_vocab):
    """Test the DAN rejection and empty corpora."""
    config, params, corpus = mlm_setup
    dan_corpus = encode_many(["the sun"], tiny_vocab, 10)
    with pytest.raises(ConfigError):
        pretrain_mlm(dan_params, dan_config, dan_corpus, PretrainConfig())
    with pytest.raises(EmptyCorpus):
        pretrain_mlm(params, config, [], PretrainConfig())
    with pytest.raises(EmptyCorpus):
        pretrain_mlm(params, config, [tokenize("", tiny_vocab, 10)], PretrainConfig())


def test_evaluate_mlm(mlm_setup):
    """Test loss and accuracy of held-out masking."""
    config, params, corpus = mlm_setup
    loss, accuracy = evaluate_mlm(params, config, corpus, MaskingSpec(mask_prob=0.3, seed=4))
    assert loss == pytest.approx(math.log(config.vocab_size), rel=0.05)
    assert 0.0 <= accuracy <= 1.0


def test_read_unlabeled_corpus(tmp_path):
    """Test JSON records, plain lines and cleaning."""
    path = tmp_path / "unlabeled.jsonl"
    path.write_text('{"text": "Sooo Sleepy @bob"}\nplain words here\n\n{"text": "@only"}\n')
    assert read_unlabeled_corpus(str(path)) == ["soo sleepy", "plain words here"]
    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    with pytest.raises(EmptyCorpus):
        read_unlabeled_corpus(str(empty))


def test_loss_curve_json():
    """Test the loss curve artifact."""
    payload = json.loads(loss_curve_json([2.5, 2.0], initial=3.0))
    assert payload == {"epochs": 2, "initial_loss": 3.0, "loss": [2.5, 2.0]}



def test_loss_curve_json_writes_null_for_nan():
    """Test that non-finite epoch losses stay valid JSON."""
    text = loss_curve_json([float("nan"), 2.0], initial=float("inf"))
    assert "NaN" not in text and "Infinity" not in text
    assert json.loads(text) == {"epochs": 2, "initial_loss": None, "loss": [None, 2.0]}
