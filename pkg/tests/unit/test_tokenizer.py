import numpy as np
import pytest

from lib.errors import UnknownId
from lib.tokenizer import (
    CLS_ID,
    MASK_ID,
    PAD_ID,
    RESERVED_TOKENS,
    SEP_ID,
    UNK_ID,
    TokenBatch,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    encode_many,
)


def test_reserved_ids_are_fixed(tiny_vocab):
    """Test the reserved token layout."""
    assert (PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID) == (0, 1, 2, 3, 4)
    assert tiny_vocab.tokens[:5] == RESERVED_TOKENS


def test_build_vocab_ranks_by_frequency_then_lexicographically():
    """Test frequency ranking with lexicographic ties."""
    vocab = build_vocab(["b a c", "a b", "a"])
    assert vocab.tokens[5:] == ("a", "b", "c")
    capped = build_vocab(["b a c", "a b", "a"], max_size=7)
    assert capped.tokens[5:] == ("a", "b")
    frequent = build_vocab(["b a c", "a b", "a"], min_count=2)
    assert "c" not in frequent


def test_vocab_rejects_bad_tokens():
    """Test reserved prefix and uniqueness."""
    with pytest.raises(ValueError):
        Vocabulary(tokens=("a", "b"))
    with pytest.raises(ValueError):
        Vocabulary(tokens=RESERVED_TOKENS + ("x", "x"))


def test_vocab_json_round_trip(tmp_path, tiny_vocab):
    """Test saving and loading a vocabulary."""
    path = str(tmp_path / "vocab.json")
    tiny_vocab.save(path)
    assert Vocabulary.load(path) == tiny_vocab


def test_encode_layout(tiny_vocab):
    """Test [CLS] + tokens + [SEP] with padding."""
    seq = encode("the sun is unseen", tiny_vocab, max_len=8)
    seq.validate()
    assert seq.ids[0] == CLS_ID
    assert seq.ids[4] == UNK_ID
    assert seq.ids[5] == SEP_ID
    assert list(seq.ids[6:]) == [PAD_ID, PAD_ID]
    assert list(seq.mask) == [1, 1, 1, 1, 1, 1, 0, 0]
    assert seq.length == 6
    assert list(seq.content_positions()) == [1, 2, 3, 4]


def test_encode_truncates_to_max_len(tiny_vocab):
    """Test that long texts keep their first max_len - 2 tokens."""
    seq = encode("the sun is bright today", tiny_vocab, max_len=4)
    seq.validate()
    assert decode(seq.ids, tiny_vocab) == ["the", "sun"]
    assert seq.ids[-1] == SEP_ID


def test_encode_empty_text(tiny_vocab):
    """Test that empty text still yields CLS and SEP."""
    seq = encode("", tiny_vocab, max_len=5)
    seq.validate()
    assert seq.length == 2
    assert len(seq.content_positions()) == 0


def test_encode_rejects_short_max_len(tiny_vocab):
    """Test that max_len must leave room for a token."""
    with pytest.raises(ValueError):
        encode("the", tiny_vocab, max_len=2)


def test_decode_drops_special_tokens(tiny_vocab):
    """Test that decoding inverts encoding for known words."""
    text = "so tired and sleepy now"
    assert decode(encode(text, tiny_vocab, 10).ids, tiny_vocab) == text.split()
    with pytest.raises(UnknownId):
        decode([tiny_vocab.size], tiny_vocab)


def test_token_batch(tiny_vocab):
    """Test stacking sequences into a batch."""
    sequences = encode_many(["the sun", "so tired and sleepy"], tiny_vocab, 8)
    batch = TokenBatch.from_sequences(sequences)
    assert batch.ids.shape == (2, 8)
    np.testing.assert_array_equal(batch.lengths, [4, 6])
    assert len(batch) == 2
    assert batch.max_len == 8
    with pytest.raises(ValueError):
        TokenBatch.from_sequences([])


def test_build_vocab_caps_a_hundred_word_corpus():
    """Test max_size=20 on 100 distinct words: five reserved tokens and the top fifteen."""
    words = [f"w{i:02d}" for i in range(100)]
    vocab = build_vocab([" ".join(reversed(words)), "w99 w98 w97"], max_size=20)
    assert vocab.size == 20
    assert vocab.tokens[:5] == RESERVED_TOKENS
    assert vocab.tokens[5:] == ("w97", "w98", "w99") + tuple(words[:12])


def test_encoded_sequences_hold_their_layout_on_fuzzed_texts(tiny_vocab):
    """Test the sequence layout and the decode round trip over random texts and lengths."""
    rng = np.random.default_rng(0)
    pool = list(tiny_vocab.tokens[5:]) + ["unseen", "words"]
    for _ in range(500):
        words = list(rng.choice(pool, size=int(rng.integers(0, 15))))
        max_len = int(rng.integers(3, 13))
        seq = encode(" ".join(words), tiny_vocab, max_len)
        seq.validate()

        kept = words[: max_len - 2]
        n = len(kept) + 2
        assert seq.max_len == max_len
        assert seq.ids[0] == CLS_ID
        assert seq.ids[n - 1] == SEP_ID
        assert list(seq.mask) == [1] * n + [0] * (max_len - n)
        assert (seq.ids[n:] == PAD_ID).all()
        expected = [w if w in tiny_vocab else RESERVED_TOKENS[UNK_ID] for w in kept]
        assert decode(seq.ids, tiny_vocab) == expected
