"""
Word-level tokenizer producing `[CLS] + text + [SEP]` id sequences.

Tokens are whitespace-separated words of the cleaned text. Reserved ids are
fixed: PAD=0, UNK=1, CLS=2, SEP=3, MASK=4.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from lib.errors import UnknownId

logger = logging.getLogger(__name__)

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3
MASK_ID = 4

RESERVED_TOKENS: Tuple[str, ...] = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
SPECIAL_IDS = frozenset({PAD_ID, CLS_ID, SEP_ID})


def tokenize(text: str) -> List[str]:
    return text.split()


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token <-> id mapping; `tokens[i]` is the token with id i."""

    tokens: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if tuple(self.tokens[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ValueError(f"Vocabulary must start with the reserved tokens {RESERVED_TOKENS}")
        index = {token: i for i, token in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("Vocabulary tokens must be unique")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def token_id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise UnknownId(f"Token id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]

    def to_json(self) -> str:
        """JSON array of tokens in id order."""
        return json.dumps(list(self.tokens), ensure_ascii=True, indent=0)

    @classmethod
    def from_json(cls, payload: str) -> "Vocabulary":
        tokens = json.loads(payload)
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ValueError("Vocabulary JSON must be an array of strings")
        return cls(tokens=tuple(tokens))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


@dataclass(frozen=True)
class TokenSequence:
    """
    Fixed-length encoded text.

    ids[0] is CLS, exactly one SEP closes the real tokens, mask is a prefix of
    ones and PAD fills the rest.
    """

    ids: np.ndarray
    mask: np.ndarray

    @property
    def max_len(self) -> int:
        return int(self.ids.shape[0])

    @property
    def length(self) -> int:
        """Number of real positions, CLS and SEP included."""
        return int(self.mask.sum())

    def content_positions(self) -> np.ndarray:
        """Positions of text tokens (CLS, SEP and PAD excluded)."""
        return np.arange(1, self.length - 1)

    def validate(self) -> None:
        n = self.length
        if self.ids.shape != self.mask.shape or self.ids.ndim != 1:
            raise ValueError("ids and mask must be vectors of the same length")
        if n < 2 or self.ids[0] != CLS_ID:
            raise ValueError("sequence must start with CLS and hold at least CLS and SEP")
        if not np.array_equal(self.mask, (np.arange(self.max_len) < n).astype(self.mask.dtype)):
            raise ValueError("mask must be a prefix of ones followed by zeros")
        if int((self.ids[:n] == SEP_ID).sum()) != 1 or self.ids[n - 1] != SEP_ID:
            raise ValueError("exactly one SEP must close the real tokens")
        if np.any(self.ids[n:] != PAD_ID):
            raise ValueError("positions outside the mask must hold PAD")


def build_vocab(corpus: Iterable[str], min_count: int = 1, max_size: int = 5000) -> Vocabulary:
    """
    Frequency-ranked word vocabulary.

    Ties in frequency are broken lexicographically. Reserved tokens come first
    and count towards `max_size`.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if max_size < len(RESERVED_TOKENS) + 1:
        raise ValueError(f"max_size must be >= {len(RESERVED_TOKENS) + 1}, got {max_size}")

    counts: Counter = Counter()
    for text in corpus:
        counts.update(tokenize(text))
    for reserved in RESERVED_TOKENS:
        counts.pop(reserved, None)

    ranked = sorted(
        (token for token, count in counts.items() if count >= min_count),
        key=lambda token: (-counts[token], token),
    )
    kept = ranked[: max_size - len(RESERVED_TOKENS)]
    logger.info(
        f"Vocabulary built: {len(kept)} words kept of {len(counts)} distinct "
        f"(min_count={min_count}, max_size={max_size})"
    )
    return Vocabulary(tokens=RESERVED_TOKENS + tuple(kept))


def encode(text: str, vocab: Vocabulary, max_len: int) -> TokenSequence:
    """Encode as [CLS] + tokens + [SEP], truncating text tokens and padding to max_len."""
    if max_len < 3:
        raise ValueError(f"max_len must be >= 3, got {max_len}")
    words = tokenize(text)[: max_len - 2]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[0] = CLS_ID
    ids[1 : 1 + len(words)] = [vocab.token_id(w) for w in words]
    ids[1 + len(words)] = SEP_ID
    mask = np.zeros(max_len, dtype=np.int64)
    mask[: len(words) + 2] = 1
    return TokenSequence(ids=ids, mask=mask)


def encode_many(texts: Sequence[str], vocab: Vocabulary, max_len: int) -> List[TokenSequence]:
    return [encode(text, vocab, max_len) for text in texts]


def decode(ids: Iterable[int], vocab: Vocabulary) -> List[str]:
    """Tokens of `ids` with PAD, CLS and SEP removed."""
    tokens = []
    for token_id in ids:
        token = vocab.token(int(token_id))
        if int(token_id) not in SPECIAL_IDS:
            tokens.append(token)
    return tokens


@dataclass(frozen=True)
class TokenBatch:
    """Stacked TokenSequences: ids and mask of shape (B, max_len)."""

    ids: np.ndarray
    mask: np.ndarray

    @classmethod
    def from_sequences(cls, sequences: Sequence[TokenSequence]) -> "TokenBatch":
        if not sequences:
            raise ValueError("cannot batch an empty list of sequences")
        return cls(
            ids=np.stack([s.ids for s in sequences]), mask=np.stack([s.mask for s in sequences])
        )

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def max_len(self) -> int:
        return int(self.ids.shape[1])
