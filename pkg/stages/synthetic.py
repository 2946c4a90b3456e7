"""
Keyword-template corpora for desk-scale experiments.

Words are pronounceable pseudo-words (consonant-vowel syllables), so they are
already clean: lowercase ASCII, no URLs, no runs of three identical characters.
The word bank splits into class keywords, class context words and neutral filler:

- labeled sentences carry at least one keyword of their class among filler;
- unlabeled sentences pair every keyword with its context word (bigram
  structure) and add other context words of the same topic;
- transfer sentences carry class signal through context words only, so an
  encoder that learned the keyword/context association has an advantage.
"""

import itertools
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from config.base_config import SyntheticConfig
from config.enums import BenchmarkClass, EmotionClass
from lib.errors import InvalidSpec

from .corpus import Dataset, HashtagLexicon, LabeledMessage, RawMessage
from .evaluation import DEFAULT_TAXONOMY, BenchmarkItem

logger = logging.getLogger(__name__)

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"

EXAMPLE_LEXICON_PATH = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "config",
    "lexicons",
    "example_lexicon.json",
)


class SyntheticCorpusSpec(BaseModel):
    """
    Shape of the generated language.

    Attributes:
        vocab_target: Total number of distinct pseudo-words
        keywords_per_class: Class-unique keywords per emotion class
        context_per_class: Class-unique context words per emotion class
        min_words: Shortest sentence
        max_words: Longest sentence
        seed: Seed of the word bank and of every generator
    """

    vocab_target: int = Field(default=500, ge=40)
    keywords_per_class: int = Field(default=12, ge=1)
    context_per_class: int = Field(default=8, ge=1)
    min_words: int = Field(default=4, ge=2)
    max_words: int = Field(default=10, ge=2)
    seed: int = 0

    @model_validator(mode="after")
    def validate_sizes(self) -> "SyntheticCorpusSpec":
        """Validates that class words leave room for filler."""
        if self.max_words < self.min_words:
            raise ValueError(
                f"max_words ({self.max_words}) must be >= min_words ({self.min_words})"
            )
        class_words = 4 * (self.keywords_per_class + self.context_per_class)
        if class_words >= self.vocab_target:
            raise ValueError(
                f"vocab_target ({self.vocab_target}) must exceed the {class_words} class words"
            )
        return self

    @classmethod
    def from_config(cls, config: SyntheticConfig, seed: int) -> "SyntheticCorpusSpec":
        return cls(
            vocab_target=config.vocab_target,
            keywords_per_class=config.keywords_per_class,
            seed=seed,
        )

    @property
    def filler_size(self) -> int:
        return self.vocab_target - 4 * (self.keywords_per_class + self.context_per_class)


@dataclass(frozen=True)
class WordBank:
    keywords: Dict[EmotionClass, Tuple[str, ...]]
    context: Dict[EmotionClass, Tuple[str, ...]]
    filler: Tuple[str, ...]

    def all_words(self) -> List[str]:
        words = list(self.filler)
        for emotion in EmotionClass.ordered():
            words.extend(self.keywords[emotion])
            words.extend(self.context[emotion])
        return words

    def partner(self, emotion: EmotionClass, keyword: str) -> str:
        """Context word that follows `keyword` in the unlabeled corpus."""
        position = self.keywords[emotion].index(keyword)
        context = self.context[emotion]
        return context[position % len(context)]


def pseudo_words() -> List[str]:
    """Every two-syllable CV-CV word, in lexicographic order."""
    syllables = [c + v for c, v in itertools.product(CONSONANTS, VOWELS)]
    return [a + b for a, b in itertools.product(syllables, syllables)]


def build_word_bank(spec: SyntheticCorpusSpec) -> WordBank:
    candidates = pseudo_words()
    if spec.vocab_target > len(candidates):
        raise InvalidSpec(f"vocab_target {spec.vocab_target} exceeds {len(candidates)} words")
    rng = np.random.default_rng(spec.seed)
    chosen = [candidates[i] for i in rng.permutation(len(candidates))[: spec.vocab_target]]

    keywords: Dict[EmotionClass, Tuple[str, ...]] = {}
    context: Dict[EmotionClass, Tuple[str, ...]] = {}
    cursor = 0
    for emotion in EmotionClass.ordered():
        keywords[emotion] = tuple(chosen[cursor : cursor + spec.keywords_per_class])
        cursor += spec.keywords_per_class
        context[emotion] = tuple(chosen[cursor : cursor + spec.context_per_class])
        cursor += spec.context_per_class
    return WordBank(keywords=keywords, context=context, filler=tuple(chosen[cursor:]))


def _pick(rng: np.random.Generator, words: Tuple[str, ...]) -> str:
    return words[int(rng.integers(len(words)))]


def _keyword_sentence(
    rng: np.random.Generator, bank: WordBank, spec: SyntheticCorpusSpec, emotion: EmotionClass
) -> str:
    length = int(rng.integers(spec.min_words, spec.max_words + 1))
    keyword_count = 1 + int(rng.random() < 0.3)
    words = [_pick(rng, bank.filler) for _ in range(length - keyword_count)]
    for _ in range(keyword_count):
        words.insert(int(rng.integers(len(words) + 1)), _pick(rng, bank.keywords[emotion]))
    return " ".join(words)


def _random_emotion(rng: np.random.Generator) -> EmotionClass:
    return EmotionClass.from_index(int(rng.integers(len(EmotionClass.ordered()))))


def generate_labeled(n: int, spec: SyntheticCorpusSpec, seed: Optional[int] = None) -> Dataset:
    """`n` labeled keyword-template sentences; classes drawn uniformly."""
    bank = build_word_bank(spec)
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    messages = []
    for i in range(n):
        emotion = _random_emotion(rng)
        text = _keyword_sentence(rng, bank, spec, emotion)
        messages.append(LabeledMessage(id=f"syn-{i:06d}", text=text, label=emotion))
    return Dataset(tuple(messages))


def generate_unlabeled(n: int, spec: SyntheticCorpusSpec, seed: Optional[int] = None) -> List[str]:
    """Topic sentences where each keyword is immediately followed by its context word."""
    bank = build_word_bank(spec)
    rng = np.random.default_rng(spec.seed + 1 if seed is None else seed)
    texts = []
    for _ in range(n):
        emotion = _random_emotion(rng)
        words: List[str] = []
        length = int(rng.integers(spec.min_words, spec.max_words + 1))
        while len(words) < length:
            draw = rng.random()
            if draw < 0.35:
                keyword = _pick(rng, bank.keywords[emotion])
                words.extend([keyword, bank.partner(emotion, keyword)])
            elif draw < 0.6:
                words.append(_pick(rng, bank.context[emotion]))
            else:
                words.append(_pick(rng, bank.filler))
        texts.append(" ".join(words[: spec.max_words]))
    return texts


def generate_transfer_split(
    n: int, spec: SyntheticCorpusSpec, seed: Optional[int] = None
) -> Dataset:
    """Labeled sentences whose only class evidence is one context word of the class."""
    bank = build_word_bank(spec)
    rng = np.random.default_rng(spec.seed + 2 if seed is None else seed)
    messages = []
    for i in range(n):
        emotion = _random_emotion(rng)
        length = int(rng.integers(spec.min_words, spec.max_words + 1))
        words = [_pick(rng, bank.filler) for _ in range(length - 1)]
        words.insert(int(rng.integers(len(words) + 1)), _pick(rng, bank.context[emotion]))
        messages.append(LabeledMessage(id=f"xfer-{i:06d}", text=" ".join(words), label=emotion))
    return Dataset(tuple(messages))


def generate_benchmark(
    n: int, spec: SyntheticCorpusSpec, seed: Optional[int] = None
) -> List[BenchmarkItem]:
    """
    Benchmark items in the joy / anger / sadness taxonomy.

    A joy item uses keywords of either happy class, so a correct model may
    answer happy_active or happy_inactive.
    """
    bank = build_word_bank(spec)
    rng = np.random.default_rng(spec.seed + 3 if seed is None else seed)
    classes = list(BenchmarkClass)
    items = []
    for _ in range(n):
        gold = classes[int(rng.integers(len(classes)))]
        accepted = sorted(DEFAULT_TAXONOMY.accepted(gold), key=lambda e: e.index)
        emotion = accepted[int(rng.integers(len(accepted)))]
        items.append(BenchmarkItem(text=_keyword_sentence(rng, bank, spec, emotion), label=gold))
    return items


def generate_raw_messages(
    n: int, spec: SyntheticCorpusSpec, lexicon: HashtagLexicon, seed: Optional[int] = None
) -> List[RawMessage]:
    """
    Noisy hashtag-labeled messages for the cleaning and labeling stage.

    Besides a label hashtag, messages may carry retweet markers, URLs,
    mentions, uppercase letters and elongated punctuation; some have no label
    hashtag, some carry tags of two classes and some repeat an earlier text.
    """
    bank = build_word_bank(spec)
    rng = np.random.default_rng(spec.seed + 4 if seed is None else seed)
    tags = {e: sorted(lexicon.tags.get(e, set())) for e in EmotionClass.ordered()}
    labeled = [e for e in EmotionClass.ordered() if tags[e]]
    if not labeled:
        raise InvalidSpec("Lexicon holds no hashtag")

    messages: List[RawMessage] = []
    for i in range(n):
        if messages and rng.random() < 0.05:
            earlier = messages[int(rng.integers(len(messages)))]
            messages.append(RawMessage(id=f"raw-{i:06d}", text=earlier.text))
            continue

        emotion = labeled[int(rng.integers(len(labeled)))]
        words = _keyword_sentence(rng, bank, spec, emotion).split()
        draw = rng.random()
        if draw < 0.05:
            # no label hashtag
            pass
        elif draw < 0.1 and len(labeled) > 1:
            other = labeled[(labeled.index(emotion) + 1) % len(labeled)]
            words.append(f"#{_pick(rng, tuple(tags[emotion]))}")
            words.append(f"#{_pick(rng, tuple(tags[other]))}")
        else:
            tag = _pick(rng, tuple(tags[emotion]))
            words.append(f"#{tag.upper() if rng.random() < 0.2 else tag}")

        if rng.random() < 0.15:
            words.insert(int(rng.integers(len(words) + 1)), f"@user{int(rng.integers(1000))}")
        if rng.random() < 0.15:
            words.append(f"https://t.co/{int(rng.integers(10**6)):06d}")
        if rng.random() < 0.1:
            words[0] = words[0].capitalize()
        if rng.random() < 0.1:
            words.append("!!!!")
        if rng.random() < 0.08:
            words = ["RT", f"@user{int(rng.integers(1000))}:"] + words
        messages.append(RawMessage(id=f"raw-{i:06d}", text=" ".join(words)))
    return messages


def example_lexicon() -> HashtagLexicon:
    return HashtagLexicon.from_json_file(EXAMPLE_LEXICON_PATH)


def write_texts(path: str, texts: List[str]) -> None:
    """JSON-lines {"text": ...} records."""
    with open(path, "w", encoding="utf-8") as f:
        for text in texts:
            f.write(json.dumps({"text": text}))
            f.write("\n")


@dataclass
class SyntheticBundle:
    raw: List[RawMessage]
    unlabeled: List[str]
    benchmark: List[BenchmarkItem]
    lexicon: HashtagLexicon


def generate_all(config: SyntheticConfig, seed: int) -> SyntheticBundle:
    """Raw, unlabeled and benchmark corpora sharing one word bank."""
    spec = SyntheticCorpusSpec.from_config(config, seed)
    lexicon = example_lexicon()
    bundle = SyntheticBundle(
        raw=generate_raw_messages(config.raw_messages, spec, lexicon),
        unlabeled=generate_unlabeled(config.unlabeled, spec),
        benchmark=generate_benchmark(config.benchmark, spec),
        lexicon=lexicon,
    )
    logger.info(
        f"Generated {len(bundle.raw)} raw messages, {len(bundle.unlabeled)} unlabeled texts, "
        f"{len(bundle.benchmark)} benchmark items (vocab_target={spec.vocab_target})"
    )
    return bundle
