"""
Distantly labeled emotion corpus.

Raw messages are filtered (retweets, unlabeled, ambiguous), labeled from
hashtag lexicons, cleaned, stripped of their label hashtags and deduplicated on
the cleaned text. Splits are deterministic under a seed.
"""

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from config.base_config import SplitConfig, check_fractions, exact_fraction
from config.enums import EmotionClass
from lib.errors import EmptyDataset, InvalidSpec, SizeTooLarge
from utils.naming import to_display

logger = logging.getLogger(__name__)

# Class counts of the original 540,525-tweet collection, kept for reports.
REFERENCE_CLASS_COUNTS: Dict[EmotionClass, int] = {
    EmotionClass.HAPPY_ACTIVE: 148_571,
    EmotionClass.HAPPY_INACTIVE: 195_313,
    EmotionClass.UNHAPPY_ACTIVE: 149_287,
    EmotionClass.UNHAPPY_INACTIVE: 47_354,
}

URL_PATTERN = re.compile(r"(?:https?|www\.)\S*")
MENTION_PATTERN = re.compile(r"@\w+")
RUN_PATTERN = re.compile(r"(.)\1{2,}", re.DOTALL)
WHITESPACE_PATTERN = re.compile(r"\s+")
HASHTAG_PATTERN = re.compile(r"#(\w+)")

DROP_REASONS = ("retweets", "unlabeled", "ambiguous", "empty_after_cleaning", "duplicates")


class RawMessage(BaseModel):
    id: str = Field(min_length=1)
    text: str = Field(min_length=1)


class LabeledMessage(BaseModel):
    id: str = Field(min_length=1)
    text: str = Field(description="Cleaned text")
    label: EmotionClass


class HashtagLexicon(BaseModel):
    """
    Hashtags (lowercase, without '#') per emotion class.

    The four sets must be pairwise disjoint.
    """

    tags: Dict[EmotionClass, Set[str]]

    @model_validator(mode="after")
    def validate_tags(self) -> "HashtagLexicon":
        """Validates spelling of every tag and disjointness of the classes."""
        seen: Dict[str, EmotionClass] = {}
        for emotion in EmotionClass.ordered():
            for tag in self.tags.get(emotion, set()):
                if not tag or tag != tag.lower() or any(c.isspace() for c in tag) or "#" in tag:
                    raise ValueError(
                        f"Hashtag '{tag}' must be lowercase, non-empty, without '#' or spaces"
                    )
                cleaned = clean_text(tag)
                if cleaned != tag or not HASHTAG_PATTERN.fullmatch(f"#{tag}"):
                    raise ValueError(
                        f"Hashtag '{tag}' is not stable under cleaning (cleans to '{cleaned}')"
                    )
                if tag in seen:
                    raise ValueError(
                        f"Hashtag '{tag}' belongs to both {seen[tag].value} and {emotion.value}"
                    )
                seen[tag] = emotion
        return self

    def classes_of(self, hashtags: Iterable[str]) -> Set[EmotionClass]:
        index = self.tag_index()
        return {index[tag] for tag in hashtags if tag in index}

    def tag_index(self) -> Dict[str, EmotionClass]:
        return {tag: emotion for emotion, tags in self.tags.items() for tag in tags}

    def all_tags(self) -> Set[str]:
        return set(self.tag_index())

    @classmethod
    def from_json_file(cls, path: str) -> "HashtagLexicon":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return cls(tags={EmotionClass(name): set(tags) for name, tags in payload.items()})

    def to_json(self) -> str:
        return json.dumps(
            {e.value: sorted(self.tags.get(e, set())) for e in EmotionClass.ordered()}, indent=2
        )


class LabelConflict(str, Enum):
    """Signal returned when hashtags of two or more classes occur in one message."""

    AMBIGUOUS = "ambiguous"


AMBIGUOUS = LabelConflict.AMBIGUOUS

LabelOutcome = Union[EmotionClass, None, LabelConflict]


@dataclass(frozen=True)
class Dataset:
    """Labeled messages in a fixed order."""

    messages: Tuple[LabeledMessage, ...]

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self) -> Iterator[LabeledMessage]:
        return iter(self.messages)

    def texts(self) -> List[str]:
        return [m.text for m in self.messages]

    def labels(self) -> List[EmotionClass]:
        return [m.label for m in self.messages]

    def label_indices(self) -> np.ndarray:
        return np.array([m.label.index for m in self.messages], dtype=np.int64)

    def ids(self) -> List[str]:
        return [m.id for m in self.messages]

    def class_counts(self) -> Dict[EmotionClass, int]:
        counts = Counter(m.label for m in self.messages)
        return {emotion: counts.get(emotion, 0) for emotion in EmotionClass.ordered()}

    def subsample(self, size: int, seed: int) -> "Dataset":
        """Seeded sample of `size` messages without replacement, in original order."""
        if size > len(self.messages):
            raise SizeTooLarge(f"Requested {size} items from a dataset of {len(self.messages)}")
        if size == len(self.messages):
            return self
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(self.messages), size, replace=False))
        return Dataset(tuple(self.messages[i] for i in chosen))


@dataclass
class BuildResult:
    dataset: Dataset
    class_counts: Dict[EmotionClass, int]
    dropped: Dict[str, int] = field(default_factory=dict)


def clean_text(text: str) -> str:
    """
    Normalize a message.

    Non-ASCII characters are dropped, text is lowercased, URLs and @mentions are
    removed and runs of three or more identical characters are collapsed to two.
    Removal and collapsing repeat until stable, since either can expose a new
    match ("htttp://x" collapses to a URL). Whitespace is normalized last.
    """
    text = text.encode("ascii", "ignore").decode("ascii").lower()
    while True:
        updated = URL_PATTERN.sub(" ", text)
        updated = MENTION_PATTERN.sub(" ", updated)
        updated = RUN_PATTERN.sub(r"\1\1", updated)
        if updated == text:
            break
        text = updated
    return WHITESPACE_PATTERN.sub(" ", text).strip()


def is_retweet(text: str) -> bool:
    """True iff a whitespace-separated token equals "rt" in any case."""
    return any(token.lower() == "rt" for token in text.split())


def extract_hashtags(text: str) -> List[str]:
    return [tag.lower() for tag in HASHTAG_PATTERN.findall(text)]


def extract_label(text: str, lexicon: HashtagLexicon) -> LabelOutcome:
    """The unique class named by the message's hashtags, None, or AMBIGUOUS."""
    classes = lexicon.classes_of(extract_hashtags(text))
    if not classes:
        return None
    if len(classes) > 1:
        return AMBIGUOUS
    return next(iter(classes))


def strip_label_hashtags(text: str, tags: Set[str]) -> str:
    """Remove hashtags in `tags` from cleaned text, re-cleaning until stable."""
    while True:
        stripped = HASHTAG_PATTERN.sub(
            lambda m: " " if m.group(1).lower() in tags else m.group(0), text
        )
        stripped = clean_text(stripped)
        if stripped == text:
            return text
        text = stripped


def build_dataset(messages: Iterable[RawMessage], lexicon: HashtagLexicon) -> BuildResult:
    """
    Filter, label, clean and deduplicate raw messages.

    Dropped messages are counted per reason: retweets, unlabeled, ambiguous,
    empty_after_cleaning, duplicates. The first occurrence of a cleaned text wins.
    """
    tags = lexicon.all_tags()
    dropped = Counter({reason: 0 for reason in DROP_REASONS})
    seen: Set[str] = set()
    kept: List[LabeledMessage] = []
    total = 0

    for message in messages:
        total += 1
        if is_retweet(message.text):
            dropped["retweets"] += 1
            continue
        label = extract_label(message.text, lexicon)
        if label is None:
            dropped["unlabeled"] += 1
            continue
        if label is AMBIGUOUS:
            dropped["ambiguous"] += 1
            continue
        text = strip_label_hashtags(clean_text(message.text), tags)
        if not text:
            dropped["empty_after_cleaning"] += 1
            continue
        if text in seen:
            dropped["duplicates"] += 1
            continue
        seen.add(text)
        kept.append(LabeledMessage(id=message.id, text=text, label=label))

    logger.info(f"Built dataset: {len(kept)} of {total} messages kept, dropped {dict(dropped)}")
    if not kept:
        raise EmptyDataset(f"No message survived cleaning and labeling ({total} read)")

    dataset = Dataset(tuple(kept))
    return BuildResult(dataset=dataset, class_counts=dataset.class_counts(), dropped=dict(dropped))


def split_sizes(total: int, spec: SplitConfig) -> Tuple[int, int, int]:
    """floor(fraction * N) for train and validation; test takes the remainder."""
    check_fractions(spec.train_fraction, spec.val_fraction, spec.test_fraction)
    train = int(exact_fraction(spec.train_fraction) * total)
    val = int(exact_fraction(spec.val_fraction) * total)
    return train, val, total - train - val


def split_dataset(
    dataset: Dataset, spec: SplitConfig, seed: Optional[int] = None
) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Deterministic shuffled train/validation/test partition.

    `seed` overrides `spec.seed`; one of them must be set.
    """
    if not len(dataset):
        raise EmptyDataset("Cannot split an empty dataset")
    seed = spec.seed if seed is None else seed
    if seed is None:
        raise InvalidSpec("Split needs a seed")

    train_size, val_size, _ = split_sizes(len(dataset), spec)
    order = np.random.default_rng(seed).permutation(len(dataset))
    shuffled = [dataset.messages[i] for i in order]
    train = Dataset(tuple(shuffled[:train_size]))
    val = Dataset(tuple(shuffled[train_size : train_size + val_size]))
    test = Dataset(tuple(shuffled[train_size + val_size :]))
    logger.info(
        f"Split {len(dataset)} messages into {len(train)}/{len(val)}/{len(test)} (seed={seed})"
    )
    return train, val, test


def class_count_table(counts: Dict[EmotionClass, int]) -> Dict[str, int]:
    """Per-class counts with display headers plus a Total column."""
    row = {
        to_display(emotion.value): int(counts.get(emotion, 0)) for emotion in EmotionClass.ordered()
    }
    row["Total"] = int(sum(counts.values()))
    return row


def read_raw_messages(path: str) -> List[RawMessage]:
    with open(path, "r", encoding="utf-8") as f:
        return [RawMessage.model_validate_json(line) for line in f if line.strip()]


def write_raw_messages(path: str, messages: Sequence[RawMessage]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for message in messages:
            f.write(json.dumps({"id": message.id, "text": message.text}, ensure_ascii=False))
            f.write("\n")


def write_dataset(path: str, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for message in dataset:
            record = {"id": message.id, "text": message.text, "label": message.label.value}
            f.write(json.dumps(record))
            f.write("\n")


def read_dataset(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        messages = [LabeledMessage.model_validate_json(line) for line in f if line.strip()]
    return Dataset(tuple(messages))
