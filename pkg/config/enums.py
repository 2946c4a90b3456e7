from enum import Enum
from typing import List


class EmotionClass(str, Enum):
    """Circumplex quadrants used as target labels.

    Member order is the canonical class order: it fixes label indices,
    serialization order and the argmax tie-break.
    """

    HAPPY_ACTIVE = "happy_active"
    HAPPY_INACTIVE = "happy_inactive"
    UNHAPPY_ACTIVE = "unhappy_active"
    UNHAPPY_INACTIVE = "unhappy_inactive"

    @classmethod
    def ordered(cls) -> List["EmotionClass"]:
        return list(cls)

    @classmethod
    def from_index(cls, index: int) -> "EmotionClass":
        members = cls.ordered()
        if not 0 <= index < len(members):
            raise IndexError(f"Emotion class index {index} out of range [0, {len(members)})")
        return members[index]

    @property
    def index(self) -> int:
        return EmotionClass.ordered().index(self)


class BenchmarkClass(str, Enum):
    """Classes of the external emotion benchmarks (EmoInt, Stimulus)."""

    JOY = "joy"
    ANGER = "anger"
    SADNESS = "sadness"


class AdaptMode(str, Enum):
    FROZEN = "frozen"
    UNFROZEN = "unfrozen"


class EncoderKind(str, Enum):
    TRANSFORMER = "transformer"
    DAN = "dan"


class HeadKind(str, Enum):
    """Classification head variants.

    LINEAR is the single softmax layer over the pooled state; RELU_HIDDEN adds a
    ReLU projection before it.
    """

    LINEAR = "linear"
    RELU_HIDDEN = "relu_hidden"
