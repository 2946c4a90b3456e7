import numpy as np
import pytest

from config.base_config import EncoderConfig, HeadConfig
from config.enums import EmotionClass, EncoderKind, HeadKind
from config.loader import ConfigLoader
from lib.encoder import init_encoder_params
from lib.head import ClassificationHead
from lib.tokenizer import build_vocab
from stages.corpus import Dataset, HashtagLexicon, LabeledMessage, RawMessage
from stages.synthetic import SyntheticCorpusSpec, build_word_bank, generate_labeled

TINY_TEXTS = [
    "the sun is bright today",
    "so tired and sleepy now",
    "this traffic makes me furious",
    "lonely quiet evening again",
    "what a bright happy morning",
]


@pytest.fixture
def tiny_vocab():
    """Vocabulary over a handful of short sentences."""
    return build_vocab(TINY_TEXTS)


@pytest.fixture
def transformer_config(tiny_vocab):
    """Two-layer transformer small enough for finite differences."""
    return EncoderConfig(
        kind=EncoderKind.TRANSFORMER,
        num_layers=2,
        num_heads=2,
        hidden_dim=8,
        ffn_dim=16,
        max_len=10,
        vocab_size=tiny_vocab.size,
    )


@pytest.fixture
def dan_config(tiny_vocab):
    """Deep averaging network of the same width."""
    return EncoderConfig(
        kind=EncoderKind.DAN,
        num_layers=0,
        num_heads=1,
        hidden_dim=8,
        ffn_dim=16,
        max_len=10,
        vocab_size=tiny_vocab.size,
    )


@pytest.fixture
def transformer_params(transformer_config):
    return init_encoder_params(transformer_config, seed=7)


@pytest.fixture
def dan_params(dan_config):
    return init_encoder_params(dan_config, seed=7)


@pytest.fixture
def linear_head():
    return ClassificationHead.init(HeadConfig(kind=HeadKind.LINEAR), input_dim=8, seed=11)


@pytest.fixture
def relu_head():
    return ClassificationHead.init(
        HeadConfig(kind=HeadKind.RELU_HIDDEN, intermediate_dim=6), input_dim=8, seed=11
    )


@pytest.fixture
def lexicon():
    """Two hashtags per class."""
    return HashtagLexicon(
        tags={
            EmotionClass.HAPPY_ACTIVE: {"excited", "thrilled"},
            EmotionClass.HAPPY_INACTIVE: {"calm", "relaxed"},
            EmotionClass.UNHAPPY_ACTIVE: {"angry", "furious"},
            EmotionClass.UNHAPPY_INACTIVE: {"sad", "lonely"},
        }
    )


@pytest.fixture
def raw_messages():
    """Twelve raw messages covering every drop reason."""
    texts = [
        "Going to the concert tonight #excited",
        "Sunday on the porch #calm",
        "Stuck in traffic again #angry @cityhall",
        "Nobody called today #sad https://t.co/abc",
        "RT @friend: what a game #thrilled",
        "Just a normal day",
        "Mixed feelings #excited #sad",
        "Going to the concert tonight #EXCITED",
        "#calm",
        "Finally finished my thesis!!!!!! #thrilled",
        "Rain all week #lonely",
        "Waiting on hold forever #furious",
    ]
    return [RawMessage(id=f"m{i:02d}", text=text) for i, text in enumerate(texts)]


@pytest.fixture
def synthetic_spec():
    """Small keyword-template language."""
    return SyntheticCorpusSpec(
        vocab_target=80, keywords_per_class=4, context_per_class=3, min_words=4, max_words=8, seed=5
    )


@pytest.fixture
def word_bank(synthetic_spec):
    return build_word_bank(synthetic_spec)


@pytest.fixture
def labeled_dataset(synthetic_spec):
    """Two hundred labeled synthetic sentences."""
    return generate_labeled(200, synthetic_spec)


@pytest.fixture
def small_dataset():
    """Eight hand-written messages, two per class."""
    rows = [
        ("a1", "bright sunny party", EmotionClass.HAPPY_ACTIVE),
        ("a2", "party dance party", EmotionClass.HAPPY_ACTIVE),
        ("b1", "quiet calm tea", EmotionClass.HAPPY_INACTIVE),
        ("b2", "calm sofa tea", EmotionClass.HAPPY_INACTIVE),
        ("c1", "traffic noise rage", EmotionClass.UNHAPPY_ACTIVE),
        ("c2", "rage at traffic", EmotionClass.UNHAPPY_ACTIVE),
        ("d1", "empty rainy room", EmotionClass.UNHAPPY_INACTIVE),
        ("d2", "rainy lonely room", EmotionClass.UNHAPPY_INACTIVE),
    ]
    return Dataset(tuple(LabeledMessage(id=i, text=t, label=label) for i, t, label in rows))


@pytest.fixture
def smoke_context(tmp_path):
    """Run context of the smoke profile writing into a temporary directory."""
    loader = ConfigLoader(profile="smoke")
    return loader.create_run_context({"paths": {"output_dir": str(tmp_path / "run")}})


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(params=range(20), ids=lambda seed: f"seed{seed}")
def seeded_rng(request):
    """One generator per seed for the finite-difference checks."""
    return np.random.default_rng(request.param)
