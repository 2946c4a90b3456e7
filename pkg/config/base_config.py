"""
Configuration Management Module

This module defines the configuration structure of a transfer-learning run.
It uses Pydantic for data validation.

Structure:
- Data configuration: TokenizerConfig, SplitConfig, SyntheticConfig
- Model configuration: EncoderConfig, HeadConfig
- Training configuration: MaskingSpec, PretrainConfig, FineTuneConfig
- Evaluation configuration: EvalConfig
- RunConfig: everything a CLI command needs, plus the root seed

Configurations are loaded from YAML (or JSON) profiles.
Example file structure:
```
config/
  └── profiles/
      ├── desk.yaml
      ├── smoke.yaml
      ├── bert_base.yaml
      └── use_dan.yaml
```
"""

from fractions import Fraction
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from lib.errors import InvalidSpec

from .enums import AdaptMode, EncoderKind, HeadKind


def exact_fraction(value: float) -> Fraction:
    """Rational value of a decimal fraction as written (0.555 -> 111/200)."""
    return Fraction(str(value))


def check_fractions(train: float, val: float, test: float) -> None:
    """Raise InvalidSpec unless the three fractions are non-negative and sum to exactly 1."""
    fractions = [exact_fraction(train), exact_fraction(val), exact_fraction(test)]
    if any(f < 0 for f in fractions):
        raise InvalidSpec(f"Split fractions must be non-negative, got {train}/{val}/{test}")
    total = sum(fractions)
    if total != 1:
        raise InvalidSpec(
            f"Split fractions must sum to 1 exactly, got {train}/{val}/{test} = {total}"
        )


class TokenizerConfig(BaseModel):
    """
    Vocabulary construction.

    Attributes:
        min_count: Minimum token frequency to enter the vocabulary
        max_size: Vocabulary cap, reserved tokens included
    """

    min_count: int = Field(default=1, ge=1)
    max_size: int = Field(default=5000, ge=6)


class SplitConfig(BaseModel):
    """
    Train/validation/test split.

    The defaults reproduce the 300,000 / 60,000 / 180,525 proportions of the
    original tweet collection.
    """

    train_fraction: float = 0.555
    val_fraction: float = 0.111
    test_fraction: float = 0.334
    seed: Optional[int] = Field(
        default=None, description="Shuffle seed; derived from the root seed when unset"
    )

    @model_validator(mode="after")
    def validate_fractions(self) -> "SplitConfig":
        """Validates that the fractions are a partition of the dataset."""
        check_fractions(self.train_fraction, self.val_fraction, self.test_fraction)
        return self


class EncoderConfig(BaseModel):
    """
    Text encoder shape.

    Attributes:
        kind: transformer (pooled at [CLS]) or dan (deep averaging network)
        num_layers: Transformer blocks (L)
        num_heads: Attention heads (A)
        hidden_dim: Hidden size (H)
        ffn_dim: Feed-forward inner size (F)
        max_len: Token positions, [CLS] and [SEP] included
        vocab_size: Rows of the token embedding table (V)
    """

    kind: EncoderKind = EncoderKind.TRANSFORMER
    num_layers: int = Field(default=2, ge=0)
    num_heads: int = Field(default=4, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    ffn_dim: int = Field(default=128, ge=1)
    max_len: int = Field(default=32, ge=3)
    vocab_size: int = Field(default=512, ge=6)

    @model_validator(mode="after")
    def validate_dimensions(self) -> "EncoderConfig":
        """Validates head divisibility and the feed-forward width."""
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(
                f"hidden_dim ({self.hidden_dim}) must be divisible by num_heads ({self.num_heads})"
            )
        if self.ffn_dim < self.hidden_dim:
            raise ValueError(
                f"ffn_dim ({self.ffn_dim}) must be greater than or equal to "
                f"hidden_dim ({self.hidden_dim})"
            )
        return self

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


class HeadConfig(BaseModel):
    """
    Classification head.

    Attributes:
        kind: linear (x = W.h + b) or relu_hidden (ReLU projection to
            intermediate_dim first)
        num_classes: K
        intermediate_dim: P, only used by relu_hidden
    """

    kind: HeadKind = HeadKind.LINEAR
    num_classes: int = Field(default=4, ge=2)
    intermediate_dim: int = Field(default=256, ge=1)


class MaskingSpec(BaseModel):
    mask_prob: float = Field(default=0.15, ge=0.0, le=1.0)
    seed: int = 0


class PretrainConfig(BaseModel):
    """Masked-LM source task."""

    epochs: int = Field(default=10, ge=0)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    masking: MaskingSpec = MaskingSpec()


class FineTuneConfig(BaseModel):
    """
    Target-task adaptation.

    Defaults follow the BERT fine-tuning parameters (2 epochs, lr 4e-5); the
    USE-style setup uses batch 150, 20 epochs and lr 0.001.
    """

    mode: AdaptMode = AdaptMode.UNFROZEN
    epochs: int = Field(default=2, ge=0)
    batch_size: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=4e-5, gt=0)
    seed: int = 0
    class_weighting: bool = Field(
        default=False, description="Inverse-frequency class weights in the loss"
    )


class EvalConfig(BaseModel):
    sweep_batch_sizes: List[int] = Field(default_factory=lambda: [50, 100, 150, 200, 250])
    ablation_sizes: List[int] = Field(default_factory=lambda: [200, 2000, 20000])
    ablation_tolerance: float = Field(default=0.02, ge=0.0)
    compare_seeds: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)
    plot: bool = True

    @model_validator(mode="after")
    def validate_sizes(self) -> "EvalConfig":
        """Validates that sweep and ablation sizes are positive."""
        for name, values in (
            ("sweep_batch_sizes", self.sweep_batch_sizes),
            ("ablation_sizes", self.ablation_sizes),
        ):
            if not values or any(v < 1 for v in values):
                raise ValueError(f"{name} must be a non-empty list of positive integers")
        return self


class SyntheticConfig(BaseModel):
    """Sizes of the generated keyword-template corpora."""

    raw_messages: int = Field(default=6000, ge=1)
    unlabeled: int = Field(default=2000, ge=1)
    benchmark: int = Field(default=300, ge=1)
    vocab_target: int = Field(default=500, ge=40)
    keywords_per_class: int = Field(default=12, ge=1)


class PathsConfig(BaseModel):
    """
    Input and output locations.

    Attributes:
        raw_corpus: JSON-lines raw messages (id, text)
        lexicon: JSON object class -> hashtags
        unlabeled_corpus: JSON-lines or text file used for pretraining
        benchmark: JSON-lines benchmark items (text, label)
        taxonomy_map: JSON object benchmark class -> emotion classes
        output_dir: Directory receiving every artifact of the run
    """

    raw_corpus: Optional[str] = None
    lexicon: Optional[str] = None
    unlabeled_corpus: Optional[str] = None
    benchmark: Optional[str] = None
    taxonomy_map: Optional[str] = None
    output_dir: str = "runs/default"


class RunConfig(BaseModel):
    """
    Complete run configuration.

    Example:
        ```yaml
        # config/profiles/desk.yaml
        variables:
          run_dir: "runs/desk"

        root_seed: 13
        paths:
          raw_corpus: "${run_dir}/raw.jsonl"
          output_dir: "${run_dir}"
        encoder:
          num_layers: 2
          num_heads: 4
          hidden_dim: 64
        finetune:
          mode: unfrozen
          epochs: 5
        ```
    """

    root_seed: int = 13
    paths: PathsConfig = PathsConfig()
    tokenizer: TokenizerConfig = TokenizerConfig()
    split: SplitConfig = SplitConfig()
    encoder: EncoderConfig = EncoderConfig()
    head: HeadConfig = HeadConfig()
    pretrain: PretrainConfig = PretrainConfig()
    finetune: FineTuneConfig = FineTuneConfig()
    eval: EvalConfig = EvalConfig()
    synthetic: SyntheticConfig = SyntheticConfig()
