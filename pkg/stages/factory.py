# stages/factory.py

import logging
import os
from typing import List, Optional, Sequence, Tuple

from config.base_config import EncoderConfig, FineTuneConfig
from config.loader import RunContext
from lib.autodiff import load_tensors
from lib.encoder import EncoderParams, init_encoder_params
from lib.head import ClassificationHead
from lib.tokenizer import RESERVED_TOKENS, Vocabulary
from utils.seeds import derive_seed

logger = logging.getLogger(__name__)

PRETRAINED_DIR = "pretrained"
ENCODER_CHECKPOINT = "encoder.ckpt"


class ModelFactory:
    """Factory for encoders, heads and fine-tuning runs built from a run context."""

    @staticmethod
    def encoder_config(context: RunContext, vocab: Vocabulary) -> EncoderConfig:
        """
        Encoder configuration sized to the vocabulary.

        The embedding table gets one row per vocabulary token.
        """
        size = max(vocab.size, len(RESERVED_TOKENS) + 1)
        return EncoderConfig(**{**context.config.encoder.model_dump(), "vocab_size": size})

    @staticmethod
    def create_encoder(
        context: RunContext, config: EncoderConfig, checkpoint: Optional[str] = None
    ) -> Tuple[EncoderParams, str]:
        """
        Encoder parameters and their origin.

        Loads `checkpoint` when given, else the run's pretrained checkpoint
        when present, else a seeded random initialization.
        """
        if checkpoint is None:
            candidate = context.output_path(PRETRAINED_DIR, ENCODER_CHECKPOINT)
            checkpoint = candidate if os.path.exists(candidate) else None
        elif not os.path.exists(checkpoint):
            raise FileNotFoundError(f"Encoder checkpoint not found: {checkpoint}")

        if checkpoint is None:
            logger.info("Creating randomly initialized encoder")
            return init_encoder_params(config, context.stage_seed("init")), "random"

        arrays, _ = load_tensors(checkpoint)
        params = EncoderParams.from_arrays(arrays)
        params.validate(config)
        logger.info(f"Loaded encoder from {checkpoint}")
        return params, checkpoint

    @staticmethod
    def create_head(
        context: RunContext, input_dim: int, seed: Optional[int] = None
    ) -> ClassificationHead:
        seed = derive_seed(context.stage_seed("init"), 1) if seed is None else seed
        return ClassificationHead.init(context.config.head, input_dim, seed)

    @staticmethod
    def finetune_config(context: RunContext, **overrides) -> FineTuneConfig:
        """Fine-tuning config with the stage seed unless the profile pins one."""
        base = context.config.finetune.model_dump()
        if "seed" not in context.config.finetune.model_fields_set:
            base["seed"] = context.stage_seed("finetune")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return FineTuneConfig(**base)

    @staticmethod
    def create_runs(
        context: RunContext, batch_sizes: Sequence[int], **overrides
    ) -> List[FineTuneConfig]:
        """
        One fine-tuning config per batch size, identical otherwise.

        `overrides` apply to every run (mode, epochs, learning_rate).

        Example:
            ```python
            runs = ModelFactory.create_runs(context, [50, 100, 150, 200, 250])
            ```
        """
        runs = []
        for batch_size in batch_sizes:
            if batch_size < 1:
                raise ValueError(f"Invalid batch size: {batch_size}. Expected a positive integer")
            runs.append(
                ModelFactory.finetune_config(context, **{**overrides, "batch_size": batch_size})
            )
        logger.info(f"Created {len(runs)} fine-tuning runs")
        return runs
