"""
Model bundle: one directory holding everything a classifier needs.

    manifest.json   file digests and model summary
    encoder.ckpt    encoder tensors
    head.ckpt       classification head tensors
    config.json     encoder configuration
    vocab.json      vocabulary
"""

import logging
import os
from typing import Any, Dict, Optional

from config.base_config import EncoderConfig
from lib.autodiff import load_tensors, save_tensors
from lib.encoder import EncoderParams
from lib.errors import DataError
from lib.head import ClassificationHead
from lib.tokenizer import Vocabulary
from utils.io import read_json, sha256_file, write_json

from .adapt import EmotionClassifier

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = 1
ENCODER_FILE = "encoder.ckpt"
HEAD_FILE = "head.ckpt"
CONFIG_FILE = "config.json"
VOCAB_FILE = "vocab.json"
MANIFEST_FILE = "manifest.json"


def save_bundle(
    model: EmotionClassifier, directory: str, metadata: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """Write the bundle and return its manifest."""
    os.makedirs(directory, exist_ok=True)
    save_tensors(
        os.path.join(directory, ENCODER_FILE),
        model.encoder_params.arrays(),
        {"kind": model.encoder_config.kind.value},
    )
    save_tensors(
        os.path.join(directory, HEAD_FILE), model.head.arrays(), {"kind": model.head.kind.value}
    )
    write_json(os.path.join(directory, CONFIG_FILE), model.encoder_config.model_dump(mode="json"))
    model.vocab.save(os.path.join(directory, VOCAB_FILE))

    files = [ENCODER_FILE, HEAD_FILE, CONFIG_FILE, VOCAB_FILE]
    manifest = {
        "format": BUNDLE_FORMAT,
        "encoder_kind": model.encoder_config.kind.value,
        "head_kind": model.head.kind.value,
        "num_classes": model.head.num_classes,
        "vocab_size": model.vocab.size,
        "parameters": model.encoder_params.parameter_count(),
        "files": {name: sha256_file(os.path.join(directory, name)) for name in files},
        "metadata": metadata or {},
    }
    write_json(os.path.join(directory, MANIFEST_FILE), manifest)
    logger.info(f"Saved model bundle to {directory}")
    return manifest


def load_bundle(directory: str, verify: bool = True) -> EmotionClassifier:
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"Model bundle manifest not found: {manifest_path}")
    manifest = read_json(manifest_path)
    if manifest.get("format") != BUNDLE_FORMAT:
        raise DataError(f"Unsupported bundle format {manifest.get('format')} in {directory}")

    if verify:
        for name, digest in manifest["files"].items():
            if sha256_file(os.path.join(directory, name)) != digest:
                raise DataError(f"Bundle file {name} does not match its manifest digest")

    config = EncoderConfig(**read_json(os.path.join(directory, CONFIG_FILE)))
    encoder_arrays, _ = load_tensors(os.path.join(directory, ENCODER_FILE))
    encoder_params = EncoderParams.from_arrays(encoder_arrays)
    encoder_params.validate(config)
    head_arrays, _ = load_tensors(os.path.join(directory, HEAD_FILE))
    vocab = Vocabulary.load(os.path.join(directory, VOCAB_FILE))
    if vocab.size > config.vocab_size:
        raise DataError(
            f"Vocabulary of {vocab.size} tokens exceeds the embedding table ({config.vocab_size})"
        )
    head = ClassificationHead.from_arrays(head_arrays)
    return EmotionClassifier(config, encoder_params, head, vocab)
