import json
import os

import numpy as np
import pytest

from lib.errors import DataError
from stages.adapt import EmotionClassifier
from stages.bundle import ENCODER_FILE, MANIFEST_FILE, load_bundle, save_bundle


@pytest.fixture
def classifier(transformer_config, transformer_params, relu_head, tiny_vocab):
    return EmotionClassifier(transformer_config, transformer_params, relu_head, tiny_vocab)


def test_bundle_round_trip(tmp_path, classifier):
    """Test that a loaded bundle predicts exactly like the saved model."""
    directory = str(tmp_path / "model")
    manifest = save_bundle(classifier, directory, {"encoder_origin": "random"})
    assert manifest["head_kind"] == "relu_hidden"
    assert manifest["metadata"] == {"encoder_origin": "random"}
    assert sorted(manifest["files"]) == ["config.json", "encoder.ckpt", "head.ckpt", "vocab.json"]

    loaded = load_bundle(directory)
    assert loaded.encoder_params.digest() == classifier.encoder_params.digest()
    assert loaded.vocab == classifier.vocab
    assert loaded.encoder_config == classifier.encoder_config
    texts = ["the sun is bright today", "so tired"]
    np.testing.assert_array_equal(
        loaded.predict_indices(texts), classifier.predict_indices(texts)
    )


def test_bundle_bytes_are_deterministic(tmp_path, classifier):
    """Test that saving twice gives identical manifests."""
    first = save_bundle(classifier, str(tmp_path / "a"))
    second = save_bundle(classifier, str(tmp_path / "b"))
    assert first == second


def test_tampered_bundle_is_rejected(tmp_path, classifier):
    """Test digest verification and the format check."""
    directory = str(tmp_path / "model")
    save_bundle(classifier, directory)
    with open(os.path.join(directory, ENCODER_FILE), "ab") as f:
        f.write(b"\0")
    with pytest.raises(DataError, match="does not match"):
        load_bundle(directory)

    manifest_path = os.path.join(directory, MANIFEST_FILE)
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    manifest["format"] = 99
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    with pytest.raises(DataError, match="Unsupported bundle format"):
        load_bundle(directory)


def test_missing_bundle(tmp_path):
    """Test a directory without a manifest."""
    with pytest.raises(FileNotFoundError, match="manifest"):
        load_bundle(str(tmp_path))
