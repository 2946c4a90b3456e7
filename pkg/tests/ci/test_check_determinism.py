"""Tests for the reproducibility check script."""

from pathlib import Path

import pytest

from ci.scripts.check_determinism import compare_digests, digest_tree, main, run_pipeline


def test_digest_tree_walks_subdirectories(tmp_path: Path):
    """Test relative paths, sorting and the ignored log file."""
    (tmp_path / "model").mkdir()
    (tmp_path / "model" / "head.npz").write_bytes(b"weights")
    (tmp_path / "vocab.json").write_text("{}")
    (tmp_path / "run.log").write_text("noise")

    digests = digest_tree(str(tmp_path))
    assert list(digests) == ["model/head.npz", "vocab.json"]
    assert all(len(value) == 64 for value in digests.values())


def test_compare_digests_reports_each_difference():
    """Test missing and differing files."""
    first = {"a.json": "1", "b.json": "2", "c.json": "3"}
    second = {"b.json": "2", "c.json": "4", "d.json": "5"}
    assert compare_digests(first, second) == [
        "a.json: only in first run",
        "c.json: digests differ",
        "d.json: only in second run",
    ]
    assert compare_digests(first, dict(first)) == []


def test_run_pipeline_raises_on_failure(tmp_path: Path):
    """Test that a failing command stops the pipeline."""
    with pytest.raises(RuntimeError, match="'prepare' exited with code 2"):
        run_pipeline(str(tmp_path), "smoke", None, commands=["prepare"])


def test_run_pipeline_is_reproducible(tmp_path: Path):
    """Test identical digests for two seeded runs."""
    commands = ["synth", "prepare", "vocab"]
    trees = []
    for name in ("first", "second"):
        output_dir = tmp_path / name
        run_pipeline(str(output_dir), "smoke", 3, commands=commands)
        trees.append(digest_tree(str(output_dir)))
    assert trees[0]
    assert compare_digests(*trees) == []


@pytest.mark.slow
def test_main_passes_on_the_smoke_profile(capsys):
    """Test the full check end to end."""
    assert main(["--profile", "smoke"]) == 0
    assert "byte-identical" in capsys.readouterr().out
