import json
import logging
import os
from fractions import Fraction

import pytest

import app
from cli.commands import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, run
from utils.io import read_csv, read_json, sha256_file


def invoke(output_dir, *argv):
    """Run one command on the smoke profile; global flags must precede the command."""
    argv = ["--profile", "smoke", "--output-dir", str(output_dir), *argv]
    return run(build_parser().parse_args(argv))


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Output directory after synth, prepare, vocab and finetune on the smoke profile."""
    output_dir = tmp_path_factory.mktemp("pipeline")
    for command in ("synth", "prepare", "vocab", "finetune"):
        assert invoke(output_dir, command) == EXIT_OK, command
    return output_dir


def test_synth_writes_every_input(pipeline_dir):
    """Test the synthetic corpora and their line counts."""
    synthetic = pipeline_dir / "synthetic"
    for name in ("raw.jsonl", "unlabeled.jsonl", "benchmark.jsonl", "lexicon.json"):
        assert (synthetic / name).exists(), name
    assert len((synthetic / "raw.jsonl").read_text().splitlines()) == 400
    assert len((synthetic / "benchmark.jsonl").read_text().splitlines()) == 60
    assert read_json(str(synthetic / "benchmark_map.json"))["joy"] == [
        "happy_active",
        "happy_inactive",
    ]


def test_prepare_reports_counts(pipeline_dir):
    """Test split files and the statistics artifact."""
    stats = read_json(str(pipeline_dir / "data" / "stats.json"))
    assert stats["messages_read"] == 400
    kept = stats["messages_kept"]
    assert kept == stats["class_counts"]["Total"]
    assert kept + sum(stats["dropped"].values()) == 400
    assert sum(split["Total"] for split in stats["splits"].values()) == kept
    assert stats["splits"]["train"]["Total"] == int(Fraction("0.555") * kept)
    for name in ("train", "val", "test"):
        assert (pipeline_dir / "data" / f"{name}.jsonl").exists()


def test_finetune_writes_bundle_and_reports(pipeline_dir):
    """Test the model bundle, the history and the test report."""
    manifest = read_json(str(pipeline_dir / "model" / "manifest.json"))
    assert manifest["metadata"]["encoder_origin"] == "random"
    assert manifest["metadata"]["mode"] == "unfrozen"
    history = read_json(str(pipeline_dir / "history.json"))
    assert len(history["epochs"]) == 1
    assert "val_micro_f1_mean" in history["summary"]
    report = read_json(str(pipeline_dir / "test_report.json"))
    assert report["split"] == "test"
    assert report["metrics"]["micro_f"] == pytest.approx(report["metrics"]["accuracy"])


def test_evaluate_scores_the_benchmark(pipeline_dir):
    """Test the benchmark report with the test split section."""
    assert invoke(pipeline_dir, "evaluate") == EXIT_OK
    report = read_json(str(pipeline_dir / "report.json"))
    assert report["items"] == 60
    assert [row["class"] for row in report["rows"]] == ["joy", "anger", "sadness", "micro average"]
    assert 0.0 <= report["metrics"]["micro_f"] <= 1.0
    assert "test_split" in report
    assert (pipeline_dir / "report.csv").exists()


def test_sweep_writes_one_row_per_batch_size(pipeline_dir):
    """Test the batch-size sweep table."""
    assert invoke(pipeline_dir, "sweep", "--batch-sizes", "16", "48") == EXIT_OK
    rows = read_csv(str(pipeline_dir / "sweep.csv"))
    assert [row["batch_size"] for row in rows] == ["16", "48"]
    assert len({row["seed"] for row in rows}) == 1


def test_compare_pairs_epochs(pipeline_dir):
    """Test frozen and unfrozen runs with per-epoch scores."""
    assert invoke(pipeline_dir, "compare", "--epochs", "2") == EXIT_OK
    comparison = read_json(str(pipeline_dir / "comparison.json"))
    assert comparison["n"] == 2
    assert len(comparison["val_micro_f1"]["frozen"]) == 2
    assert comparison["encoder_unchanged"] == [True]


def test_ablate_prints_a_summary(pipeline_dir, capsys):
    """Test the ablation curve and its stderr summary."""
    assert invoke(pipeline_dir, "ablate") == EXIT_OK
    rows = read_csv(str(pipeline_dir / "curve.csv"))
    assert [row["size"] for row in rows] == ["20", "50"]
    assert not (pipeline_dir / "curve.svg").exists()
    assert "ablation: 2 sizes, monotone" in capsys.readouterr().err


def test_pretrain_then_finetune_uses_the_checkpoint(tmp_path, pipeline_dir):
    """Test that fine-tuning picks up the pretrained encoder."""
    assert invoke(pipeline_dir, "pretrain", "--epochs", "1") == EXIT_OK
    curve = read_json(str(pipeline_dir / "pretrained" / "loss_curve.json"))
    assert curve["epochs"] == 1
    assert "initial_loss" in curve

    assert invoke(pipeline_dir, "finetune") == EXIT_OK
    manifest = read_json(str(pipeline_dir / "model" / "manifest.json"))
    assert manifest["metadata"]["encoder_origin"] == "pretrained"


def test_report_gathers_artifacts(pipeline_dir):
    """Test the run summary."""
    assert invoke(pipeline_dir, "report") == EXIT_OK
    summary = read_json(str(pipeline_dir / "summary.json"))
    assert summary["profile"] == "smoke"
    assert {"stats", "model", "history", "test_report"} <= set(summary)


def test_missing_lexicon_is_a_usage_error(tmp_path, caplog):
    """Test exit code 2 with the missing path in the message."""
    with caplog.at_level(logging.ERROR):
        assert invoke(tmp_path, "prepare") == EXIT_USAGE
    assert os.path.join("synthetic", "lexicon.json") in caplog.text


def test_tab_indented_json_config_is_accepted(tmp_path):
    """Test that .json configs are parsed as JSON, where tab indentation is legal."""
    path = tmp_path / "custom.json"
    path.write_text('{\n\t"root_seed": 4,\n\t"synthetic": {"raw_messages": 50}\n}\n')
    assert invoke(tmp_path / "run", "--config", str(path), "synth") == EXIT_OK
    assert len((tmp_path / "run" / "synthetic" / "raw.jsonl").read_text().splitlines()) == 50


@pytest.mark.parametrize(
    "name, content", [("broken.json", '{"root_seed": 4,'), ("broken.yaml", "root_seed: [4\n")]
)
def test_unparsable_config_is_a_usage_error(tmp_path, caplog, name, content):
    """Test exit code 2 instead of a traceback for malformed configuration files."""
    path = tmp_path / name
    path.write_text(content)
    with caplog.at_level(logging.ERROR):
        assert invoke(tmp_path / "run", "--config", str(path), "report") == EXIT_USAGE
    assert "Cannot parse configuration file" in caplog.text


def test_empty_benchmark_is_a_data_error(tmp_path, pipeline_dir):
    """Test exit code 3 for a benchmark without items."""
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    model = str(pipeline_dir / "model")
    argv = ["evaluate", "--model", model, "--benchmark", str(empty)]
    assert invoke(tmp_path / "run", *argv) == EXIT_DATA


def test_report_without_artifacts_is_a_data_error(tmp_path):
    """Test exit code 3 for an empty output directory."""
    assert invoke(tmp_path, "report") == EXIT_DATA


def test_unknown_command_is_rejected():
    """Test argparse usage errors."""
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["deploy"])
    assert excinfo.value.code == EXIT_USAGE


def test_pipeline_is_deterministic(tmp_path):
    """Test byte-identical artifacts for two runs with the same seed."""
    digests = []
    for name in ("first", "second"):
        output_dir = tmp_path / name
        for command in ("synth", "prepare", "vocab", "finetune"):
            assert invoke(output_dir, "--seed", "5", command) == EXIT_OK
        digests.append(
            {
                path: sha256_file(str(output_dir / path))
                for path in ("data/train.jsonl", "vocab.json", "model/manifest.json")
            }
        )
    assert digests[0] == digests[1]


def test_main_mirrors_the_log(tmp_path):
    """Test that the entry point writes run.log into the output directory."""
    root = logging.getLogger()
    try:
        code = app.main(["--profile", "smoke", "--output-dir", str(tmp_path), "synth"])
        assert code == EXIT_OK
        log_text = (tmp_path / app.LOG_FILE).read_text()
        assert "'synth' finished" in log_text
    finally:
        for handler in list(root.handlers):
            if isinstance(handler, logging.FileHandler):
                root.removeHandler(handler)
                handler.close()
    assert json.loads((tmp_path / "synthetic" / "lexicon.json").read_text())
