import os

from utils.io import (
    read_csv,
    read_json,
    read_jsonl,
    sha256_file,
    write_csv,
    write_json,
    write_jsonl,
)
from utils.naming import to_display, to_kebab
from utils.plotting import plot_curve_svg
from utils.seeds import derive_seed, rng_for


def test_naming_conversions():
    """Test label name conventions."""
    assert to_kebab("DeskUnfrozen_run") == "desk-unfrozen-run"
    assert to_display("happy_active") == "Happy-Active"
    assert to_display("") == ""


def test_derive_seed_is_stable_and_sensitive():
    """Test that derived seeds depend on every part and nothing else."""
    assert derive_seed(13, 0, 5) == derive_seed(13, 0, 5)
    assert derive_seed(13, 0, 5) != derive_seed(13, 5, 0)
    assert derive_seed(13, 1) != derive_seed(14, 1)
    assert 0 <= derive_seed(1, 2, 3) < 2**32
    assert rng_for(3, 4).random() == rng_for(3, 4).random()


def test_json_is_sorted_with_trailing_newline(tmp_path):
    """Test deterministic JSON artifacts."""
    path = tmp_path / "nested" / "a.json"
    write_json(str(path), {"b": 1, "a": [1, 2]})
    text = path.read_text()
    assert text.endswith("}\n")
    assert text.index('"a"') < text.index('"b"')
    assert read_json(str(path)) == {"a": [1, 2], "b": 1}


def test_jsonl_and_csv(tmp_path):
    """Test JSON-lines and CSV writers."""
    jsonl = tmp_path / "rows.jsonl"
    write_jsonl(str(jsonl), [{"text": "x", "label": "joy"}, {"text": "y", "label": "anger"}])
    assert read_jsonl(str(jsonl))[1] == {"text": "y", "label": "anger"}

    csv_path = tmp_path / "rows.csv"
    write_csv(str(csv_path), ["size", "micro_f"], [{"size": 20, "micro_f": 0.5, "extra": 1}])
    assert csv_path.read_bytes() == b"size,micro_f\n20,0.5\n"
    assert read_csv(str(csv_path)) == [{"size": "20", "micro_f": "0.5"}]


def test_sha256_file_changes_with_content(tmp_path):
    """Test file digests."""
    path = tmp_path / "f.txt"
    path.write_text("one")
    first = sha256_file(str(path))
    path.write_text("two")
    assert sha256_file(str(path)) != first
    assert len(first) == 64


def test_plot_curve_svg_is_deterministic(tmp_path):
    """Test that two identical plots give identical SVG bytes."""
    paths = [str(tmp_path / f"curve{i}.svg") for i in range(2)]
    for path in paths:
        plot_curve_svg(path, [20, 200, 2000], [0.4, 0.6, 0.7], "size", "micro-F", log_x=True)
    assert os.path.getsize(paths[0]) > 0
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()
