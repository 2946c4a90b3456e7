import pytest
from pydantic import ValidationError

from config.base_config import EncoderConfig, EvalConfig, RunConfig, SplitConfig, check_fractions
from config.enums import AdaptMode, EmotionClass, EncoderKind
from config.loader import ConfigLoader, merge_overrides, resolve_variables, substitute_variables
from lib.errors import ConfigError, InvalidSpec


def test_split_config_defaults():
    """Test that the default split fractions sum to one exactly."""
    config = SplitConfig()
    assert (config.train_fraction, config.val_fraction, config.test_fraction) == (
        0.555,
        0.111,
        0.334,
    )
    assert config.seed is None


def test_split_config_rejects_bad_sum():
    """Test that fractions summing to anything but one are rejected."""
    with pytest.raises(ValidationError) as excinfo:
        SplitConfig(train_fraction=0.5, val_fraction=0.3, test_fraction=0.3)
    assert "must sum to 1 exactly" in str(excinfo.value)


def test_check_fractions_is_exact():
    """Test that the sum is checked on the decimal values as written."""
    check_fractions(0.1, 0.2, 0.7)
    with pytest.raises(InvalidSpec):
        check_fractions(0.1, 0.2, 0.69999)
    with pytest.raises(InvalidSpec):
        check_fractions(-0.1, 0.4, 0.7)


def test_encoder_config_validation():
    """Test head divisibility and feed-forward width checks."""
    EncoderConfig(hidden_dim=64, num_heads=4, ffn_dim=128)

    with pytest.raises(ValidationError) as excinfo:
        EncoderConfig(hidden_dim=64, num_heads=5)
    assert "must be divisible by num_heads" in str(excinfo.value)

    with pytest.raises(ValidationError) as excinfo:
        EncoderConfig(hidden_dim=64, ffn_dim=32)
    assert "ffn_dim (32) must be greater than or equal to hidden_dim (64)" in str(excinfo.value)

    with pytest.raises(ValidationError):
        EncoderConfig(max_len=2)


def test_eval_config_rejects_non_positive_sizes():
    """Test that sweep and ablation sizes must be positive."""
    with pytest.raises(ValidationError):
        EvalConfig(ablation_sizes=[10, 0])
    with pytest.raises(ValidationError):
        EvalConfig(sweep_batch_sizes=[])


def test_emotion_class_order():
    """Test the canonical class order and index round trip."""
    assert [e.value for e in EmotionClass.ordered()] == [
        "happy_active",
        "happy_inactive",
        "unhappy_active",
        "unhappy_inactive",
    ]
    assert EmotionClass.from_index(2) == EmotionClass.UNHAPPY_ACTIVE
    assert EmotionClass.UNHAPPY_INACTIVE.index == 3
    with pytest.raises(IndexError):
        EmotionClass.from_index(4)


def test_substitute_variables_nested():
    """Test recursive substitution in dicts and lists."""
    data = {"paths": {"output_dir": "${run}/out"}, "sizes": ["${n}", 3]}
    result = substitute_variables(data, {"run": "runs/x", "n": "5"})
    assert result == {"paths": {"output_dir": "runs/x/out"}, "sizes": ["5", 3]}


def test_substitute_variables_keeps_types():
    """Test that a lone placeholder keeps the variable's YAML type."""
    data = {"root_seed": "${seed}", "name": "seed-${seed}", "plot": "${plot}"}
    result = substitute_variables(data, {"seed": 7, "plot": False})
    assert result == {"root_seed": 7, "name": "seed-7", "plot": False}


def test_substitute_variables_undefined():
    """Test that an undefined variable names the available ones."""
    with pytest.raises(ValueError, match="is used but not defined"):
        substitute_variables("${missing}", {"run": "x"})


def test_resolve_variables_chains_and_cycles():
    """Test variables built from other variables and the cycle error."""
    resolved = resolve_variables({"run_dir": "runs/desk", "raw": "${run_dir}/raw.jsonl"})
    assert resolved["raw"] == "runs/desk/raw.jsonl"
    with pytest.raises(ConfigError, match="cycle"):
        resolve_variables({"a": "${b}", "b": "x${a}"})


def test_merge_overrides_ignores_none():
    """Test that None overrides keep the file values."""
    base = {"root_seed": 13, "paths": {"output_dir": "runs/a", "lexicon": "lex.json"}}
    merged = merge_overrides(base, {"root_seed": None, "paths": {"output_dir": "runs/b"}})
    assert merged == {"root_seed": 13, "paths": {"output_dir": "runs/b", "lexicon": "lex.json"}}
    assert base["paths"]["output_dir"] == "runs/a"


@pytest.mark.parametrize("profile", ["desk", "smoke", "bert_base", "use_dan"])
def test_shipped_profiles_load(profile):
    """Test that every shipped profile validates."""
    context = ConfigLoader(profile=profile).create_run_context()
    assert isinstance(context.config, RunConfig)
    assert context.profile == profile


def test_desk_profile_values():
    """Test the desk-scale defaults."""
    config = ConfigLoader(profile="desk").create_run_context().config
    assert config.encoder.kind == EncoderKind.TRANSFORMER
    assert (config.encoder.num_layers, config.encoder.num_heads) == (2, 4)
    assert (config.encoder.hidden_dim, config.encoder.ffn_dim, config.encoder.max_len) == (
        64,
        128,
        32,
    )
    assert config.paths.output_dir == "runs/desk"
    assert config.finetune.mode == AdaptMode.UNFROZEN


def test_use_dan_profile_values():
    """Test the DAN profile mirrors the USE fine-tuning setup."""
    config = ConfigLoader(profile="use_dan").create_run_context().config
    assert config.encoder.kind == EncoderKind.DAN
    assert config.finetune.batch_size == 150
    assert config.finetune.epochs == 20
    assert config.finetune.learning_rate == pytest.approx(0.001)


def test_explicit_config_file(tmp_path):
    """Test loading a JSON file with variables and overrides."""
    path = tmp_path / "custom.json"
    path.write_text(
        '{"variables": {"out": "runs/custom"}, "root_seed": 3, '
        '"paths": {"output_dir": "${out}"}}'
    )
    context = ConfigLoader(config_path=str(path)).create_run_context({"root_seed": 9})
    assert context.profile == "custom"
    assert context.config.root_seed == 9
    assert context.output_dir == "runs/custom"


def test_missing_config_file(tmp_path):
    """Test that a missing file names its path."""
    with pytest.raises(FileNotFoundError, match="nope.yaml"):
        ConfigLoader(config_path=str(tmp_path / "nope.yaml")).create_run_context()


def test_stage_seeds_use_fixed_offsets(smoke_context):
    """Test per-stage seeds derived from the root seed."""
    root = smoke_context.config.root_seed
    assert smoke_context.stage_seed("split") == root + 1
    assert smoke_context.stage_seed("finetune") == root + 5
    with pytest.raises(ValueError, match="Unknown stage"):
        smoke_context.stage_seed("deploy")


def test_input_path_defaults_under_output_dir(smoke_context):
    """Test that unset input paths resolve to the synthetic directory."""
    path = smoke_context.input_path("lexicon")
    assert path == smoke_context.output_path("synthetic", "lexicon.json")
