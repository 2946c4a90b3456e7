# config/loader.py
import json
import logging
import os
import re
from dataclasses import dataclass
from typing import Any, Dict, Optional

import yaml

from lib.errors import ConfigError

from .base_config import RunConfig

logger = logging.getLogger(__name__)

# Fixed offsets from the root seed, one per pipeline stage.
STAGE_SEED_OFFSETS: Dict[str, int] = {
    "split": 1,
    "vocab": 2,
    "init": 3,
    "pretrain": 4,
    "finetune": 5,
    "ablation": 6,
    "sweep": 7,
    "synthetic": 8,
}

# Input files used when the profile leaves a path unset, under <output_dir>/synthetic/.
DEFAULT_INPUT_FILES: Dict[str, str] = {
    "raw_corpus": "raw.jsonl",
    "lexicon": "lexicon.json",
    "unlabeled_corpus": "unlabeled.jsonl",
    "benchmark": "benchmark.jsonl",
}


@dataclass
class RunContext:
    config: RunConfig
    profile: str

    @property
    def output_dir(self) -> str:
        return self.config.paths.output_dir

    def stage_seed(self, stage: str) -> int:
        """Per-stage seed derived from the root seed by a fixed offset."""
        if stage not in STAGE_SEED_OFFSETS:
            raise ValueError(
                f"Unknown stage '{stage}'. Available stages: {list(STAGE_SEED_OFFSETS.keys())}"
            )
        return self.config.root_seed + STAGE_SEED_OFFSETS[stage]

    def output_path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def input_path(self, name: str) -> str:
        """Configured input path, or its default location under the output directory."""
        configured = getattr(self.config.paths, name)
        if configured:
            return configured
        return self.output_path("synthetic", DEFAULT_INPUT_FILES[name])


VARIABLE_PATTERN = re.compile(r"\$\{([^}]+)\}")


def substitute_variables(data: Any, variables: Dict[str, Any]) -> Any:
    """
    Replace ${name} placeholders anywhere in a parsed profile.

    A string that is exactly one placeholder takes the variable's value with its
    YAML type, so `root_seed: ${seed}` stays an integer. Placeholders inside
    longer strings are formatted with str().

    Raises:
        ValueError: If a placeholder names an undefined variable
    """
    if isinstance(data, dict):
        return {key: substitute_variables(value, variables) for key, value in data.items()}
    if isinstance(data, list):
        return [substitute_variables(item, variables) for item in data]
    if not isinstance(data, str):
        return data

    def lookup(name: str) -> Any:
        if name not in variables:
            raise ValueError(
                f"Variable '${name}' is used but not defined in 'variables' section. "
                f"Available variables: {sorted(variables)}"
            )
        return variables[name]

    whole = VARIABLE_PATTERN.fullmatch(data)
    if whole:
        return lookup(whole.group(1))
    return VARIABLE_PATTERN.sub(lambda match: str(lookup(match.group(1))), data)


def resolve_variables(variables: Dict[str, Any], max_passes: int = 10) -> Dict[str, Any]:
    """
    Expand variables that reference other variables, e.g. `raw: "${run_dir}/raw.jsonl"`.

    Raises:
        ConfigError: If references are still unresolved after `max_passes` (a cycle)
    """
    resolved = dict(variables)
    for _ in range(max_passes):
        expanded = substitute_variables(resolved, resolved)
        if expanded == resolved:
            return resolved
        resolved = expanded
    pending = sorted(
        name for name, value in resolved.items() if VARIABLE_PATTERN.search(str(value))
    )
    raise ConfigError(f"Variables reference each other in a cycle: {pending}")


class ConfigLoader:
    """
    Loader for run configuration files.

    A run is configured either by a named profile under config/profiles/ or
    by an explicit YAML/JSON file.
    """

    def __init__(self, profile: str = "desk", config_path: Optional[str] = None):
        """
        Initialize the configuration loader.

        Args:
            profile: Profile name, resolved to config/profiles/<profile>.yaml
            config_path: Explicit configuration file; takes precedence over the profile
        """
        self._profile = profile
        self._config_path = config_path

        self.base_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "profiles")

    @property
    def config_path(self) -> str:
        if self._config_path:
            return self._config_path
        return os.path.join(self.base_path, f"{self._profile}.yaml")

    def load_raw_config(self) -> Dict[str, Any]:
        """
        Load the configuration file and substitute variables.

        Variables are defined in a 'variables' section at the top of the file.
        They can be referenced anywhere in the config using ${variable_name} syntax.
        Files ending in .json are parsed as JSON, everything else as YAML.
        """
        config_path = self.config_path
        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Configuration file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as f:
            try:
                if config_path.endswith(".json"):
                    raw_config = json.load(f)
                else:
                    raw_config = yaml.safe_load(f) or {}
            except (yaml.YAMLError, json.JSONDecodeError) as e:
                raise ConfigError(f"Cannot parse configuration file {config_path}: {e}") from e

        if not isinstance(raw_config, dict):
            raise ValueError(f"Configuration file must hold a mapping: {config_path}")

        variables = raw_config.pop("variables", {}) or {}
        if not isinstance(variables, dict):
            raise ValueError("'variables' section must be a dictionary")

        if variables:
            variables = resolve_variables(variables)
            logger.debug(f"Profile variables: {variables}")
            raw_config = substitute_variables(raw_config, variables)

        return raw_config

    def create_run_context(self, overrides: Optional[Dict[str, Any]] = None) -> RunContext:
        """
        Create the validated run context.

        Args:
            overrides: Nested mapping merged over the file content (CLI flags)
        """
        raw_config = self.load_raw_config()
        if overrides:
            raw_config = merge_overrides(raw_config, overrides)

        config = RunConfig(**raw_config)
        logger.debug(f"Config: {config}")

        profile = self._profile
        if self._config_path:
            profile = os.path.splitext(os.path.basename(self._config_path))[0]
        return RunContext(config=config, profile=profile)


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Deep-merge overrides into base; None values in overrides are ignored."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = merge_overrides({}, value)
        else:
            merged[key] = value
    return merged
