#!/usr/bin/env python3
"""
Check that the pipeline is reproducible.

This script runs the pipeline twice from scratch in temporary directories
with the same profile and seed, then compares the SHA-256 digest of every
artifact. Any difference fails the check.
"""

import argparse
import os
import sys
import tempfile
from typing import Dict, List, Optional, Sequence

from cli.commands import EXIT_OK, build_parser, run
from utils.io import sha256_file

PIPELINE = ["synth", "prepare", "vocab", "finetune", "evaluate"]
IGNORED_FILES = {"run.log"}


def run_pipeline(
    output_dir: str, profile: str, seed: Optional[int], commands: Sequence[str] = PIPELINE
) -> None:
    """
    Run each command in order into `output_dir`.

    Args:
        output_dir: Directory receiving every artifact
        profile: Profile name under config/profiles/
        seed: Root seed override, or None for the profile's
        commands: Subcommands to run

    Raises:
        RuntimeError: If a command exits with a nonzero code
    """
    parser = build_parser()
    for command in commands:
        argv = ["--profile", profile, "--output-dir", output_dir]
        if seed is not None:
            argv += ["--seed", str(seed)]
        code = run(parser.parse_args(argv + [command]))
        if code != EXIT_OK:
            raise RuntimeError(f"'{command}' exited with code {code}")


def digest_tree(root: str) -> Dict[str, str]:
    """
    SHA-256 digest of every file under `root`.

    Args:
        root: Directory to walk

    Returns:
        Dictionary mapping relative paths to hex digests
    """
    digests = {}
    for directory, _, files in os.walk(root):
        for name in files:
            if name in IGNORED_FILES:
                continue
            path = os.path.join(directory, name)
            digests[os.path.relpath(path, root)] = sha256_file(path)
    return dict(sorted(digests.items()))


def compare_digests(first: Dict[str, str], second: Dict[str, str]) -> List[str]:
    """
    Describe every difference between two digest trees.

    Args:
        first: Digests of the first run
        second: Digests of the second run

    Returns:
        One message per missing or differing file, empty when identical
    """
    problems = []
    for path in sorted(set(first) | set(second)):
        if path not in second:
            problems.append(f"{path}: only in first run")
        elif path not in first:
            problems.append(f"{path}: only in second run")
        elif first[path] != second[path]:
            problems.append(f"{path}: digests differ")
    return problems


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--profile", default="smoke")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)

    print(f"🔁 Checking determinism with profile '{args.profile}'")
    with tempfile.TemporaryDirectory() as first_dir, tempfile.TemporaryDirectory() as second_dir:
        runs = []
        for label, directory in (("first", first_dir), ("second", second_dir)):
            print(f"   Running {label} pipeline: {' -> '.join(PIPELINE)}")
            run_pipeline(directory, args.profile, args.seed)
            runs.append(digest_tree(directory))

    problems = compare_digests(*runs)
    if problems:
        print(f"❌ {len(problems)} artifacts differ between runs:")
        for problem in problems:
            print(f"   - {problem}")
        return 1
    print(f"✅ {len(runs[0])} artifacts are byte-identical across runs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
