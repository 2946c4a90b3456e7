# cli/commands.py
"""
Command-line surface of the pipeline.

Every command reads its inputs from the run's output directory (or the paths
the profile names) and writes its artifacts back there:

    synth     synthetic/{raw,unlabeled,benchmark}.jsonl, lexicon.json, benchmark_map.json
    prepare   data/{train,val,test}.jsonl, data/stats.json
    vocab     vocab.json
    pretrain  pretrained/encoder.ckpt, pretrained/loss_curve.json
    finetune  model/, history.json, test_report.{json,csv}
    sweep     sweep.csv
    compare   comparison.json
    evaluate  report.{json,csv}
    ablate    curve.csv, curve.svg, ablation.json
    report    summary.json
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from config.base_config import FineTuneConfig, PretrainConfig
from config.enums import AdaptMode
from config.loader import DEFAULT_INPUT_FILES, ConfigLoader, RunContext
from lib.autodiff import save_tensors
from lib.encoder import init_encoder_params
from lib.errors import ConfigError, DataError, EmptyCorpus, NumericalError
from lib.tokenizer import Vocabulary, build_vocab, encode_many
from stages.adapt import evaluate_dataset, fine_tune
from stages.bundle import load_bundle, save_bundle
from stages.corpus import (
    REFERENCE_CLASS_COUNTS,
    Dataset,
    HashtagLexicon,
    build_dataset,
    class_count_table,
    read_dataset,
    read_raw_messages,
    split_dataset,
    write_dataset,
    write_raw_messages,
)
from stages.evaluation import (
    DEFAULT_TAXONOMY,
    REFERENCE_BENCHMARK_COUNTS,
    REFERENCE_RESULTS,
    AblationSetup,
    BenchmarkTaxonomyMap,
    ablation,
    compare_modes,
    evaluate_benchmark,
    is_non_decreasing,
    read_benchmark,
    write_curve,
    write_report,
)
from stages.factory import ENCODER_CHECKPOINT, PRETRAINED_DIR, ModelFactory
from stages.pretrain import evaluate_mlm, loss_curve_json, pretrain_mlm, read_unlabeled_corpus
from stages.synthetic import generate_all, write_texts
from utils.io import ensure_parent, read_csv, read_json, write_csv, write_json, write_jsonl
from utils.plotting import plot_curve_svg
from utils.seeds import derive_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DATA_DIR = "data"
SPLITS = ("train", "val", "test")
VOCAB_FILE = "vocab.json"
MODEL_DIR = "model"
SWEEP_FIELDS = [
    "batch_size",
    "mode",
    "epochs",
    "learning_rate",
    "seed",
    "val_micro_f1",
    "val_micro_f1_mean",
    "val_micro_f1_std",
    "test_micro_f1",
]

# summary.json section -> artifact path relative to the output directory
SUMMARY_ARTIFACTS: Dict[str, Tuple[str, ...]] = {
    "stats": (DATA_DIR, "stats.json"),
    "pretrain": ("pretrained", "loss_curve.json"),
    "model": (MODEL_DIR, "manifest.json"),
    "history": ("history.json",),
    "test_report": ("test_report.json",),
    "comparison": ("comparison.json",),
    "benchmark_report": ("report.json",),
    "ablation": ("ablation.json",),
}


def require_path(path: Optional[str], what: str) -> str:
    """Return `path`, raising FileNotFoundError naming it when it does not exist."""
    if not path or not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def load_context(args: argparse.Namespace) -> RunContext:
    """Run context of the selected profile or config file with the CLI overrides applied."""
    loader = ConfigLoader(profile=args.profile, config_path=args.config)
    overrides = {"root_seed": args.seed, "paths": {"output_dir": args.output_dir}}
    return loader.create_run_context(overrides)


def _load_split(context: RunContext, name: str) -> Dataset:
    path = require_path(context.output_path(DATA_DIR, f"{name}.jsonl"), f"{name} split")
    return read_dataset(path)


def _load_vocab(context: RunContext) -> Vocabulary:
    return Vocabulary.load(require_path(context.output_path(VOCAB_FILE), "Vocabulary"))


def _finetune_config(
    context: RunContext, args: argparse.Namespace, **extra: Any
) -> FineTuneConfig:
    return ModelFactory.finetune_config(
        context,
        mode=getattr(args, "mode", None),
        batch_size=getattr(args, "batch_size", None),
        epochs=getattr(args, "epochs", None),
        learning_rate=getattr(args, "lr", None),
        **extra,
    )


def cmd_synth(context: RunContext, args: argparse.Namespace) -> None:
    """Write the synthetic corpora, the example lexicon and the default taxonomy map."""
    bundle = generate_all(context.config.synthetic, context.stage_seed("synthetic"))

    def target(name: str) -> str:
        path = context.output_path("synthetic", DEFAULT_INPUT_FILES[name])
        ensure_parent(path)
        return path

    write_raw_messages(target("raw_corpus"), bundle.raw)
    write_texts(target("unlabeled_corpus"), bundle.unlabeled)
    write_jsonl(
        target("benchmark"),
        [{"text": item.text, "label": item.label.value} for item in bundle.benchmark],
    )
    with open(target("lexicon"), "w", encoding="utf-8") as f:
        f.write(bundle.lexicon.to_json())
        f.write("\n")
    write_json(context.output_path("synthetic", "benchmark_map.json"), DEFAULT_TAXONOMY.to_json())
    logger.info(f"Synthetic corpora written to {context.output_path('synthetic')}")


def cmd_prepare(context: RunContext, args: argparse.Namespace) -> None:
    """Label, clean, deduplicate and split the raw corpus."""
    lexicon_path = require_path(context.input_path("lexicon"), "Hashtag lexicon")
    raw_path = require_path(context.input_path("raw_corpus"), "Raw corpus")
    lexicon = HashtagLexicon.from_json_file(lexicon_path)
    raw = read_raw_messages(raw_path)

    result = build_dataset(raw, lexicon)
    for reason, count in result.dropped.items():
        logger.info(f"Dropped {count} messages: {reason}")
    split_config = context.config.split
    seed = split_config.seed if split_config.seed is not None else context.stage_seed("split")
    splits = dict(zip(SPLITS, split_dataset(result.dataset, split_config, seed=seed)))

    for name, dataset in splits.items():
        path = context.output_path(DATA_DIR, f"{name}.jsonl")
        ensure_parent(path)
        write_dataset(path, dataset)

    stats = {
        "messages_read": len(raw),
        "messages_kept": len(result.dataset),
        "dropped": result.dropped,
        "class_counts": class_count_table(result.class_counts),
        "splits": {name: class_count_table(ds.class_counts()) for name, ds in splits.items()},
        "split_seed": seed,
        "cleaning_audit": {"reference_class_counts": class_count_table(REFERENCE_CLASS_COUNTS)},
    }
    write_json(context.output_path(DATA_DIR, "stats.json"), stats)


def cmd_vocab(context: RunContext, args: argparse.Namespace) -> None:
    """Build the vocabulary from the training split and the unlabeled corpus when present."""
    texts = _load_split(context, "train").texts()
    unlabeled_path = context.input_path("unlabeled_corpus")
    if os.path.exists(unlabeled_path):
        texts += read_unlabeled_corpus(unlabeled_path)
    else:
        logger.warning(f"Unlabeled corpus {unlabeled_path} not found; vocabulary from train only")

    tokenizer = context.config.tokenizer
    vocab = build_vocab(texts, min_count=tokenizer.min_count, max_size=tokenizer.max_size)
    path = context.output_path(VOCAB_FILE)
    ensure_parent(path)
    vocab.save(path)
    logger.info(f"Vocabulary of {vocab.size} tokens written to {path}")


def cmd_pretrain(context: RunContext, args: argparse.Namespace) -> None:
    """Masked-LM pretraining from a seeded random initialization."""
    vocab = _load_vocab(context)
    config = ModelFactory.encoder_config(context, vocab)
    texts = read_unlabeled_corpus(
        require_path(context.input_path("unlabeled_corpus"), "Unlabeled corpus")
    )
    corpus = encode_many(texts, vocab, config.max_len)

    base = context.config.pretrain
    masking = base.masking
    if "seed" not in masking.model_fields_set:
        masking = masking.model_copy(update={"seed": context.stage_seed("pretrain")})
    overrides = {"epochs": args.epochs, "batch_size": args.batch_size, "learning_rate": args.lr}
    pconf = PretrainConfig(
        **{
            **base.model_dump(),
            "masking": masking.model_dump(),
            **{k: v for k, v in overrides.items() if v is not None},
        }
    )

    params = init_encoder_params(config, context.stage_seed("init"))
    try:
        initial, _ = evaluate_mlm(params, config, corpus, pconf.masking)
    except EmptyCorpus as e:
        logger.warning(f"Initial masked-LM loss unavailable: {e}")
        initial = None
    trained, curve = pretrain_mlm(params, config, corpus, pconf)

    checkpoint = context.output_path(PRETRAINED_DIR, ENCODER_CHECKPOINT)
    ensure_parent(checkpoint)
    save_tensors(
        checkpoint,
        trained.arrays(),
        {"kind": config.kind.value, "epochs": pconf.epochs, "vocab_size": config.vocab_size},
    )
    with open(context.output_path(PRETRAINED_DIR, "loss_curve.json"), "w") as f:
        f.write(loss_curve_json(curve, initial))
        f.write("\n")
    if context.config.eval.plot and curve:
        plot_curve_svg(
            context.output_path(PRETRAINED_DIR, "loss_curve.svg"),
            list(range(1, len(curve) + 1)),
            curve,
            xlabel="Epoch",
            ylabel="Masked-LM loss",
            unit_interval=False,
        )
    logger.info(f"Pretrained encoder written to {checkpoint}")


def _prepare_finetune(context: RunContext, args: argparse.Namespace):
    """Splits, vocabulary, encoder config, starting encoder and head of a fine-tuning run."""
    train, val, test = (_load_split(context, name) for name in SPLITS)
    vocab = _load_vocab(context)
    config = ModelFactory.encoder_config(context, vocab)
    checkpoint = getattr(args, "checkpoint", None)
    encoder, origin = ModelFactory.create_encoder(context, config, checkpoint)
    head = ModelFactory.create_head(context, config.hidden_dim)
    return train, val, test, vocab, config, encoder, origin, head


def cmd_finetune(context: RunContext, args: argparse.Namespace) -> None:
    """Fine-tune one classifier, save its bundle and score the test split."""
    train, val, test, vocab, config, encoder, origin, head = _prepare_finetune(context, args)
    fconf = _finetune_config(context, args)
    model, history = fine_tune(encoder, config, head, train, val, fconf, vocab)

    report = evaluate_dataset(model, test)
    logger.info(f"Test micro-F {report.micro_f:.4f} on {len(test)} messages")
    save_bundle(
        model,
        context.output_path(MODEL_DIR),
        metadata={
            "encoder_origin": "random" if origin == "random" else "pretrained",
            "mode": fconf.mode.value,
            "seed": fconf.seed,
        },
    )
    write_json(
        context.output_path("history.json"),
        {**history.model_dump(mode="json"), "summary": history.summary()},
    )
    write_report(
        context.output_path("test_report.json"),
        context.output_path("test_report.csv"),
        report,
        split="test",
    )


def cmd_sweep(context: RunContext, args: argparse.Namespace) -> None:
    """One fine-tuning run per batch size on identical data, seed and initialization."""
    train, val, test, vocab, config, encoder, _, head = _prepare_finetune(context, args)
    batch_sizes = args.batch_sizes or context.config.eval.sweep_batch_sizes
    runs = ModelFactory.create_runs(
        context, batch_sizes, mode=args.mode, epochs=args.epochs, learning_rate=args.lr
    )

    def run_one(fconf: FineTuneConfig) -> Dict[str, Any]:
        model, history = fine_tune(encoder, config, head, train, val, fconf, vocab)
        summary = history.summary()
        return {
            "batch_size": fconf.batch_size,
            "mode": fconf.mode.value,
            "epochs": fconf.epochs,
            "learning_rate": fconf.learning_rate,
            "seed": fconf.seed,
            "val_micro_f1": round(history.epochs[-1].val_micro_f1, 6) if history.epochs else "",
            "val_micro_f1_mean": round(summary["val_micro_f1_mean"], 6),
            "val_micro_f1_std": round(summary["val_micro_f1_std"], 6),
            "test_micro_f1": round(evaluate_dataset(model, test).micro_f, 6),
        }

    workers = min(context.config.eval.workers, len(runs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, runs))
    else:
        rows = [run_one(fconf) for fconf in runs]

    write_csv(context.output_path("sweep.csv"), SWEEP_FIELDS, rows)
    best = max(rows, key=lambda row: row["test_micro_f1"])
    logger.info(f"Best batch size {best['batch_size']}: test micro-F {best['test_micro_f1']}")


def cmd_compare(context: RunContext, args: argparse.Namespace) -> None:
    """Frozen against unfrozen fine-tuning on the same data, paired over seeds and epochs."""
    train, val, test, vocab, config, encoder, _, head = _prepare_finetune(context, args)
    base = _finetune_config(context, args)
    seeds = [
        base.seed if i == 0 else derive_seed(base.seed, i)
        for i in range(context.config.eval.compare_seeds)
    ]

    scores: Dict[str, List[float]] = {mode.value: [] for mode in AdaptMode}
    test_scores: Dict[str, List[float]] = {mode.value: [] for mode in AdaptMode}
    unchanged: List[Optional[bool]] = []
    for seed in seeds:
        for mode in AdaptMode:
            fconf = base.model_copy(update={"mode": mode, "seed": seed})
            model, history = fine_tune(encoder, config, head, train, val, fconf, vocab)
            scores[mode.value].extend(history.val_scores())
            test_scores[mode.value].append(round(evaluate_dataset(model, test).micro_f, 6))
            if mode == AdaptMode.FROZEN:
                unchanged.append(history.encoder_unchanged)

    comparison = compare_modes(scores[AdaptMode.FROZEN.value], scores[AdaptMode.UNFROZEN.value])
    logger.info(
        f"Frozen {comparison.frozen_mean:.4f} vs unfrozen {comparison.unfrozen_mean:.4f} "
        f"(t={comparison.t}, p={comparison.p})"
    )
    write_json(
        context.output_path("comparison.json"),
        {
            **comparison.model_dump(),
            "seeds": seeds,
            "val_micro_f1": scores,
            "test_micro_f1": test_scores,
            "encoder_unchanged": unchanged,
            "reference": REFERENCE_RESULTS["tweet_test_micro_f"],
        },
    )


def _taxonomy(context: RunContext, args: argparse.Namespace) -> BenchmarkTaxonomyMap:
    path = args.taxonomy_map or context.config.paths.taxonomy_map
    if path is None:
        return DEFAULT_TAXONOMY
    return BenchmarkTaxonomyMap.from_json_file(require_path(path, "Taxonomy map"))


def cmd_evaluate(context: RunContext, args: argparse.Namespace) -> None:
    """Score a saved model on the benchmark through the taxonomy map."""
    model_dir = args.model or context.output_path(MODEL_DIR)
    require_path(model_dir, "Model bundle")
    benchmark_path = require_path(
        args.benchmark or context.input_path("benchmark"), "Benchmark file"
    )
    model = load_bundle(model_dir)
    items = read_benchmark(benchmark_path)
    taxonomy = _taxonomy(context, args)

    report = evaluate_benchmark(model, items, taxonomy)
    extra: Dict[str, Any] = {
        "items": len(items),
        "taxonomy": taxonomy.to_json(),
        "reference_benchmark_counts": REFERENCE_BENCHMARK_COUNTS,
    }
    test_path = context.output_path(DATA_DIR, "test.jsonl")
    if os.path.exists(test_path):
        extra["test_split"] = evaluate_dataset(model, read_dataset(test_path)).model_dump()
    write_report(
        context.output_path("report.json"), context.output_path("report.csv"), report, **extra
    )
    logger.info(f"Benchmark micro-F {report.micro_f:.4f} on {len(items)} items")


def cmd_ablate(context: RunContext, args: argparse.Namespace) -> None:
    """Test micro-F against fine-tuning-set size."""
    train, val, test, vocab, config, encoder, _, head = _prepare_finetune(context, args)
    fconf = _finetune_config(context, args)
    eval_config = context.config.eval
    sizes = args.sizes or eval_config.ablation_sizes

    def run_point(subset: Dataset):
        model, _ = fine_tune(encoder, config, head, subset, val, fconf, vocab)
        return evaluate_dataset(model, test)

    setup = AblationSetup(
        train=train,
        run_point=run_point,
        seed=context.stage_seed("ablation"),
        workers=eval_config.workers,
    )
    points = ablation(sizes, setup)
    monotone = is_non_decreasing([p.micro_f for p in points], eval_config.ablation_tolerance)

    svg_path = context.output_path("curve.svg") if eval_config.plot else None
    write_curve(context.output_path("curve.csv"), points, svg_path)
    write_json(
        context.output_path("ablation.json"),
        {
            "points": [p.model_dump() for p in points],
            "monotone": monotone,
            "tolerance": eval_config.ablation_tolerance,
        },
    )
    logger.info(f"Ablation monotone: {str(monotone).lower()}")
    print(
        f"ablation: {len(points)} sizes, monotone {str(monotone).lower()} "
        f"(tolerance {eval_config.ablation_tolerance})",
        file=sys.stderr,
    )


def cmd_report(context: RunContext, args: argparse.Namespace) -> None:
    """Gather the JSON artifacts of the output directory into summary.json."""
    summary: Dict[str, Any] = {}
    for section, parts in SUMMARY_ARTIFACTS.items():
        path = context.output_path(*parts)
        if os.path.exists(path):
            summary[section] = read_json(path)
    sweep_path = context.output_path("sweep.csv")
    if os.path.exists(sweep_path):
        summary["sweep"] = read_csv(sweep_path)
    if not summary:
        raise DataError(f"No artifact found in {context.output_dir}")

    summary["profile"] = context.profile
    summary["root_seed"] = context.config.root_seed
    summary["reference"] = REFERENCE_RESULTS
    write_json(context.output_path("summary.json"), summary)
    logger.info(f"Summary of {len(summary) - 3} artifacts written")


COMMANDS: Dict[str, Callable[[RunContext, argparse.Namespace], None]] = {
    "synth": cmd_synth,
    "prepare": cmd_prepare,
    "vocab": cmd_vocab,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def _add_training_flags(parser: argparse.ArgumentParser, mode: bool = True) -> None:
    if mode:
        parser.add_argument("--mode", choices=[m.value for m in AdaptMode])
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emotion-lab",
        description="Sequential transfer learning for four-class emotion classification",
    )
    parser.add_argument("--config", help="Explicit YAML or JSON run configuration")
    parser.add_argument("--profile", default="desk", help="Profile under config/profiles/")
    parser.add_argument("--output-dir", help="Override paths.output_dir")
    parser.add_argument("--seed", type=int, help="Override the root seed")
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("synth", help="Generate synthetic corpora and the example lexicon")
    subparsers.add_parser("prepare", help="Label, clean and split the raw corpus")
    subparsers.add_parser("vocab", help="Build the vocabulary")

    pretrain = subparsers.add_parser("pretrain", help="Masked-LM pretraining")
    _add_training_flags(pretrain, mode=False)

    for name, help_text in (
        ("finetune", "Fine-tune a classifier"),
        ("sweep", "Fine-tune once per batch size"),
        ("compare", "Frozen against unfrozen fine-tuning with a paired t-test"),
        ("ablate", "Test micro-F against fine-tuning-set size"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        _add_training_flags(sub)
        sub.add_argument("--checkpoint", help="Encoder checkpoint to start from")
        if name == "sweep":
            sub.add_argument("--batch-sizes", type=int, nargs="+")
        if name == "ablate":
            sub.add_argument("--sizes", type=int, nargs="+")

    evaluate = subparsers.add_parser("evaluate", help="Score a model bundle on the benchmark")
    evaluate.add_argument("--model", help="Model bundle directory")
    evaluate.add_argument("--benchmark", help="Benchmark JSON-lines file")
    evaluate.add_argument("--taxonomy-map", help="Benchmark class to emotion classes JSON map")

    subparsers.add_parser("report", help="Gather run artifacts into summary.json")
    return parser


def run(
    args: argparse.Namespace, on_context: Optional[Callable[[RunContext], None]] = None
) -> int:
    """
    Execute the selected command and map failures to exit codes.

    `on_context` is called with the loaded run context before the command runs.
    """
    try:
        context = load_context(args)
        if on_context is not None:
            on_context(context)
        logger.info(f"Running '{args.command}' with profile {context.profile}")
        COMMANDS[args.command](context, args)
    except DataError as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (ValidationError, ConfigError, FileNotFoundError, ValueError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    logger.info(f"'{args.command}' finished")
    return EXIT_OK
