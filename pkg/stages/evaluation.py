"""
Metrics, benchmark taxonomy mapping, paired t-test and fine-tuning-size ablation.

Micro-averaged F is computed from TP/FP/FN pooled over classes. For
single-label predictions over the full label set every error is one FP and one
FN, so micro-F equals accuracy exactly; this module computes both independently.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import stats

from config.enums import BenchmarkClass, EmotionClass
from lib.errors import (
    DegenerateSample,
    EmptyDataset,
    EmptyMatrix,
    LabelOutOfRange,
    LengthMismatch,
    SizeTooLarge,
    UnknownBenchmarkClass,
)
from utils.io import read_jsonl, write_csv, write_json
from utils.plotting import plot_curve_svg
from utils.seeds import derive_seed

from .corpus import Dataset, clean_text

logger = logging.getLogger(__name__)

Label = Union[int, EmotionClass, BenchmarkClass]

# Reference scores of the full-scale system, recorded in reports as context only.
REFERENCE_RESULTS: Dict[str, Dict[str, float]] = {
    "benchmark_micro_f": {"bert_emoint": 0.71, "bert_stimulus": 0.735, "bilstm": 0.50},
    "tweet_test_micro_f": {"frozen": 0.906, "unfrozen": 0.91, "bert": 0.92},
    "best_batch_size": {"batch_size": 100, "micro_f": 0.92},
}

# Class balance of the two public benchmarks (joy / sadness / anger).
REFERENCE_BENCHMARK_COUNTS: Dict[str, Dict[str, int]] = {
    "stimulus": {"joy": 480, "sadness": 540, "anger": 570},
    "emoint": {"joy": 671, "sadness": 642, "anger": 656},
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts, rows = gold, columns = predicted."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_list(self) -> List[List[int]]:
        return [[int(v) for v in row] for row in self.counts]


def _index(label: Label) -> int:
    if isinstance(label, EmotionClass):
        return label.index
    if isinstance(label, BenchmarkClass):
        return list(BenchmarkClass).index(label)
    return int(label)


def confusion(
    preds: Sequence[Label], golds: Sequence[Label], num_classes: int = len(EmotionClass)
) -> ConfusionMatrix:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions for {len(golds)} gold labels")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    if not len(golds):
        return ConfusionMatrix(counts)
    gold_idx = np.array([_index(g) for g in golds], dtype=np.int64)
    pred_idx = np.array([_index(p) for p in preds], dtype=np.int64)
    for name, idx in (("gold", gold_idx), ("predicted", pred_idx)):
        if idx.min() < 0 or idx.max() >= num_classes:
            raise LabelOutOfRange(f"{name} labels must lie in [0, {num_classes})")
    np.add.at(counts, (gold_idx, pred_idx), 1)
    return ConfusionMatrix(counts)


class ClassMetrics(BaseModel):
    label: str
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f_score: float = Field(ge=0.0, le=1.0)
    support: int = Field(ge=0)


class MetricsReport(BaseModel):
    """Per-class precision/recall/F, pooled micro scores and accuracy over n items."""

    per_class: List[ClassMetrics]
    micro_precision: float = Field(ge=0.0, le=1.0)
    micro_recall: float = Field(ge=0.0, le=1.0)
    micro_f: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0)
    n: int = Field(ge=1)

    def class_scores(self) -> Dict[str, float]:
        return {row.label: row.f_score for row in self.per_class}


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def _f_score(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


def _report(
    labels: Sequence[str], tp: np.ndarray, fp: np.ndarray, fn: np.ndarray, n: int
) -> MetricsReport:
    per_class = []
    for i, label in enumerate(labels):
        precision = _ratio(tp[i], tp[i] + fp[i])
        recall = _ratio(tp[i], tp[i] + fn[i])
        per_class.append(
            ClassMetrics(
                label=label,
                precision=precision,
                recall=recall,
                f_score=_f_score(precision, recall),
                support=int(tp[i] + fn[i]),
            )
        )
    pooled_tp, pooled_fp, pooled_fn = int(tp.sum()), int(fp.sum()), int(fn.sum())
    return MetricsReport(
        per_class=per_class,
        micro_precision=_ratio(pooled_tp, pooled_tp + pooled_fp),
        micro_recall=_ratio(pooled_tp, pooled_tp + pooled_fn),
        micro_f=_ratio(2 * pooled_tp, 2 * pooled_tp + pooled_fp + pooled_fn),
        accuracy=_ratio(pooled_tp, n),
        n=n,
    )


def default_labels(num_classes: int) -> List[str]:
    if num_classes == len(EmotionClass):
        return [e.value for e in EmotionClass.ordered()]
    return [str(i) for i in range(num_classes)]


def metrics(matrix: ConfusionMatrix, labels: Optional[Sequence[str]] = None) -> MetricsReport:
    """P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R); 0 when a denominator is 0."""
    if matrix.total == 0:
        raise EmptyMatrix("Cannot compute metrics of an empty confusion matrix")
    labels = list(labels) if labels is not None else default_labels(matrix.num_classes)
    counts = matrix.counts
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    return _report(labels, tp, fp, fn, matrix.total)


class BenchmarkTaxonomyMap(BaseModel):
    """Benchmark class -> emotion classes counted as a correct prediction."""

    accept: Dict[BenchmarkClass, Set[EmotionClass]]

    @model_validator(mode="after")
    def validate_partition(self) -> "BenchmarkTaxonomyMap":
        """Validates that the accept-sets partition the emotion classes."""
        seen: Dict[EmotionClass, BenchmarkClass] = {}
        for gold, accepted in self.accept.items():
            for emotion in accepted:
                if emotion in seen:
                    raise ValueError(
                        f"{emotion.value} is accepted for both "
                        f"{seen[emotion].value} and {gold.value}"
                    )
                seen[emotion] = gold
        missing = [e.value for e in EmotionClass.ordered() if e not in seen]
        if missing:
            raise ValueError(f"Emotion classes without a benchmark class: {missing}")
        return self

    def accepted(self, gold: Union[BenchmarkClass, str]) -> Set[EmotionClass]:
        return self.accept[self.resolve(gold)]

    def resolve(self, gold: Union[BenchmarkClass, str]) -> BenchmarkClass:
        try:
            gold = BenchmarkClass(gold)
        except ValueError as e:
            raise UnknownBenchmarkClass(f"Unknown benchmark class '{gold}'") from e
        if gold not in self.accept:
            raise UnknownBenchmarkClass(f"Benchmark class '{gold.value}' is not mapped")
        return gold

    def benchmark_class_of(self, pred: EmotionClass) -> Optional[BenchmarkClass]:
        for gold, accepted in self.accept.items():
            if pred in accepted:
                return gold
        return None

    def classes(self) -> List[BenchmarkClass]:
        return [c for c in BenchmarkClass if c in self.accept]

    @classmethod
    def from_json_file(cls, path: str) -> "BenchmarkTaxonomyMap":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        try:
            return cls(accept={BenchmarkClass(k): set(v) for k, v in payload.items()})
        except ValueError as e:
            if isinstance(e, UnknownBenchmarkClass):
                raise
            raise UnknownBenchmarkClass(f"Invalid taxonomy map {path}: {e}") from e

    def to_json(self) -> Dict[str, List[str]]:
        return {
            gold.value: sorted(e.value for e in self.accept[gold]) for gold in self.classes()
        }


DEFAULT_TAXONOMY = BenchmarkTaxonomyMap(
    accept={
        BenchmarkClass.JOY: {EmotionClass.HAPPY_ACTIVE, EmotionClass.HAPPY_INACTIVE},
        BenchmarkClass.ANGER: {EmotionClass.UNHAPPY_ACTIVE},
        BenchmarkClass.SADNESS: {EmotionClass.UNHAPPY_INACTIVE},
    }
)


def map_benchmark(
    gold: Union[BenchmarkClass, str],
    pred: EmotionClass,
    taxonomy: BenchmarkTaxonomyMap = DEFAULT_TAXONOMY,
) -> bool:
    """True iff `pred` is in the accept-set of `gold`."""
    return pred in taxonomy.accepted(gold)


class BenchmarkItem(BaseModel):
    text: str
    label: BenchmarkClass


def read_benchmark(path: str) -> List[BenchmarkItem]:
    """JSON-lines {"text", "label"} items; texts are cleaned like training messages."""
    items = []
    for record in read_jsonl(path):
        try:
            label = BenchmarkClass(str(record.get("label", "")).lower())
        except ValueError as e:
            raise UnknownBenchmarkClass(
                f"Unknown benchmark class '{record.get('label')}' in {path}"
            ) from e
        items.append(BenchmarkItem(text=clean_text(str(record.get("text", ""))), label=label))
    return items


class Classifier(Protocol):
    def predict_classes(self, texts: Sequence[str]) -> List[EmotionClass]: ...


def evaluate_benchmark(
    model: Classifier,
    items: Sequence[BenchmarkItem],
    taxonomy: BenchmarkTaxonomyMap = DEFAULT_TAXONOMY,
) -> MetricsReport:
    """
    Metrics over the benchmark classes through the taxonomy map.

    A prediction counts for the benchmark class whose accept-set holds it.
    Predictions in no accept-set are a false negative of the gold class only.
    """
    if not items:
        raise EmptyDataset("Benchmark holds no item")
    classes = taxonomy.classes()
    golds = [taxonomy.resolve(item.label) for item in items]
    preds = model.predict_classes([item.text for item in items])

    # Last column collects predictions outside every accept-set.
    counts = np.zeros((len(classes), len(classes) + 1), dtype=np.int64)
    for gold, pred in zip(golds, preds):
        mapped = taxonomy.benchmark_class_of(pred)
        column = len(classes) if mapped is None else classes.index(mapped)
        counts[classes.index(gold), column] += 1

    square = counts[:, : len(classes)]
    tp = np.diag(square)
    fp = square.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    report = _report([c.value for c in classes], tp, fp, fn, len(items))
    logger.info(
        f"Benchmark: {len(items)} items, micro-F {report.micro_f:.4f}, "
        f"unmapped predictions {int(counts[:, -1].sum())}"
    )
    return report


def report_rows(report: MetricsReport) -> List[Dict[str, object]]:
    """Per-class rows followed by a micro average row."""
    rows: List[Dict[str, object]] = [
        {
            "class": row.label,
            "precision": round(row.precision, 6),
            "recall": round(row.recall, 6),
            "f_score": round(row.f_score, 6),
            "support": row.support,
        }
        for row in report.per_class
    ]
    rows.append(
        {
            "class": "micro average",
            "precision": round(report.micro_precision, 6),
            "recall": round(report.micro_recall, 6),
            "f_score": round(report.micro_f, 6),
            "support": report.n,
        }
    )
    return rows


REPORT_FIELDS = ["class", "precision", "recall", "f_score", "support"]


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Two-tailed paired Student t-test on a - b with n - 1 degrees of freedom."""
    if len(a) != len(b):
        raise LengthMismatch(f"Paired samples differ in length: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise DegenerateSample(f"Paired t-test needs at least 2 pairs, got {len(a)}")
    diffs = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        raise DegenerateSample("Differences have zero variance")
    t = float(diffs.mean()) / (sd / math.sqrt(len(diffs)))
    p = float(2.0 * stats.t.sf(abs(t), len(diffs) - 1))
    return t, min(p, 1.0)


class ModeComparison(BaseModel):
    frozen_mean: float
    frozen_std: float
    unfrozen_mean: float
    unfrozen_std: float
    n: int
    t: Optional[float] = None
    p: Optional[float] = None
    note: str = ""


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    if not array.size:
        return 0.0, 0.0
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), std


def compare_modes(
    frozen_scores: Sequence[float], unfrozen_scores: Sequence[float]
) -> ModeComparison:
    """Paired t-test of unfrozen against frozen scores with mean and std of each."""
    frozen_mean, frozen_std = mean_std(frozen_scores)
    unfrozen_mean, unfrozen_std = mean_std(unfrozen_scores)
    comparison = ModeComparison(
        frozen_mean=frozen_mean,
        frozen_std=frozen_std,
        unfrozen_mean=unfrozen_mean,
        unfrozen_std=unfrozen_std,
        n=min(len(frozen_scores), len(unfrozen_scores)),
    )
    try:
        comparison.t, comparison.p = paired_ttest(unfrozen_scores, frozen_scores)
    except DegenerateSample as e:
        comparison.note = str(e)
        logger.warning(f"t-test skipped: {e}")
    return comparison


def is_non_decreasing(curve: Sequence[float], tolerance: float = 0.0) -> bool:
    """True when no point falls more than `tolerance` below its predecessor."""
    return all(later >= earlier - tolerance for earlier, later in zip(curve, curve[1:]))


class AblationPoint(BaseModel):
    size: int
    micro_f: float
    accuracy: float
    seed: int


@dataclass
class AblationSetup:
    """
    Fixed data and training recipe shared by every ablation point.

    `run_point(train_subset)` fine-tunes on the subset and returns metrics on
    the fixed evaluation set.
    """

    train: Dataset
    run_point: Callable[[Dataset], MetricsReport]
    seed: int
    workers: int = 1


def ablation(train_sizes: Sequence[int], setup: AblationSetup) -> List[AblationPoint]:
    """One metrics point per training-set size, ordered by size."""
    for size in train_sizes:
        if size > len(setup.train):
            raise SizeTooLarge(
                f"Ablation size {size} exceeds the {len(setup.train)} training messages"
            )

    def run(size: int) -> AblationPoint:
        seed = derive_seed(setup.seed, size)
        report = setup.run_point(setup.train.subsample(size, seed))
        logger.info(f"Ablation size {size}: micro-F {report.micro_f:.4f}")
        return AblationPoint(
            size=size, micro_f=report.micro_f, accuracy=report.accuracy, seed=seed
        )

    sizes = sorted(set(train_sizes))
    if setup.workers > 1:
        with ThreadPoolExecutor(max_workers=setup.workers) as pool:
            points = list(pool.map(run, sizes))
    else:
        points = [run(size) for size in sizes]
    return points


def write_report(path_json: str, path_csv: str, report: MetricsReport, **extra: object) -> None:
    payload = {
        "metrics": report.model_dump(),
        "rows": report_rows(report),
        "reference": REFERENCE_RESULTS,
    }
    payload.update(extra)
    write_json(path_json, payload)
    write_csv(path_csv, REPORT_FIELDS, report_rows(report))


def write_curve(
    path_csv: str, points: Sequence[AblationPoint], svg_path: Optional[str] = None
) -> None:
    rows = [{"size": p.size, "micro_f": p.micro_f} for p in points]
    write_csv(path_csv, ["size", "micro_f"], rows)
    if svg_path:
        plot_curve_svg(
            svg_path,
            [p.size for p in points],
            [p.micro_f for p in points],
            xlabel="Fine-tuning set size",
            ylabel="Micro-F",
            log_x=True,
        )

