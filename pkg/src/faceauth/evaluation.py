"""Dataset splitting, cross-validation, metrics, and the bias A/B report.

Splits and folds are seeded and deterministic; every partition property
(disjoint, covering, per-class balance) is part of the contract here,
not an implementation detail.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from faceauth import classifier
from faceauth.classifier import TrainConfig
from faceauth.datasets import LabeledDataset
from faceauth.errors import FaceAuthError

METRIC_COLUMNS = ("Precision", "Accuracy", "Recall", "F1 Score")


class EvaluationError(FaceAuthError):
    pass


class ClassTooSmall(EvaluationError):
    pass


class LengthMismatch(EvaluationError):
    pass


class EmptyInput(EvaluationError):
    pass


class EmptyRow(EvaluationError):
    pass


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.30
    folds: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")


def _per_class_indices(data: LabeledDataset) -> dict[str, np.ndarray]:
    label_arr = np.array(data.labels)
    return {cls: np.flatnonzero(label_arr == cls) for cls in data.classes}


def allocate_test_count(class_size: int, test_fraction: float) -> int:
    """Per-class test allocation: round half up, floor of one sample."""
    return max(1, int(math.floor(class_size * test_fraction + 0.5)))


def stratified_split(
    data: LabeledDataset, cfg: SplitConfig = SplitConfig()
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded per-class split into (train, test).

    Each class contributes round-half-up(count * test_fraction), at
    least 1, samples to the test side. Train and test are disjoint and
    together cover the dataset.

    Raises:
        ClassTooSmall: a class has fewer than two samples.
    """
    rng = np.random.default_rng(cfg.seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls, indices in _per_class_indices(data).items():
        if indices.size < 2:
            raise ClassTooSmall(f"class {cls!r} has {indices.size} sample(s), needs >= 2")
        shuffled = rng.permutation(indices)
        n_test = allocate_test_count(indices.size, cfg.test_fraction)
        test_idx.extend(shuffled[:n_test].tolist())
        train_idx.extend(shuffled[n_test:].tolist())
    return data.subset(sorted(train_idx)), data.subset(sorted(test_idx))


def stratified_kfold(
    data: LabeledDataset, cfg: SplitConfig = SplitConfig()
) -> list[tuple[LabeledDataset, LabeledDataset]]:
    """Seeded stratified k-fold partition.

    Every sample lands in exactly one validation part, and per-class
    validation counts differ by at most one across folds.

    Raises:
        ClassTooSmall: a class has fewer samples than folds.
    """
    rng = np.random.default_rng(cfg.seed)
    fold_val: list[list[int]] = [[] for _ in range(cfg.folds)]
    for cls, indices in _per_class_indices(data).items():
        if indices.size < cfg.folds:
            raise ClassTooSmall(
                f"class {cls!r} has {indices.size} sample(s), needs >= {cfg.folds}"
            )
        shuffled = rng.permutation(indices)
        for f in range(cfg.folds):
            fold_val[f].extend(shuffled[f::cfg.folds].tolist())
    out = []
    all_idx = set(range(len(data)))
    for val in fold_val:
        train = sorted(all_idx.difference(val))
        out.append((data.subset(train), data.subset(sorted(val))))
    return out


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """Classification metrics plus the raw confusion matrix.

    confusion[i, j] counts samples of true class i predicted as class j;
    rows and columns both follow ``classes`` order. Macro averages are
    unweighted means over classes, with zero-denominator cells scored 0.
    """

    classes: tuple[str, ...]
    confusion: np.ndarray  # (k, k) int64
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    per_class_f1: np.ndarray

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                cls: {
                    "precision": float(self.per_class_precision[i]),
                    "recall": float(self.per_class_recall[i]),
                    "f1": float(self.per_class_f1[i]),
                }
                for i, cls in enumerate(self.classes)
            },
        }

    def to_text(self) -> str:
        lines = [
            f"accuracy        {self.accuracy:.4f}",
            f"macro precision {self.macro_precision:.4f}",
            f"macro recall    {self.macro_recall:.4f}",
            f"macro f1        {self.macro_f1:.4f}",
            "",
            f"{'class':<20} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}",
        ]
        support = self.confusion.sum(axis=1)
        for i, cls in enumerate(self.classes):
            lines.append(
                f"{cls:<20} {self.per_class_precision[i]:>9.4f} "
                f"{self.per_class_recall[i]:>9.4f} {self.per_class_f1[i]:>9.4f} "
                f"{int(support[i]):>9}"
            )
        return "\n".join(lines) + "\n"


def compute_metrics(
    true_labels: Sequence[str], predicted_labels: Sequence[str]
) -> MetricsReport:
    """Accuracy, macro precision/recall/F1, and the confusion matrix.

    Classes are the sorted union of true and predicted labels.

    Raises:
        LengthMismatch, EmptyInput
    """
    true_labels = [str(l) for l in true_labels]
    predicted_labels = [str(l) for l in predicted_labels]
    if len(true_labels) != len(predicted_labels):
        raise LengthMismatch(
            f"{len(true_labels)} true labels vs {len(predicted_labels)} predicted"
        )
    if not true_labels:
        raise EmptyInput("no labels to score")
    classes = tuple(sorted(set(true_labels) | set(predicted_labels)))
    index = {cls: i for i, cls in enumerate(classes)}
    k = len(classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        confusion[index[t], index[p]] += 1

    tp = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, col, out=np.zeros(k), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros(k), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(k), where=pr > 0)
    return MetricsReport(
        classes=classes,
        confusion=confusion,
        accuracy=float(tp.sum() / confusion.sum()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        per_class_precision=precision,
        per_class_recall=recall,
        per_class_f1=f1,
    )


def normalize_confusion(confusion: np.ndarray) -> np.ndarray:
    """Row-normalize a confusion matrix so each row sums to 1.

    Raises:
        EmptyRow: a row sums to zero.
    """
    counts = np.asarray(confusion, dtype=np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    if np.any(sums == 0.0):
        bad = np.flatnonzero(sums.reshape(-1) == 0.0)
        raise EmptyRow(f"rows {bad.tolist()} sum to zero")
    return counts / sums


def confusion_to_csv(classes: Sequence[str], matrix: np.ndarray) -> str:
    """CSV text: header row = predicted labels, first column = true labels."""
    matrix = np.asarray(matrix)
    buf = io.StringIO()
    buf.write("true\\predicted," + ",".join(classes) + "\n")
    for i, cls in enumerate(classes):
        cells = []
        for v in matrix[i]:
            cells.append(str(int(v)) if float(v).is_integer() else repr(float(v)))
        buf.write(f"{cls}," + ",".join(cells) + "\n")
    return buf.getvalue()


@dataclass(frozen=True)
class CrossValidationResult:
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float

    def to_dict(self) -> dict:
        return {
            "folds": len(self.fold_accuracies),
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
        }


def cross_validate(
    data: LabeledDataset,
    cfg: SplitConfig = SplitConfig(),
    train_cfg: TrainConfig = TrainConfig(),
) -> CrossValidationResult:
    """Train a fresh classifier per fold; report per-fold validation
    accuracy and the unweighted mean."""
    accuracies = []
    for train_part, val_part in stratified_kfold(data, cfg):
        model = classifier.train(train_part.embeddings, list(train_part.labels), train_cfg)
        predicted = classifier.predict_many(model, val_part.embeddings)
        correct = sum(p == t for p, t in zip(predicted, val_part.labels))
        accuracies.append(correct / len(val_part))
    return CrossValidationResult(
        fold_accuracies=tuple(accuracies),
        mean_accuracy=float(np.mean(accuracies)),
    )


@dataclass(frozen=True, eq=False)
class BiasReport:
    """Paired evaluation of two datasets under the identical procedure."""

    name_a: str
    name_b: str
    report_a: MetricsReport
    report_b: MetricsReport
    deltas: dict[str, float]  # metric -> a minus b
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        def metric_row(report: MetricsReport) -> dict[str, float]:
            return {
                "precision": report.macro_precision,
                "accuracy": report.accuracy,
                "recall": report.macro_recall,
                "f1_score": report.macro_f1,
            }

        return {
            "columns": list(METRIC_COLUMNS),
            "datasets": {
                self.name_a: metric_row(self.report_a),
                self.name_b: metric_row(self.report_b),
            },
            "deltas": dict(self.deltas),
            "warnings": list(self.warnings),
        }

    def to_text(self) -> str:
        header = f"{'Dataset':<16}" + "".join(f"{c:>12}" for c in METRIC_COLUMNS)
        rows = [header]

        def row(name: str, report: MetricsReport) -> str:
            values = (
                report.macro_precision,
                report.accuracy,
                report.macro_recall,
                report.macro_f1,
            )
            return f"{name:<16}" + "".join(f"{v:>12.4f}" for v in values)

        rows.append(row(self.name_a, self.report_a))
        rows.append(row(self.name_b, self.report_b))
        delta_vals = (
            self.deltas["precision"],
            self.deltas["accuracy"],
            self.deltas["recall"],
            self.deltas["f1_score"],
        )
        rows.append(f"{'delta':<16}" + "".join(f"{v:>+12.4f}" for v in delta_vals))
        for warning in self.warnings:
            rows.append(f"warning: {warning}")
        return "\n".join(rows) + "\n"


def _split_train_test_metrics(
    data: LabeledDataset, cfg: SplitConfig, train_cfg: TrainConfig
) -> MetricsReport:
    train_part, test_part = stratified_split(data, cfg)
    model = classifier.train(train_part.embeddings, list(train_part.labels), train_cfg)
    predicted = classifier.predict_many(model, test_part.embeddings)
    return compute_metrics(list(test_part.labels), predicted)


def bias_report(
    dataset_a: LabeledDataset,
    dataset_b: LabeledDataset,
    cfg: SplitConfig = SplitConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    name_a: str = "dataset_a",
    name_b: str = "dataset_b",
) -> BiasReport:
    """Run the identical split -> train -> test -> metrics procedure on
    both datasets (same seed) and report both plus per-metric deltas
    (A minus B). Differing sizes are flagged as a warning, not an error."""
    warnings = []
    if len(dataset_a) != len(dataset_b):
        warnings.append(f"dataset sizes differ: {len(dataset_a)} vs {len(dataset_b)}")
    if len(dataset_a.classes) != len(dataset_b.classes):
        warnings.append(
            f"class counts differ: {len(dataset_a.classes)} vs {len(dataset_b.classes)}"
        )
    report_a = _split_train_test_metrics(dataset_a, cfg, train_cfg)
    report_b = _split_train_test_metrics(dataset_b, cfg, train_cfg)
    deltas = {
        "precision": report_a.macro_precision - report_b.macro_precision,
        "accuracy": report_a.accuracy - report_b.accuracy,
        "recall": report_a.macro_recall - report_b.macro_recall,
        "f1_score": report_a.macro_f1 - report_b.macro_f1,
    }
    return BiasReport(
        name_a=name_a,
        name_b=name_b,
        report_a=report_a,
        report_b=report_b,
        deltas=deltas,
        warnings=tuple(warnings),
    )
