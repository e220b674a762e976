"""Stratified cross-validation, confusion matrices, weighted F1, and
adjacent-level error analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index per example; folds partition [0, N)."""

    fold_of: np.ndarray
    k: int


def stratified_kfold(labels, k: int, seed: int = 0) -> FoldAssignment:
    """Shuffle each class with a seeded RNG and deal it round-robin into folds.

    Per-class fold counts differ by at most 1; classes smaller than k land in
    one fold each until exhausted. A rotating start offset keeps overall fold
    sizes balanced when many small classes are present.
    """
    labels = list(labels)
    n = len(labels)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if k > n:
        raise ConfigError(f"k={k} exceeds the {n} available examples")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    fold_of = np.empty(n, dtype=np.int64)
    by_class: dict = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)
    offset = 0
    for label in sorted(by_class, key=str):
        members = np.array(by_class[label])
        rng.shuffle(members)
        for j, idx in enumerate(members):
            fold_of[idx] = (offset + j) % k
        offset = (offset + len(members)) % k
    return FoldAssignment(fold_of, k)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix: rows are true labels, columns predicted labels."""

    label_order: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def confusion(y_true, y_pred, label_order) -> ConfusionMatrix:
    label_order = tuple(label_order)
    index = {label: i for i, label in enumerate(label_order)}
    counts = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise ConfigError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    for t, p in zip(y_true, y_pred):
        if t not in index or p not in index:
            unknown = t if t not in index else p
            raise ConfigError(f"label {unknown!r} not in label_order {label_order!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(label_order, counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def per_class_metrics(cm: ConfusionMatrix) -> dict:
    """Precision/recall/F1/support per label; 0/0 ratios are defined as 0."""
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    out = {}
    for i, label in enumerate(cm.label_order):
        precision = tp[i] / col[i] if col[i] > 0 else 0.0
        recall = tp[i] / row[i] if row[i] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[label] = ClassMetrics(float(precision), float(recall), float(f1), int(row[i]))
    return out


def weighted_f1(cm: ConfusionMatrix) -> float:
    """Support-weighted mean of per-class F1; zero-support classes are excluded."""
    if cm.total == 0:
        raise ConfigError("cannot score an empty confusion matrix")
    metrics = per_class_metrics(cm)
    supports = cm.supports()
    total = supports.sum()
    return float(
        sum(metrics[label].f1 * supports[i] for i, label in enumerate(cm.label_order) if supports[i] > 0)
        / total
    )


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean F1 over classes with support (supplementary metric)."""
    if cm.total == 0:
        raise ConfigError("cannot score an empty confusion matrix")
    metrics = per_class_metrics(cm)
    supports = cm.supports()
    present = [metrics[label].f1 for i, label in enumerate(cm.label_order) if supports[i] > 0]
    return float(np.mean(present))


def adjacency_share(cm: ConfusionMatrix) -> tuple[float, bool]:
    """Fraction of misclassifications exactly one rank away from the truth.

    Ranks follow label_order positions. With no errors at all the share is
    undefined and reported as (1.0, False).
    """
    counts = cm.counts
    n = len(cm.label_order)
    errors = 0
    adjacent = 0
    for t in range(n):
        for p in range(n):
            if t == p:
                continue
            errors += counts[t, p]
            if abs(t - p) == 1:
                adjacent += counts[t, p]
    if errors == 0:
        return 1.0, False
    return float(adjacent / errors), True


@dataclass
class EvaluationReport:
    weighted_f1: float
    macro_f1: float
    per_class: dict
    matrix: ConfusionMatrix
    adjacency: float
    adjacency_defined: bool
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def evaluate_predictions(y_true, y_pred, label_order, provenance=None, extras=None) -> EvaluationReport:
    cm = confusion(y_true, y_pred, label_order)
    adjacency, defined = adjacency_share(cm)
    return EvaluationReport(
        weighted_f1=weighted_f1(cm),
        macro_f1=macro_f1(cm),
        per_class=per_class_metrics(cm),
        matrix=cm,
        adjacency=adjacency,
        adjacency_defined=defined,
        provenance=dict(provenance or {}),
        extras=dict(extras or {}),
    )


def cross_validate(items, labels, pipeline, k: int = 10, seed: int = 0, label_order=None, fold_hook=None) -> EvaluationReport:
    """Pooled out-of-fold evaluation.

    The pipeline is refit inside every training fold (pipeline.fit receives
    only training items, so feature spaces and vocabularies cannot leak), and
    all out-of-fold predictions form a single confusion matrix.
    """
    items = list(items)
    labels = list(labels)
    if label_order is None:
        label_order = tuple(sorted(set(labels)))
    folds = stratified_kfold(labels, k, seed)
    predictions: list = [None] * len(items)
    for fold in range(k):
        test_idx = np.flatnonzero(folds.fold_of == fold)
        train_idx = np.flatnonzero(folds.fold_of != fold)
        if len(test_idx) == 0:
            continue
        fold_seed = int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])
        fitted = pipeline.fit([items[i] for i in train_idx], [labels[i] for i in train_idx], fold_seed)
        predicted = fitted.predict([items[i] for i in test_idx])
        for i, pred in zip(test_idx, predicted):
            predictions[i] = pred
        if fold_hook is not None:
            fold_hook(fold, fitted, test_idx)
    return evaluate_predictions(labels, predictions, label_order, provenance={"seed": seed, "folds": k})


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "weighted_f1": report.weighted_f1,
        "macro_f1": report.macro_f1,
        "label_order": [str(l) for l in report.matrix.label_order],
        "per_class": {
            str(label): {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for label, m in report.per_class.items()
        },
        "confusion": report.matrix.counts.tolist(),
        "adjacency_share": report.adjacency,
        "adjacency_defined": report.adjacency_defined,
        "provenance": report.provenance,
        "extras": report.extras,
    }


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def confusion_to_tsv(cm: ConfusionMatrix) -> str:
    header = "true\\pred\t" + "\t".join(str(l) for l in cm.label_order)
    rows = [
        str(label) + "\t" + "\t".join(str(int(c)) for c in cm.counts[i])
        for i, label in enumerate(cm.label_order)
    ]
    return "\n".join([header] + rows) + "\n"


def confusion_from_tsv(text: str) -> ConfusionMatrix:
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines or not lines[0].startswith("true\\pred\t"):
        raise ConfigError("not a confusion matrix TSV (missing 'true\\pred' header)")
    label_order = tuple(lines[0].split("\t")[1:])
    counts = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    if len(lines[1:]) != len(label_order):
        raise ConfigError(f"expected {len(label_order)} rows, got {len(lines) - 1}")
    for i, line in enumerate(lines[1:]):
        cols = line.split("\t")
        if cols[0] != label_order[i] or len(cols) != len(label_order) + 1:
            raise ConfigError(f"bad confusion row {i + 1}: {line!r}")
        counts[i] = [int(c) for c in cols[1:]]
    return ConfusionMatrix(label_order, counts)
