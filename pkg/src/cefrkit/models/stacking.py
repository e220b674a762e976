"""Stacking: a base n-gram classifier's out-of-fold class probabilities are
concatenated with dense domain features to train a final classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from ..evaluation import stratified_kfold
from .forest import train_random_forest
from .softmax import encode_labels, train_softmax


@dataclass(frozen=True)
class ModelSpec:
    """Choice of a matrix-input classifier family with its hyperparameters."""

    kind: str  # "softmax" | "forest"
    params: tuple = ()

    def options(self) -> dict:
        return dict(self.params)


def fit_model(spec: ModelSpec, X, y, label_order, seed: int = 0, threads: int = 1):
    """Fit the spec'd classifier; threads affects forest wall-clock only."""
    opts = spec.options()
    if spec.kind == "softmax":
        return train_softmax(X, y, label_order=label_order, **opts)
    if spec.kind == "forest":
        opts.setdefault("seed", seed)
        return train_random_forest(X, y, label_order=label_order, threads=threads, **opts)
    raise TrainingError(f"unknown model kind {spec.kind!r}")


def _fold_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def cross_val_probas(X, y, spec: ModelSpec, k: int = 10, seed: int = 0, label_order=None, folds=None):
    """N x C matrix where row i comes from a model whose training fold excluded i."""
    X = np.asarray(X, dtype=np.float64)
    _, label_order = encode_labels(y, label_order)
    if folds is None:
        folds = stratified_kfold(y, k, seed)
    fold_of = folds.fold_of
    out = np.zeros((X.shape[0], len(label_order)))
    y = list(y)
    for fold in range(folds.k):
        test = np.flatnonzero(fold_of == fold)
        train = np.flatnonzero(fold_of != fold)
        if len(test) == 0:
            continue
        model = fit_model(
            spec, X[train], [y[i] for i in train], label_order, seed=_fold_seed(seed, fold)
        )
        out[test] = model.predict_proba(X[test])
    return out


@dataclass
class StackedModel:
    """Base classifier on n-gram counts, final classifier on [probas, domain]."""

    base_model: object
    final_model: object
    label_order: tuple
    k: int

    def meta_features(self, X_base, X_domain) -> np.ndarray:
        probas = self.base_model.predict_proba(np.asarray(X_base, dtype=np.float64))
        return np.hstack([probas, np.atleast_2d(np.asarray(X_domain, dtype=np.float64))])

    def predict_proba(self, X_base, X_domain) -> np.ndarray:
        return self.final_model.predict_proba(self.meta_features(X_base, X_domain))

    def predict(self, X_base, X_domain) -> list:
        return self.final_model.predict(self.meta_features(X_base, X_domain))


def train_stacked(
    X_base,
    X_domain,
    y,
    base_spec: ModelSpec,
    final_spec: ModelSpec,
    k: int = 10,
    seed: int = 0,
    label_order=None,
    folds=None,
) -> StackedModel:
    """Fit the final classifier on out-of-fold base probabilities plus domain
    features; the base model is refit on all rows for inference."""
    X_base = np.asarray(X_base, dtype=np.float64)
    X_domain = np.atleast_2d(np.asarray(X_domain, dtype=np.float64))
    if X_base.shape[0] != X_domain.shape[0]:
        raise TrainingError(
            f"row mismatch: {X_base.shape[0]} n-gram rows vs {X_domain.shape[0]} domain rows"
        )
    _, label_order = encode_labels(y, label_order)
    oof = cross_val_probas(X_base, y, base_spec, k=k, seed=seed, label_order=label_order, folds=folds)
    meta = np.hstack([oof, X_domain])
    final = fit_model(final_spec, meta, y, label_order, seed=_fold_seed(seed, 10_001))
    base = fit_model(base_spec, X_base, y, label_order, seed=_fold_seed(seed, 10_002))
    return StackedModel(base, final, label_order, k)
