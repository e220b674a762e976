"""Multinomial softmax regression trained by full-batch gradient descent.

The objective is mean categorical cross-entropy plus an L2 penalty on the
weights (bias unpenalized). Steps use backtracking line search, so training
is deterministic and the loss never increases across accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def encode_labels(y, label_order=None):
    """Map labels to indices; label_order defaults to sorted distinct labels."""
    if label_order is None:
        label_order = tuple(sorted(set(y)))
    else:
        label_order = tuple(label_order)
    index = {label: i for i, label in enumerate(label_order)}
    try:
        encoded = np.array([index[label] for label in y], dtype=np.int64)
    except KeyError as err:
        raise TrainingError(f"label {err.args[0]!r} not in label_order {label_order!r}") from None
    return encoded, label_order


def _loss(weights, bias, X, y_idx, l2):
    logits = X @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    nll = log_norm - shifted[np.arange(len(y_idx)), y_idx]
    return nll.mean() + 0.5 * l2 * float((weights * weights).sum())


def loss_and_grads(weights, bias, X, y_idx, l2):
    """Objective value with analytic gradients; shared by the trainer and tests."""
    n = X.shape[0]
    probs = softmax(X @ weights.T + bias)
    nll = -np.log(np.clip(probs[np.arange(n), y_idx], 1e-300, None)).mean()
    loss = nll + 0.5 * l2 * float((weights * weights).sum())
    diff = probs
    diff[np.arange(n), y_idx] -= 1.0
    diff /= n
    grad_w = diff.T @ X + l2 * weights
    grad_b = diff.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass
class SoftmaxLinearModel:
    weights: np.ndarray  # C x D
    bias: np.ndarray  # C
    label_order: tuple
    l2: float

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_logits(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} features, got {X.shape[1]}")
        return X @ self.weights.T + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_logits(X))

    def predict(self, X: np.ndarray) -> list:
        # np.argmax takes the first maximum, i.e. ties break toward the
        # earlier (lower) entry in label_order
        idx = np.argmax(self.predict_proba(X), axis=1)
        return [self.label_order[i] for i in idx]


def train_softmax(
    X,
    y,
    label_order=None,
    l2: float = 1e-3,
    max_iter: int = 200,
    tol: float = 1e-5,
) -> SoftmaxLinearModel:
    """Fit by gradient descent with Armijo backtracking.

    Stops when the gradient infinity-norm drops below tol or after max_iter
    accepted steps. Zero initialization makes training fully deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise TrainingError(f"X must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise TrainingError("X contains non-finite values")
    y_idx, label_order = encode_labels(y, label_order)
    if len(y_idx) != X.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {len(y_idx)} labels")
    if len(set(y_idx.tolist())) < 2:
        raise TrainingError("training requires at least 2 classes present")

    n_classes, dim = len(label_order), X.shape[1]
    weights = np.zeros((n_classes, dim))
    bias = np.zeros(n_classes)
    step = 1.0
    for _ in range(max_iter):
        loss, grad_w, grad_b = loss_and_grads(weights, bias, X, y_idx, l2)
        grad_inf = max(np.abs(grad_w).max(), np.abs(grad_b).max())
        if grad_inf < tol:
            break
        grad_sq = float((grad_w * grad_w).sum() + (grad_b * grad_b).sum())
        step = min(step * 2.0, 1e6)
        while True:
            new_w = weights - step * grad_w
            new_b = bias - step * grad_b
            if _loss(new_w, new_b, X, y_idx, l2) <= loss - 1e-4 * step * grad_sq:
                break
            step *= 0.5
            if step < 1e-12:
                break
        if step < 1e-12:
            break
        weights, bias = new_w, new_b
    return SoftmaxLinearModel(weights, bias, label_order, l2)
