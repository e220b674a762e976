"""Task-trained word/character embeddings under a softmax head, plus the
multitask variant that predicts proficiency and language together.

A document's representation is the mean of the embedding rows of its tokens
(or characters), which equals its normalized count vector times the embedding
matrix; training therefore runs on per-document bag-of-token vectors. Models
are trained with categorical cross-entropy and Adadelta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections import Counter

import numpy as np

from ..errors import TrainingError
from .adadelta import AdadeltaState, adadelta_step
from .softmax import encode_labels, softmax

MODES = ("word", "char", "word+char")
UNK = 0  # reserved row in every vocabulary


@dataclass
class NeuralHyper:
    """Training knobs for the embedding models (the defaults are desk-scale)."""

    d_word: int = 64
    d_char: int = 16
    epochs: int = 100
    batch_size: int = 32
    rho: float = 0.95
    eps: float = 1e-6
    min_token_count: int = 2
    lowercase: bool = True
    init_scale: float = 0.1


def word_tokens(doc, lowercase: bool = True) -> list[str]:
    return [t.form.lower() if lowercase else t.form for t in doc.tokens()]


def char_tokens(doc, lowercase: bool = True) -> list[str]:
    chars: list[str] = []
    for form in word_tokens(doc, lowercase):
        chars.extend(form)
    return chars


def build_vocab(docs, kind: str, lowercase: bool = True, min_count: int = 2) -> dict:
    """Token-to-row map with row 0 reserved for unknowns; rare tokens excluded."""
    counts: Counter = Counter()
    tokenize = word_tokens if kind == "word" else char_tokens
    for doc in docs:
        counts.update(tokenize(doc, lowercase))
    kept = sorted(tok for tok, c in counts.items() if c >= min_count)
    return {tok: i + 1 for i, tok in enumerate(kept)}


def bow_matrix(docs, vocab: dict, kind: str, lowercase: bool = True) -> np.ndarray:
    """Normalized token-count rows over (UNK + vocab); empty docs become pure UNK."""
    out = np.zeros((len(docs), len(vocab) + 1))
    tokenize = word_tokens if kind == "word" else char_tokens
    for row, doc in enumerate(docs):
        toks = tokenize(doc, lowercase)
        if not toks:
            out[row, UNK] = 1.0
            continue
        for tok in toks:
            out[row, vocab.get(tok, UNK)] += 1.0
        out[row] /= len(toks)
    return out


def _pooled(params: dict, bows: dict, mode: str) -> np.ndarray:
    parts = []
    if mode in ("word", "word+char"):
        parts.append(bows["word"] @ params["emb_word"])
    if mode in ("char", "word+char"):
        parts.append(bows["char"] @ params["emb_char"])
    return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)


def _head_loss_grads(pooled, head_w, head_b, y_idx):
    """Mean cross-entropy of one softmax head; returns dpooled for the encoder."""
    n = pooled.shape[0]
    probs = softmax(pooled @ head_w.T + head_b)
    loss = -np.log(np.clip(probs[np.arange(n), y_idx], 1e-300, None)).mean()
    diff = probs
    diff[np.arange(n), y_idx] -= 1.0
    diff /= n
    grad_w = diff.T @ pooled
    grad_b = diff.sum(axis=0)
    dpooled = diff @ head_w
    return loss, grad_w, grad_b, dpooled


def _scatter_encoder_grads(grads: dict, dpooled: np.ndarray, params: dict, bows: dict, mode: str):
    if mode == "word":
        grads["emb_word"] = bows["word"].T @ dpooled
    elif mode == "char":
        grads["emb_char"] = bows["char"].T @ dpooled
    else:
        d_word = params["emb_word"].shape[1]
        grads["emb_word"] = bows["word"].T @ dpooled[:, :d_word]
        grads["emb_char"] = bows["char"].T @ dpooled[:, d_word:]


def loss_and_grads(params: dict, bows: dict, y_idx: np.ndarray, mode: str):
    """Single-head objective and gradients (used by the trainer and gradient checks)."""
    pooled = _pooled(params, bows, mode)
    loss, grad_w, grad_b, dpooled = _head_loss_grads(pooled, params["head_w"], params["head_b"], y_idx)
    grads = {"head_w": grad_w, "head_b": grad_b}
    _scatter_encoder_grads(grads, dpooled, params, bows, mode)
    return loss, grads


def multitask_loss_and_grads(params: dict, bows: dict, y_cefr: np.ndarray, y_lang: np.ndarray):
    """Equally weighted sum of the CEFR and language-identification head losses."""
    pooled = _pooled(params, bows, "word+char")
    loss_c, gw_c, gb_c, dp_c = _head_loss_grads(pooled, params["cefr_w"], params["cefr_b"], y_cefr)
    loss_l, gw_l, gb_l, dp_l = _head_loss_grads(pooled, params["lang_w"], params["lang_b"], y_lang)
    grads = {"cefr_w": gw_c, "cefr_b": gb_c, "lang_w": gw_l, "lang_b": gb_l}
    _scatter_encoder_grads(grads, dp_c + dp_l, params, bows, "word+char")
    return loss_c + loss_l, grads


def _run_adadelta(params, batches_fn, epochs, batch_size, n_docs, rho, eps, rng):
    state = AdadeltaState(rho=rho, eps=eps)
    for _ in range(epochs):
        perm = rng.permutation(n_docs)
        for start in range(0, n_docs, batch_size):
            rows = perm[start : start + batch_size]
            _, grads = batches_fn(rows)
            adadelta_step(state, params, grads)


@dataclass
class EmbeddingSoftmaxModel:
    """Mean-pooled embeddings feeding a softmax layer over CEFR labels."""

    mode: str
    word_vocab: dict
    char_vocab: dict
    params: dict
    label_order: tuple
    lowercase: bool
    initial_loss: float = field(default=float("nan"), compare=False)
    final_loss: float = field(default=float("nan"), compare=False)

    def _bows(self, docs) -> dict:
        bows = {}
        if self.mode in ("word", "word+char"):
            bows["word"] = bow_matrix(docs, self.word_vocab, "word", self.lowercase)
        if self.mode in ("char", "word+char"):
            bows["char"] = bow_matrix(docs, self.char_vocab, "char", self.lowercase)
        return bows

    def predict_proba(self, docs) -> np.ndarray:
        pooled = _pooled(self.params, self._bows(docs), self.mode)
        return softmax(pooled @ self.params["head_w"].T + self.params["head_b"])

    def predict(self, docs) -> list:
        idx = np.argmax(self.predict_proba(docs), axis=1)
        return [self.label_order[i] for i in idx]

    def loss(self, docs, y) -> float:
        y_idx, _ = encode_labels(y, self.label_order)
        value, _ = loss_and_grads(self.params, self._bows(docs), y_idx, self.mode)
        return value


def initialize_embedding_model(docs, label_order, mode, hyper: NeuralHyper, seed: int):
    """Vocabulary from the given docs only; seeded embeddings, zeroed head."""
    if mode not in MODES:
        raise TrainingError(f"unknown embedding mode {mode!r}, expected one of {MODES}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    word_vocab = build_vocab(docs, "word", hyper.lowercase, hyper.min_token_count) if mode != "char" else {}
    char_vocab = build_vocab(docs, "char", hyper.lowercase, hyper.min_token_count) if mode != "word" else {}
    params: dict = {}
    pooled_dim = 0
    if mode in ("word", "word+char"):
        params["emb_word"] = rng.normal(0.0, hyper.init_scale, size=(len(word_vocab) + 1, hyper.d_word))
        pooled_dim += hyper.d_word
    if mode in ("char", "word+char"):
        params["emb_char"] = rng.normal(0.0, hyper.init_scale, size=(len(char_vocab) + 1, hyper.d_char))
        pooled_dim += hyper.d_char
    params["head_w"] = np.zeros((len(label_order), pooled_dim))
    params["head_b"] = np.zeros(len(label_order))
    return EmbeddingSoftmaxModel(mode, word_vocab, char_vocab, params, tuple(label_order), hyper.lowercase), rng


def train_embedding_softmax(
    docs,
    labels,
    mode: str = "word",
    hyper: NeuralHyper | None = None,
    label_order=None,
    seed: int = 0,
) -> EmbeddingSoftmaxModel:
    """Mini-batch Adadelta on mean-pooled embeddings with a softmax head."""
    hyper = hyper or NeuralHyper()
    y_idx, label_order = encode_labels(labels, label_order)
    if len(set(y_idx.tolist())) < 2:
        raise TrainingError("training requires at least 2 classes present")
    model, rng = initialize_embedding_model(docs, label_order, mode, hyper, seed)
    bows = model._bows(docs)

    model.initial_loss, _ = loss_and_grads(model.params, bows, y_idx, mode)

    def batch(rows):
        sub = {k: v[rows] for k, v in bows.items()}
        return loss_and_grads(model.params, sub, y_idx[rows], mode)

    _run_adadelta(model.params, batch, hyper.epochs, hyper.batch_size, len(docs), hyper.rho, hyper.eps, rng)
    model.final_loss, _ = loss_and_grads(model.params, bows, y_idx, mode)
    return model


@dataclass
class MultitaskModel:
    """Shared word+char encoder with separate CEFR and language softmax heads."""

    word_vocab: dict
    char_vocab: dict
    params: dict
    cefr_order: tuple
    lang_order: tuple
    lowercase: bool
    initial_loss: float = field(default=float("nan"), compare=False)
    final_loss: float = field(default=float("nan"), compare=False)

    def _bows(self, docs) -> dict:
        return {
            "word": bow_matrix(docs, self.word_vocab, "word", self.lowercase),
            "char": bow_matrix(docs, self.char_vocab, "char", self.lowercase),
        }

    def _pooled(self, docs) -> np.ndarray:
        return _pooled(self.params, self._bows(docs), "word+char")

    def predict_proba(self, docs):
        pooled = self._pooled(docs)
        p_cefr = softmax(pooled @ self.params["cefr_w"].T + self.params["cefr_b"])
        p_lang = softmax(pooled @ self.params["lang_w"].T + self.params["lang_b"])
        return p_cefr, p_lang

    def predict(self, docs):
        p_cefr, p_lang = self.predict_proba(docs)
        cefr = [self.cefr_order[i] for i in np.argmax(p_cefr, axis=1)]
        lang = [self.lang_order[i] for i in np.argmax(p_lang, axis=1)]
        return cefr, lang

    def loss(self, docs, cefr_labels, lang_labels) -> float:
        y_c, _ = encode_labels(cefr_labels, self.cefr_order)
        y_l, _ = encode_labels(lang_labels, self.lang_order)
        value, _ = multitask_loss_and_grads(self.params, self._bows(docs), y_c, y_l)
        return value


def initialize_multitask_model(docs, cefr_order, lang_order, hyper: NeuralHyper, seed: int):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    word_vocab = build_vocab(docs, "word", hyper.lowercase, hyper.min_token_count)
    char_vocab = build_vocab(docs, "char", hyper.lowercase, hyper.min_token_count)
    pooled_dim = hyper.d_word + hyper.d_char
    params = {
        "emb_word": rng.normal(0.0, hyper.init_scale, size=(len(word_vocab) + 1, hyper.d_word)),
        "emb_char": rng.normal(0.0, hyper.init_scale, size=(len(char_vocab) + 1, hyper.d_char)),
        "cefr_w": np.zeros((len(cefr_order), pooled_dim)),
        "cefr_b": np.zeros(len(cefr_order)),
        "lang_w": np.zeros((len(lang_order), pooled_dim)),
        "lang_b": np.zeros(len(lang_order)),
    }
    model = MultitaskModel(word_vocab, char_vocab, params, tuple(cefr_order), tuple(lang_order), hyper.lowercase)
    return model, rng


def train_multitask(
    docs,
    cefr_labels,
    lang_labels,
    hyper: NeuralHyper | None = None,
    cefr_order=None,
    lang_order=None,
    seed: int = 0,
) -> MultitaskModel:
    """Jointly train both heads with equal loss weights."""
    hyper = hyper or NeuralHyper()
    y_c, cefr_order = encode_labels(cefr_labels, cefr_order)
    y_l, lang_order = encode_labels(lang_labels, lang_order)
    if len(set(y_l.tolist())) < 2:
        raise TrainingError("multitask training requires at least 2 languages")
    if len(set(y_c.tolist())) < 2:
        raise TrainingError("training requires at least 2 classes present")
    model, rng = initialize_multitask_model(docs, cefr_order, lang_order, hyper, seed)
    bows = model._bows(docs)
    model.initial_loss, _ = multitask_loss_and_grads(model.params, bows, y_c, y_l)

    def batch(rows):
        sub = {k: v[rows] for k, v in bows.items()}
        return multitask_loss_and_grads(model.params, sub, y_c[rows], y_l[rows])

    _run_adadelta(model.params, batch, hyper.epochs, hyper.batch_size, len(docs), hyper.rho, hyper.eps, rng)
    model.final_loss, _ = multitask_loss_and_grads(model.params, bows, y_c, y_l)
    return model
