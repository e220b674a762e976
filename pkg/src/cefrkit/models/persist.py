"""Versioned plain-text model persistence.

Floats are written with repr (shortest round-trip form), so a loaded model
reproduces its predictions bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from ..corpus import CEFRLevel
from ..errors import ConfigError
from .embedding import EmbeddingSoftmaxModel, MultitaskModel
from .forest import RandomForestModel, _Tree
from .softmax import SoftmaxLinearModel

_FORMAT = "cefrkit-model"
_VERSION = "1"


def _labels_line(tag: str, labels) -> str:
    if all(isinstance(l, CEFRLevel) for l in labels):
        return f"{tag}\tcefr\t{json.dumps([l.name for l in labels])}"
    plain = [l.item() if isinstance(l, np.generic) else l for l in labels]
    return f"{tag}\tjson\t{json.dumps(plain)}"


def _parse_labels(line: str, tag: str) -> tuple:
    got_tag, kind, payload = line.split("\t", 2)
    if got_tag != tag:
        raise ConfigError(f"expected {tag!r} line, got {got_tag!r}")
    values = json.loads(payload)
    if kind == "cefr":
        return tuple(CEFRLevel[v] for v in values)
    return tuple(values)


def _matrix_lines(tag: str, arr: np.ndarray) -> list[str]:
    arr = np.atleast_2d(arr)
    lines = [f"{tag}\t{arr.shape[0]}\t{arr.shape[1]}"]
    lines.extend(" ".join(repr(v) for v in row) for row in arr.tolist())
    return lines


def _read_matrix(lines, pos: int, tag: str):
    head = lines[pos].split("\t")
    if head[0] != tag:
        raise ConfigError(f"expected {tag!r} matrix at line {pos + 1}, got {head[0]!r}")
    rows, cols = int(head[1]), int(head[2])
    data = [[float(v) for v in lines[pos + 1 + r].split(" ")] for r in range(rows)]
    arr = np.array(data, dtype=np.float64).reshape(rows, cols)
    return arr, pos + 1 + rows


def _softmax_lines(model: SoftmaxLinearModel) -> list[str]:
    lines = ["kind\tsoftmax", _labels_line("labels", model.label_order), f"l2\t{model.l2!r}"]
    lines.extend(_matrix_lines("w", model.weights))
    lines.extend(_matrix_lines("b", model.bias))
    return lines


def _softmax_from(lines) -> SoftmaxLinearModel:
    labels = _parse_labels(lines[1], "labels")
    l2 = float(lines[2].split("\t")[1])
    weights, pos = _read_matrix(lines, 3, "w")
    bias, _ = _read_matrix(lines, pos, "b")
    return SoftmaxLinearModel(weights, bias[0], labels, l2)


def _forest_lines(model: RandomForestModel) -> list[str]:
    meta = {
        "n_trees": model.n_trees,
        "max_features": model.max_features,
        "min_leaf": model.min_leaf,
        "seed": model.seed,
        "bootstrap": model.bootstrap,
        "n_features": model.n_features,
    }
    lines = ["kind\tforest", _labels_line("labels", model.label_order), f"meta\t{json.dumps(meta, sort_keys=True)}"]
    for i, tree in enumerate(model.trees):
        lines.append(f"tree\t{i}\t{len(tree.feature)}")
        for f, t, l, r in zip(tree.feature.tolist(), tree.threshold.tolist(), tree.left.tolist(), tree.right.tolist()):
            lines.append(f"{f} {t!r} {l} {r}")
    return lines


def _forest_from(lines) -> RandomForestModel:
    labels = _parse_labels(lines[1], "labels")
    meta = json.loads(lines[2].split("\t", 1)[1])
    trees = []
    pos = 3
    while pos < len(lines) and lines[pos].startswith("tree\t"):
        n_nodes = int(lines[pos].split("\t")[2])
        feature, threshold, left, right = [], [], [], []
        for row in lines[pos + 1 : pos + 1 + n_nodes]:
            f, t, l, r = row.split(" ")
            feature.append(int(f))
            threshold.append(float(t))
            left.append(int(l))
            right.append(int(r))
        trees.append(
            _Tree(
                np.array(feature, dtype=np.int64),
                np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64),
            )
        )
        pos += 1 + n_nodes
    return RandomForestModel(
        trees, labels, meta["n_trees"], meta["max_features"], meta["min_leaf"],
        meta["seed"], meta["bootstrap"], meta.get("n_features"),
    )


def _vocab_lines(tag: str, vocab: dict) -> list[str]:
    ordered = sorted(vocab, key=vocab.get)
    lines = [f"{tag}\t{len(ordered)}"]
    lines.extend(json.dumps(tok, ensure_ascii=False) for tok in ordered)
    return lines


def _read_vocab(lines, pos: int, tag: str):
    head = lines[pos].split("\t")
    if head[0] != tag:
        raise ConfigError(f"expected {tag!r} vocab at line {pos + 1}")
    size = int(head[1])
    vocab = {json.loads(lines[pos + 1 + i]): i + 1 for i in range(size)}
    return vocab, pos + 1 + size


def _embedding_lines(model: EmbeddingSoftmaxModel) -> list[str]:
    lines = [
        "kind\tembedding",
        f"mode\t{model.mode}",
        _labels_line("labels", model.label_order),
        f"lowercase\t{'true' if model.lowercase else 'false'}",
    ]
    lines.extend(_vocab_lines("vocab_word", model.word_vocab))
    lines.extend(_vocab_lines("vocab_char", model.char_vocab))
    for name in sorted(model.params):
        lines.extend(_matrix_lines(f"param:{name}", model.params[name]))
    return lines


def _embedding_from(lines) -> EmbeddingSoftmaxModel:
    mode = lines[1].split("\t")[1]
    labels = _parse_labels(lines[2], "labels")
    lowercase = lines[3].split("\t")[1] == "true"
    word_vocab, pos = _read_vocab(lines, 4, "vocab_word")
    char_vocab, pos = _read_vocab(lines, pos, "vocab_char")
    params = {}
    while pos < len(lines) and lines[pos].startswith("param:"):
        name = lines[pos].split("\t")[0][len("param:") :]
        arr, pos = _read_matrix(lines, pos, f"param:{name}")
        params[name] = arr[0] if name.endswith("_b") else arr
    return EmbeddingSoftmaxModel(mode, word_vocab, char_vocab, params, labels, lowercase)


def _multitask_lines(model: MultitaskModel) -> list[str]:
    lines = [
        "kind\tmultitask",
        _labels_line("cefr_labels", model.cefr_order),
        _labels_line("lang_labels", model.lang_order),
        f"lowercase\t{'true' if model.lowercase else 'false'}",
    ]
    lines.extend(_vocab_lines("vocab_word", model.word_vocab))
    lines.extend(_vocab_lines("vocab_char", model.char_vocab))
    for name in sorted(model.params):
        lines.extend(_matrix_lines(f"param:{name}", model.params[name]))
    return lines


def _multitask_from(lines) -> MultitaskModel:
    cefr_order = _parse_labels(lines[1], "cefr_labels")
    lang_order = _parse_labels(lines[2], "lang_labels")
    lowercase = lines[3].split("\t")[1] == "true"
    word_vocab, pos = _read_vocab(lines, 4, "vocab_word")
    char_vocab, pos = _read_vocab(lines, pos, "vocab_char")
    params = {}
    while pos < len(lines) and lines[pos].startswith("param:"):
        name = lines[pos].split("\t")[0][len("param:") :]
        arr, pos = _read_matrix(lines, pos, f"param:{name}")
        params[name] = arr[0] if name.endswith("_b") else arr
    return MultitaskModel(word_vocab, char_vocab, params, cefr_order, lang_order, lowercase)


def model_to_text(model) -> str:
    from .stacking import StackedModel  # local import to avoid a cycle

    header = [f"{_FORMAT}\t{_VERSION}"]
    if isinstance(model, SoftmaxLinearModel):
        body = _softmax_lines(model)
    elif isinstance(model, RandomForestModel):
        body = _forest_lines(model)
    elif isinstance(model, EmbeddingSoftmaxModel):
        body = _embedding_lines(model)
    elif isinstance(model, MultitaskModel):
        body = _multitask_lines(model)
    elif isinstance(model, StackedModel):
        base = model_to_text(model.base_model).rstrip("\n").split("\n")
        final = model_to_text(model.final_model).rstrip("\n").split("\n")
        body = ["kind\tstacked", f"k\t{model.k}", f"base_lines\t{len(base)}"]
        body.extend(base)
        body.append(f"final_lines\t{len(final)}")
        body.extend(final)
    else:
        raise ConfigError(f"cannot serialize model of type {type(model).__name__}")
    return "\n".join(header + body) + "\n"


def model_from_text(text: str):
    from .stacking import StackedModel

    lines = text.rstrip("\n").split("\n")
    if not lines or lines[0] != f"{_FORMAT}\t{_VERSION}":
        raise ConfigError(f"not a cefrkit model file (expected {_FORMAT} v{_VERSION})")
    lines = lines[1:]
    kind = lines[0].split("\t")[1]
    if kind == "softmax":
        return _softmax_from(lines)
    if kind == "forest":
        return _forest_from(lines)
    if kind == "embedding":
        return _embedding_from(lines)
    if kind == "multitask":
        return _multitask_from(lines)
    if kind == "stacked":
        k = int(lines[1].split("\t")[1])
        n_base = int(lines[2].split("\t")[1])
        base_text = "\n".join(lines[3 : 3 + n_base])
        pos = 3 + n_base
        n_final = int(lines[pos].split("\t")[1])
        final_text = "\n".join(lines[pos + 1 : pos + 1 + n_final])
        base = model_from_text(base_text)
        final = model_from_text(final_text)
        return StackedModel(base, final, final.label_order, k)
    raise ConfigError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    from pathlib import Path

    Path(path).write_text(model_to_text(model), encoding="utf-8")


def load_model(path):
    from pathlib import Path

    return model_from_text(Path(path).read_text(encoding="utf-8"))
