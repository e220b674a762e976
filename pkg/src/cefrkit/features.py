"""Sparse n-gram features and dense document-level (domain) features.

Three n-gram families share one pipeline: surface words, UPOS tags, and
dependency triplets (deprel, dependent UPOS, head UPOS). N-gram windows are
computed per sentence and pooled per document; a feature space retains only
keys whose corpus-total count reaches a threshold.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Document
from .errors import ConfigError, DegenerateDocumentError

FAMILIES = ("word", "pos", "dep")
ROOT_MARK = "ROOT"
LEXICAL_UPOS = frozenset({"NOUN", "VERB", "ADJ", "ADV"})

# separators inside rendered keys; escaped out of items so rendering is injective
_ITEM_SEP = "\x1f"
_PART_SEP = "\x1e"

_ESCAPES = [("\\", "\\\\"), (_ITEM_SEP, "\\f"), (_PART_SEP, "\\g"),
            ("\t", "\\t"), ("\n", "\\n"), ("\r", "\\r")]
_UNESCAPES = {"\\": "\\", "f": _ITEM_SEP, "g": _PART_SEP, "t": "\t", "n": "\n", "r": "\r"}


def _escape(text: str) -> str:
    for raw, esc in _ESCAPES:
        text = text.replace(raw, esc)
    return text


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _UNESCAPES:
                raise ValueError(f"bad escape in key part {text!r}")
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


@dataclass(frozen=True, slots=True)
class DepTriplet:
    """Unigram unit of the dependency family."""

    deprel: str
    dep_upos: str
    head_upos: str

    def render(self) -> str:
        return _PART_SEP.join((_escape(self.deprel), _escape(self.dep_upos), _escape(self.head_upos)))

    @classmethod
    def from_rendered(cls, text: str) -> "DepTriplet":
        parts = text.split(_PART_SEP)
        if len(parts) != 3:
            raise ValueError(f"not a dependency triplet: {text!r}")
        return cls(*(_unescape(p) for p in parts))


@dataclass(frozen=True)
class FeatureSpec:
    """Configuration of one n-gram family."""

    family: str
    n_min: int = 1
    n_max: int = 5
    min_count: int = 10
    lowercase: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown feature family {self.family!r}, expected one of {FAMILIES}")
        if not (1 <= self.n_min <= self.n_max):
            raise ConfigError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if self.min_count < 1:
            raise ConfigError(f"min_count must be >= 1, got {self.min_count}")


def render_ngram(family: str, items: tuple[str, ...]) -> str:
    """Render an n-gram of already-escaped item strings into a feature key."""
    return family + ":" + _ITEM_SEP.join(items)


def parse_ngram(key: str):
    """Invert render_ngram: returns (family, items) with dep items as DepTriplet."""
    family, _, rest = key.partition(":")
    if family not in FAMILIES:
        raise ValueError(f"bad feature key {key!r}")
    raw_items = rest.split(_ITEM_SEP)
    if family == "dep":
        return family, tuple(DepTriplet.from_rendered(item) for item in raw_items)
    return family, tuple(_unescape(item) for item in raw_items)


def sentence_items(sentence, family: str, lowercase: bool = True) -> list[str]:
    """Per-sentence item sequence, already escaped/rendered for key building."""
    if family == "word":
        return [_escape(t.form.lower() if lowercase else t.form) for t in sentence.tokens]
    if family == "pos":
        return [_escape(t.upos) for t in sentence.tokens]
    if family == "dep":
        toks = sentence.tokens
        return [
            DepTriplet(t.deprel, t.upos, ROOT_MARK if t.head is None else toks[t.head].upos).render()
            for t in toks
        ]
    raise ConfigError(f"unknown feature family {family!r}")


def token_sequence(doc: Document, family: str, lowercase: bool = True) -> list:
    """Document-level item sequence (sentences concatenated), unescaped.

    Words come back lowercased when configured, pos as UPOS tags, dep as
    DepTriplet objects. N-gram windows are *not* taken over this sequence;
    they are computed per sentence (see doc_ngram_counts).
    """
    out: list = []
    for sentence in doc.sentences:
        if family == "dep":
            toks = sentence.tokens
            out.extend(
                DepTriplet(t.deprel, t.upos, ROOT_MARK if t.head is None else toks[t.head].upos)
                for t in toks
            )
        elif family == "word":
            out.extend(t.form.lower() if lowercase else t.form for t in sentence.tokens)
        elif family == "pos":
            out.extend(t.upos for t in sentence.tokens)
        else:
            raise ConfigError(f"unknown feature family {family!r}")
    return out


def extract_ngrams(items: list[str], n_min: int, n_max: int, family: str) -> Counter:
    """All contiguous windows of length n_min..n_max over one item sequence."""
    counts: Counter = Counter()
    length = len(items)
    for n in range(n_min, n_max + 1):
        for start in range(length - n + 1):
            counts[render_ngram(family, tuple(items[start : start + n]))] += 1
    return counts


def doc_ngram_counts(doc: Document, spec: FeatureSpec) -> Counter:
    """Pool per-sentence n-gram counts over a document (windows never span sentences)."""
    counts: Counter = Counter()
    for sentence in doc.sentences:
        items = sentence_items(sentence, spec.family, spec.lowercase)
        length = len(items)
        for n in range(spec.n_min, spec.n_max + 1):
            for start in range(length - n + 1):
                counts[render_ngram(spec.family, tuple(items[start : start + n]))] += 1
    return counts


@dataclass(frozen=True)
class FeatureSpace:
    """Frozen, threshold-filtered key-to-column mapping for one FeatureSpec."""

    spec: FeatureSpec
    index_of: dict

    @property
    def dim(self) -> int:
        return len(self.index_of)

    def keys_in_order(self) -> list[str]:
        return sorted(self.index_of, key=self.index_of.get)


def build_feature_space(corpus, spec: FeatureSpec) -> FeatureSpace:
    """Count keys over all documents and retain those with total count >= min_count.

    Column indices follow lexicographic key order, so the space is independent
    of document order.
    """
    documents = list(corpus)
    if not documents:
        raise ConfigError("cannot build a feature space from an empty corpus")
    totals: Counter = Counter()
    for doc in documents:
        totals.update(doc_ngram_counts(doc, spec))
    retained = sorted(k for k, c in totals.items() if c >= spec.min_count)
    if not retained:
        raise ConfigError(
            f"empty feature space: no {spec.family!r} n-gram reached min_count={spec.min_count} "
            f"over {len(documents)} documents ({len(totals)} distinct keys seen)"
        )
    return FeatureSpace(spec, {key: i for i, key in enumerate(retained)})


@dataclass(frozen=True)
class SparseVector:
    """Strictly increasing indices with positive counts; dim of the owning space."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense


def vectorize(doc: Document, space: FeatureSpace) -> SparseVector:
    """Count the document's in-space keys; out-of-vocabulary keys are dropped."""
    counts = doc_ngram_counts(doc, space.spec)
    pairs = sorted((space.index_of[k], c) for k, c in counts.items() if k in space.index_of)
    idx = np.array([i for i, _ in pairs], dtype=np.int64)
    val = np.array([c for _, c in pairs], dtype=np.float64)
    return SparseVector(idx, val, space.dim)


def to_matrix(vectors: list[SparseVector], dim: int | None = None) -> np.ndarray:
    """Stack sparse vectors into a dense count matrix."""
    if dim is None:
        if not vectors:
            raise ValueError("need dim for an empty vector list")
        dim = vectors[0].dim
    out = np.zeros((len(vectors), dim))
    for row, vec in enumerate(vectors):
        out[row, vec.indices] = vec.values
    return out


DOMAIN_FEATURE_NAMES = (
    "doc_length",
    "lexical_density",
    "type_token_ratio",
    "root_ttr",
    "corrected_ttr",
    "lexical_variation",
    "noun_variation",
    "verb_variation",
    "adj_variation",
    "adv_variation",
    "total_errors",
    "spelling_errors",
)


def domain_features(doc: Document, error_counts: tuple[int, int] | None = None) -> np.ndarray:
    """Dense document features: length, lexical richness, and error counts.

    Ratios with an empty denominator are defined as 0. Error counts default to
    (0, 0) for documents without sidecar entries.
    """
    words = [t for t in doc.tokens() if t.upos != "PUNCT"]
    n = len(words)
    if n == 0:
        raise DegenerateDocumentError(f"doc {doc.id!r} has no non-punctuation tokens")
    lexical = [t for t in words if t.upos in LEXICAL_UPOS]
    n_lex = len(lexical)
    types = {t.lemma.lower() for t in words}
    lex_types = {t.lemma.lower() for t in lexical}

    def class_variation(upos: str) -> float:
        if n_lex == 0:
            return 0.0
        return len({t.lemma.lower() for t in lexical if t.upos == upos}) / n_lex

    total_errors, spelling_errors = error_counts if error_counts is not None else (0, 0)
    return np.array(
        [
            float(n),
            n_lex / n,
            len(types) / n,
            len(types) / math.sqrt(n),
            len(types) / math.sqrt(2 * n),
            (len(lex_types) / n_lex) if n_lex else 0.0,
            class_variation("NOUN"),
            class_variation("VERB"),
            class_variation("ADJ"),
            class_variation("ADV"),
            float(total_errors),
            float(spelling_errors),
        ]
    )


def domain_matrix(docs, error_counts: dict | None = None) -> np.ndarray:
    """Stack domain features for a document sequence; counts looked up by doc id."""
    table = error_counts or {}
    return np.stack([domain_features(d, table.get(d.id)) for d in docs])


def load_error_counts(path) -> dict:
    """Read the per-document error sidecar: doc_id / total_errors / spelling_errors TSV."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    rows = [ln.rstrip("\r") for ln in lines if ln.strip() != ""]
    if not rows or tuple(rows[0].split("\t")) != ("doc_id", "total_errors", "spelling_errors"):
        raise ConfigError(f"{path}: bad error-count header")
    out = {}
    for i, row in enumerate(rows[1:], start=2):
        cols = row.split("\t")
        if len(cols) != 3:
            raise ConfigError(f"{path}: row {i}: expected 3 columns")
        out[cols[0]] = (int(cols[1]), int(cols[2]))
    return out


_SPACE_FORMAT = "cefrkit-featurespace"
_SPACE_VERSION = "1"


def feature_space_to_text(space: FeatureSpace) -> str:
    spec = space.spec
    lines = [
        f"{_SPACE_FORMAT}\t{_SPACE_VERSION}",
        f"family\t{spec.family}",
        f"n_min\t{spec.n_min}",
        f"n_max\t{spec.n_max}",
        f"min_count\t{spec.min_count}",
        f"lowercase\t{'true' if spec.lowercase else 'false'}",
        "---",
    ]
    lines.extend(f"{key}\t{idx}" for key, idx in sorted(space.index_of.items(), key=lambda kv: kv[1]))
    return "\n".join(lines) + "\n"


def feature_space_from_text(text: str) -> FeatureSpace:
    lines = text.split("\n")
    if not lines or lines[0] != f"{_SPACE_FORMAT}\t{_SPACE_VERSION}":
        raise ConfigError(f"not a cefrkit feature space (v{_SPACE_VERSION})")
    header = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        if line == "---":
            body_start = i + 1
            break
        key, _, value = line.partition("\t")
        header[key] = value
    if body_start is None:
        raise ConfigError("feature space text missing the '---' separator")
    spec = FeatureSpec(
        family=header["family"],
        n_min=int(header["n_min"]),
        n_max=int(header["n_max"]),
        min_count=int(header["min_count"]),
        lowercase=header["lowercase"] == "true",
    )
    index_of = {}
    for line in lines[body_start:]:
        if line == "":
            continue
        key, _, idx = line.rpartition("\t")
        index_of[key] = int(idx)
    return FeatureSpace(spec, index_of)


def save_feature_space(space: FeatureSpace, path) -> None:
    Path(path).write_text(feature_space_to_text(space), encoding="utf-8")


def load_feature_space(path) -> FeatureSpace:
    return feature_space_from_text(Path(path).read_text(encoding="utf-8"))
