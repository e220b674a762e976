"""Learner-text corpus handling: CoNLL-U parsing, manifest loading, filtering.

Documents are dependency-parsed texts (UDPipe-style CoNLL-U output) with a
language code and an overall CEFR rating attached via a sidecar manifest.
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import ConlluParseError, ConlluStructureError, CorpusError

MANIFEST_COLUMNS = ("doc_id", "path", "language", "cefr")
UNRATED = "unrated"


class CEFRLevel(enum.IntEnum):
    """The six CEFR proficiency levels, totally ordered A1 < A2 < ... < C2."""

    A1 = 0
    A2 = 1
    B1 = 2
    B2 = 3
    C1 = 4
    C2 = 5

    def __str__(self) -> str:
        return self.name

    def distance(self, other: "CEFRLevel") -> int:
        """Rank difference between two levels (adjacency = 1)."""
        return abs(int(self) - int(other))

    @classmethod
    def parse(cls, text: str) -> "CEFRLevel | None":
        """Parse a manifest label; ``unrated`` maps to None."""
        if text == UNRATED:
            return None
        try:
            return cls[text]
        except KeyError:
            raise CorpusError(f"unknown CEFR label {text!r}") from None


@dataclass(frozen=True, slots=True)
class Token:
    """One syntactic word. ``head`` is a 0-based in-sentence index, None = root."""

    form: str
    lemma: str
    upos: str
    head: int | None
    deprel: str


@dataclass(frozen=True, slots=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)


@dataclass(frozen=True, slots=True)
class Document:
    """A parsed learner text with its language code and CEFR label (None = unrated)."""

    id: str
    language: str
    label: CEFRLevel | None
    sentences: tuple[Sentence, ...]

    def tokens(self) -> Iterator[Token]:
        for sentence in self.sentences:
            yield from sentence.tokens

    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def languages(self) -> list[str]:
        return sorted({d.language for d in self.documents})

    def label_counts(self) -> Counter:
        """Counts per (language, label); unrated documents count under None."""
        return Counter((d.language, d.label) for d in self.documents)

    def select_languages(self, languages) -> "Corpus":
        wanted = set(languages)
        return Corpus([d for d in self.documents if d.language in wanted])


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences of syntactic words.

    Comment lines are ignored; multiword-token ranges (``1-2``) and empty
    nodes (``1.1``) are skipped so that only syntactic words remain. The
    1-based HEAD column is converted to a 0-based in-sentence index, with
    HEAD=0 becoming None (root).
    """
    sentences: list[Sentence] = []
    pending: list[tuple[str, str, str, int, str, int]] = []  # fields + line no

    def finish() -> None:
        if not pending:
            return
        n = len(pending)
        tokens = []
        for i, (form, lemma, upos, head, deprel, lineno) in enumerate(pending):
            if head == 0:
                idx: int | None = None
            else:
                idx = head - 1
                if idx >= n:
                    raise ConlluStructureError(
                        f"HEAD {head} points past the {n}-token sentence", lineno
                    )
                if idx == i:
                    raise ConlluStructureError(f"token is its own HEAD ({head})", lineno)
            tokens.append(Token(form, lemma, upos, idx, deprel))
        sentences.append(Sentence(tuple(tokens)))
        pending.clear()

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line:
            finish()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            # multiword-token range or empty node: not a syntactic word
            continue
        try:
            num_id = int(tok_id)
        except ValueError:
            raise ConlluParseError(f"non-integer token ID {tok_id!r}", lineno) from None
        if num_id != len(pending) + 1:
            raise ConlluParseError(
                f"token ID {num_id} out of sequence (expected {len(pending) + 1})", lineno
            )
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(f"non-integer HEAD {cols[6]!r}", lineno) from None
        if head < 0:
            raise ConlluParseError(f"negative HEAD {head}", lineno)
        pending.append((cols[1], cols[2], cols[3], head, cols[7], lineno))
    finish()
    return sentences


def sentence_to_conllu(sentence: Sentence) -> str:
    """Render a sentence back to word lines (FORM/LEMMA/UPOS/HEAD/DEPREL kept, rest '_')."""
    lines = []
    for i, tok in enumerate(sentence.tokens):
        head = 0 if tok.head is None else tok.head + 1
        lines.append(
            "\t".join(
                (str(i + 1), tok.form, tok.lemma, tok.upos, "_", "_", str(head), tok.deprel, "_", "_")
            )
        )
    return "\n".join(lines)


def document_to_conllu(doc: Document) -> str:
    return "\n\n".join(sentence_to_conllu(s) for s in doc.sentences) + "\n"


def read_manifest(manifest_path) -> list[tuple[str, str, str, str]]:
    """Read a tab-separated manifest with header doc_id/path/language/cefr."""
    path = Path(manifest_path)
    lines = path.read_text(encoding="utf-8").split("\n")
    rows = [ln.rstrip("\r") for ln in lines]
    rows = [ln for ln in rows if ln != ""]
    if not rows:
        raise CorpusError(f"{path}: empty manifest (missing header)")
    header = tuple(rows[0].split("\t"))
    if header != MANIFEST_COLUMNS:
        raise CorpusError(f"{path}: bad manifest header {header!r}, expected {MANIFEST_COLUMNS!r}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        cols = row.split("\t")
        if len(cols) != 4:
            raise CorpusError(f"{path}: row {i}: expected 4 columns, got {len(cols)}")
        out.append(tuple(cols))
    return out


def load_corpus(manifest_path, base_path=None) -> Corpus:
    """Build a Corpus from a manifest; document paths resolve against base_path.

    Defaults base_path to the manifest's directory. Parse failures abort with
    the offending manifest row identified.
    """
    manifest_path = Path(manifest_path)
    base = Path(base_path) if base_path is not None else manifest_path.parent
    documents: list[Document] = []
    seen: set[str] = set()
    for doc_id, rel_path, language, cefr in read_manifest(manifest_path):
        if doc_id in seen:
            raise CorpusError(f"duplicate doc_id {doc_id!r} in manifest")
        seen.add(doc_id)
        label = CEFRLevel.parse(cefr)
        file_path = base / rel_path
        if not file_path.is_file():
            raise CorpusError(f"doc {doc_id!r}: file not found: {file_path}")
        try:
            sentences = parse_conllu(file_path.read_text(encoding="utf-8"))
        except ConlluParseError as err:
            raise CorpusError(f"doc {doc_id!r} ({file_path}): {err}") from err
        if not sentences:
            raise CorpusError(f"doc {doc_id!r} ({file_path}): no sentences")
        documents.append(Document(doc_id, language, label, tuple(sentences)))
    return Corpus(documents)


def filter_corpus(corpus: Corpus, min_count: int = 10) -> Corpus:
    """Drop unrated documents and every (language, level) group smaller than min_count.

    Document order is preserved; the result may be empty. Idempotent.
    """
    rated = [d for d in corpus.documents if d.label is not None]
    group_sizes = Counter((d.language, d.label) for d in rated)
    kept = [d for d in rated if group_sizes[(d.language, d.label)] >= min_count]
    return Corpus(kept)


def corpus_to_json(corpus: Corpus) -> str:
    """Serialize a corpus to the internal JSON dump format (deterministic)."""
    docs = []
    for d in corpus.documents:
        docs.append(
            {
                "id": d.id,
                "language": d.language,
                "cefr": UNRATED if d.label is None else d.label.name,
                "sentences": [
                    [[t.form, t.lemma, t.upos, -1 if t.head is None else t.head, t.deprel] for t in s]
                    for s in d.sentences
                ],
            }
        )
    payload = {"format": "cefrkit-corpus", "version": 1, "documents": docs}
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def corpus_from_json(text: str) -> Corpus:
    payload = json.loads(text)
    if payload.get("format") != "cefrkit-corpus" or payload.get("version") != 1:
        raise CorpusError("not a cefrkit corpus dump (bad format/version)")
    documents = []
    for d in payload["documents"]:
        sentences = tuple(
            Sentence(tuple(Token(f, l, u, None if h < 0 else h, r) for f, l, u, h, r in sent))
            for sent in d["sentences"]
        )
        documents.append(Document(d["id"], d["language"], CEFRLevel.parse(d["cefr"]), sentences))
    return Corpus(documents)
