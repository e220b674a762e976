"""Deterministic synthetic corpora for desk-scale experiments.

Real graded learner corpora cannot be redistributed, so tests run on generated
pseudo-languages. Proficiency signal flows through three controllable
channels shared across languages: document length, POS/construction patterns
(adjectives, adverbs, subordination, coordination), and vocabulary breadth.
Word forms are language-specific and disjoint across languages, so lexical
features work monolingually but carry nothing across languages.

Per-document ability is the level rank plus Gaussian jitter, which makes the
classes overlap like ordinal data: most confusions land on adjacent levels.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CEFRLevel, Corpus, Document, Sentence, Token, document_to_conllu

_SYLLABLES = {
    "aa": ("ka", "ti", "no", "ra", "mu", "sa", "le", "vo"),
    "bb": ("bel", "dun", "gri", "sol", "vek", "mab", "tor", "lin"),
    "cc": ("zo", "pry", "ghe", "fu", "cha", "wi", "ste", "kle"),
}

_POS_SUFFIX = {"NOUN": "", "VERB": "ir", "ADJ": "iv", "ADV": "ul"}
_VOCAB_SIZES = {"NOUN": 48, "VERB": 32, "ADJ": 24, "ADV": 16}
_FUNCTION_SIZES = {"PRON": 6, "DET": 4, "ADP": 6, "SCONJ": 4, "CCONJ": 3}

# construction probabilities interpolate linearly from the lowest to the
# highest level; they are shared across languages (the universal channel)
_CONSTRUCTS = {
    "adj": (0.06, 0.58),
    "adv": (0.05, 0.52),
    "sub": (0.03, 0.58),
    "pp": (0.15, 0.55),
    "pron_subj": (0.72, 0.20),
    "coord": (0.04, 0.36),
}


@dataclass(frozen=True)
class FixtureParams:
    languages: tuple = ("aa", "bb", "cc")
    levels: tuple = ("A2", "B1", "B2")
    docs_per_level: int = 100
    ability_jitter: float = 0.35
    sentences_base: float = 4.5
    sentences_per_rank: float = 1.3
    sentences_sd: float = 2.2
    vocab_floor: float = 0.35  # share of the vocab visible at the lowest level


def _word_list(language: str, pos: str, size: int) -> list[str]:
    syllables = _SYLLABLES.get(language)
    if syllables is None:
        # derive an inventory for unlisted language codes, still deterministic
        base = [f"{language}{i}" for i in range(8)]
        syllables = tuple(base)
    suffix = _POS_SUFFIX.get(pos, "")
    words = []
    i = 0
    while len(words) < size:
        first = syllables[i % len(syllables)]
        second = syllables[(i // len(syllables) + i) % len(syllables)]
        words.append(first + second + suffix)
        i += 1
    return words


def _function_words(language: str) -> dict:
    out = {}
    for pos, size in _FUNCTION_SIZES.items():
        out[pos] = [w + pos.lower()[:2] for w in _word_list(language, pos, size)]
    return out


@dataclass
class _LanguageLexicon:
    content: dict = field(default_factory=dict)
    function: dict = field(default_factory=dict)


def _lexicon(language: str) -> _LanguageLexicon:
    lex = _LanguageLexicon()
    for pos, size in _VOCAB_SIZES.items():
        lex.content[pos] = _word_list(language, pos, size)
    lex.function = _function_words(language)
    return lex


def _prob(name: str, ability: float, top_rank: float) -> float:
    low, high = _CONSTRUCTS[name]
    frac = 0.0 if top_rank == 0 else min(max(ability / top_rank, 0.0), 1.0)
    return low + (high - low) * frac


class _SentenceBuilder:
    def __init__(self):
        self.rows: list = []  # [form, lemma, upos, head, deprel]

    def add(self, form: str, upos: str, head: int | None, deprel: str) -> int:
        self.rows.append([form, form, upos, head, deprel])
        return len(self.rows) - 1

    def tokens(self) -> tuple:
        rows = self.rows
        rows[0][0] = rows[0][0].capitalize()
        return tuple(Token(f, l, u, h, d) for f, l, u, h, d in rows)


def _sample_word(rng, words: list[str], ability: float, top_rank: float, floor: float) -> str:
    frac = 0.0 if top_rank == 0 else min(max(ability / top_rank, 0.0), 1.0)
    available = max(1, int(round(len(words) * (floor + (1.0 - floor) * frac))))
    return words[rng.integers(0, available)]


def _noun_phrase(builder, rng, lex, ability, top, floor, role, head_slot):
    """DET (ADJ) NOUN attached to head_slot; returns the noun index."""
    det_i = builder.add(lex.function["DET"][rng.integers(0, len(lex.function["DET"]))], "DET", None, "det")
    adj_i = None
    if rng.random() < _prob("adj", ability, top):
        adj = _sample_word(rng, lex.content["ADJ"], ability, top, floor)
        adj_i = builder.add(adj, "ADJ", None, "amod")
    noun = _sample_word(rng, lex.content["NOUN"], ability, top, floor)
    noun_i = builder.add(noun, "NOUN", head_slot, role)
    builder.rows[det_i][3] = noun_i
    if adj_i is not None:
        builder.rows[adj_i][3] = noun_i
    return noun_i


def _clause(builder, rng, lex, ability, top, floor, head_slot, deprel):
    """Verb-rooted clause; returns the verb index."""
    subj_first = rng.random() < _prob("pron_subj", ability, top)
    subj_rows = []
    if subj_first:
        pron = lex.function["PRON"][rng.integers(0, len(lex.function["PRON"]))]
        subj_rows.append(builder.add(pron, "PRON", None, "nsubj"))
    else:
        subj_rows.append(_noun_phrase(builder, rng, lex, ability, top, floor, "nsubj", None))
    verb = _sample_word(rng, lex.content["VERB"], ability, top, floor)
    verb_i = builder.add(verb, "VERB", head_slot, deprel)
    for i in subj_rows:
        builder.rows[i][3] = verb_i
    if rng.random() < _prob("adv", ability, top):
        adv = _sample_word(rng, lex.content["ADV"], ability, top, floor)
        builder.add(adv, "ADV", verb_i, "advmod")
    if rng.random() < 0.8:
        _noun_phrase(builder, rng, lex, ability, top, floor, "obj", verb_i)
    if rng.random() < _prob("pp", ability, top):
        adp_i = builder.add(lex.function["ADP"][rng.integers(0, len(lex.function["ADP"]))], "ADP", None, "case")
        noun = _sample_word(rng, lex.content["NOUN"], ability, top, floor)
        noun_i = builder.add(noun, "NOUN", verb_i, "obl")
        builder.rows[adp_i][3] = noun_i
    return verb_i


def _sentence(rng, lex, ability: float, top: float, floor: float) -> Sentence:
    builder = _SentenceBuilder()
    root_i = _clause(builder, rng, lex, ability, top, floor, None, "root")
    if rng.random() < _prob("sub", ability, top):
        sconj = lex.function["SCONJ"][rng.integers(0, len(lex.function["SCONJ"]))]
        mark_i = builder.add(sconj, "SCONJ", None, "mark")
        sub_verb = _clause(builder, rng, lex, ability, top, floor, root_i, "advcl")
        builder.rows[mark_i][3] = sub_verb
    if rng.random() < _prob("coord", ability, top):
        cc_i = builder.add(lex.function["CCONJ"][rng.integers(0, len(lex.function["CCONJ"]))], "CCONJ", None, "cc")
        conj_verb = _clause(builder, rng, lex, ability, top, floor, root_i, "conj")
        builder.rows[cc_i][3] = conj_verb
    builder.add(".", "PUNCT", root_i, "punct")
    return Sentence(builder.tokens())


def generate_corpus(params: FixtureParams | None = None, seed: int = 0) -> Corpus:
    """Generate the synthetic multi-language corpus (deterministic per seed)."""
    params = params or FixtureParams()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    top = float(len(params.levels) - 1)
    documents = []
    for language in params.languages:
        lex = _lexicon(language)
        for rank, level_name in enumerate(params.levels):
            level = CEFRLevel[level_name]
            for d in range(params.docs_per_level):
                ability = min(max(rank + rng.normal(0.0, params.ability_jitter), 0.0), top)
                n_sents = max(
                    2,
                    int(round(rng.normal(params.sentences_base + params.sentences_per_rank * ability, params.sentences_sd))),
                )
                sentences = tuple(
                    _sentence(rng, lex, ability, top, params.vocab_floor) for _ in range(n_sents)
                )
                documents.append(
                    Document(f"{language}-{level_name}-{d:04d}", language, level, sentences)
                )
    return Corpus(documents)


def generate_error_counts(corpus: Corpus, seed: int = 0) -> dict:
    """Synthetic per-document error sidecar: error rate falls with the level."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 11])))
    out = {}
    for doc in corpus:
        rank = 0 if doc.label is None else int(doc.label)
        rate = max(0.02, 0.10 - 0.02 * rank)
        total = int(rng.poisson(rate * doc.n_tokens()))
        spelling = int(rng.binomial(total, 0.5)) if total else 0
        out[doc.id] = (total, spelling)
    return out


def write_corpus_files(corpus: Corpus, out_dir, error_counts: dict | None = None) -> Path:
    """Write one CoNLL-U file per document plus the manifest (and error sidecar)."""
    out = Path(out_dir)
    (out / "docs").mkdir(parents=True, exist_ok=True)
    manifest_lines = ["doc_id\tpath\tlanguage\tcefr"]
    for doc in corpus:
        rel = f"docs/{doc.id}.conllu"
        (out / rel).write_text(document_to_conllu(doc), encoding="utf-8")
        label = "unrated" if doc.label is None else doc.label.name
        manifest_lines.append(f"{doc.id}\t{rel}\t{doc.language}\t{label}")
    manifest = out / "manifest.tsv"
    manifest.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    if error_counts is not None:
        lines = ["doc_id\ttotal_errors\tspelling_errors"]
        lines.extend(f"{doc.id}\t{error_counts[doc.id][0]}\t{error_counts[doc.id][1]}" for doc in corpus)
        (out / "errors.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic graded corpus")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--docs-per-level", type=int, default=100)
    parser.add_argument("--languages", default="aa,bb,cc")
    parser.add_argument("--levels", default="A2,B1,B2")
    parser.add_argument("--with-errors", action="store_true", help="also write the error sidecar")
    args = parser.parse_args(argv)
    params = FixtureParams(
        languages=tuple(args.languages.split(",")),
        levels=tuple(args.levels.split(",")),
        docs_per_level=args.docs_per_level,
    )
    corpus = generate_corpus(params, seed=args.seed)
    errors = generate_error_counts(corpus, seed=args.seed) if args.with_errors else None
    manifest = write_corpus_files(corpus, args.out_dir, errors)
    print(f"wrote {len(corpus)} documents under {args.out_dir} (manifest: {manifest})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
