"""Experiment orchestration: monolingual and multilingual cross-validation,
cross-lingual transfer, and the document-length baseline.

Feature spaces, vocabularies, and models are always (re)built from training
documents only; test folds and test languages never influence fitted state.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import Corpus, filter_corpus
from .errors import ConfigError
from .evaluation import (
    EvaluationReport,
    confusion_to_tsv,
    cross_validate,
    evaluate_predictions,
    report_to_dict,
)
from .features import (
    FeatureSpec,
    build_feature_space,
    domain_matrix,
    feature_space_from_text,
    feature_space_to_text,
    load_error_counts,
    save_feature_space,
    to_matrix,
    vectorize,
)
from .models import ModelSpec, NeuralHyper, model_from_text, model_to_text, train_embedding_softmax, train_multitask
from .models.stacking import fit_model, train_stacked

_ARTIFACT_SEP = "---featurespace---"


def artifact_to_text(model, space=None) -> str:
    """Model text with the feature space appended when one is part of the fit."""
    text = model_to_text(model)
    if space is not None:
        text += _ARTIFACT_SEP + "\n" + feature_space_to_text(space)
    return text


def artifact_from_text(text: str):
    """Invert artifact_to_text; returns (model, space-or-None)."""
    if "\n" + _ARTIFACT_SEP + "\n" in text:
        model_text, space_text = text.split("\n" + _ARTIFACT_SEP + "\n", 1)
        return model_from_text(model_text + "\n"), feature_space_from_text(space_text)
    return model_from_text(text), None

REGIMES = ("monolingual", "multilingual", "crosslingual")
MODELS = ("softmax", "forest", "neural")
FEATURE_KINDS = ("ngram", "domain", "length", "combined", "embed-word", "embed-char", "embed-both", "multitask")
NEURAL_KINDS = ("embed-word", "embed-char", "embed-both", "multitask")
LEXICAL_KINDS = ("embed-word", "embed-both", "multitask")  # plus word-family n-grams


@dataclass(frozen=True)
class FeatureChoice:
    kind: str
    spec: FeatureSpec | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r}, expected one of {FEATURE_KINDS}")
        if self.kind in ("ngram", "combined") and self.spec is None:
            raise ConfigError(f"feature kind {self.kind!r} needs an n-gram spec (family, ...)")
        if self.kind not in ("ngram", "combined") and self.spec is not None:
            raise ConfigError(f"feature kind {self.kind!r} does not take an n-gram spec")

    def is_lexical(self) -> bool:
        if self.kind in LEXICAL_KINDS:
            return True
        return self.kind in ("ngram", "combined") and self.spec.family == "word"


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    languages: tuple
    feature: FeatureChoice
    model: str
    test_language: str | None = None
    include_language_feature: bool = False
    folds: int = 10
    seed: int = 0
    min_per_group: int = 10
    allow_lexical_crosslingual: bool = False
    error_counts_path: str | None = None
    model_params: tuple = ()  # (name, value) pairs for softmax/forest
    neural: tuple = ()  # (name, value) pairs for NeuralHyper

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}, expected one of {REGIMES}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if not self.languages:
            raise ConfigError("at least one training language is required")
        if self.regime == "monolingual" and len(self.languages) != 1:
            raise ConfigError("monolingual regime takes exactly one language")
        if self.regime == "multilingual" and len(self.languages) < 2:
            raise ConfigError("multilingual regime needs at least two languages")
        if self.regime == "crosslingual":
            if self.test_language is None:
                raise ConfigError("crosslingual regime needs a test_language")
            if self.test_language in self.languages:
                raise ConfigError("test_language must differ from the training languages")
            if self.feature.is_lexical() and not self.allow_lexical_crosslingual:
                raise ConfigError(
                    "lexical features (word n-grams, word embeddings) are language-specific and "
                    "disabled for cross-lingual transfer; pass allow_lexical_crosslingual to override"
                )
        elif self.test_language is not None:
            raise ConfigError("test_language only applies to the crosslingual regime")
        if self.include_language_feature and self.regime != "multilingual":
            raise ConfigError("include_language_feature only applies to the multilingual regime")
        if self.feature.kind == "multitask" and self.regime != "multilingual":
            raise ConfigError("the multitask model requires the multilingual regime")
        neural = self.feature.kind in NEURAL_KINDS
        if neural and self.model != "neural":
            raise ConfigError(f"feature {self.feature.kind!r} requires model='neural'")
        if not neural and self.model == "neural":
            raise ConfigError(f"model='neural' requires an embedding feature, not {self.feature.kind!r}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")

    def neural_hyper(self) -> NeuralHyper:
        return NeuralHyper(**dict(self.neural))

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.model, self.model_params)


_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}
_FEATURE_KEYS = {"kind", "family", "n_min", "n_max", "min_count", "lowercase"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from parsed JSON; unknown keys are rejected."""
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(raw)
    feature_raw = data.get("feature")
    if not isinstance(feature_raw, dict) or "kind" not in feature_raw:
        raise ConfigError("config needs a feature object with a 'kind'")
    bad = set(feature_raw) - _FEATURE_KEYS
    if bad:
        raise ConfigError(f"unknown feature keys: {sorted(bad)}")
    kind = feature_raw["kind"]
    spec = None
    if kind in ("ngram", "combined"):
        spec_args = {k: v for k, v in feature_raw.items() if k != "kind"}
        if "family" not in spec_args:
            raise ConfigError(f"feature kind {kind!r} needs a family")
        spec = FeatureSpec(**spec_args)
    elif len(feature_raw) > 1:
        raise ConfigError(f"feature kind {kind!r} takes no further keys")
    data["feature"] = FeatureChoice(kind, spec)
    data["languages"] = tuple(data.get("languages", ()))
    for key in ("model_params", "neural"):
        if key in data:
            if not isinstance(data[key], dict):
                raise ConfigError(f"{key} must be an object")
            data[key] = tuple(sorted(data[key].items()))
    return ExperimentConfig(**data)


def config_to_dict(config: ExperimentConfig) -> dict:
    feature: dict = {"kind": config.feature.kind}
    if config.feature.spec is not None:
        spec = config.feature.spec
        feature.update(
            family=spec.family, n_min=spec.n_min, n_max=spec.n_max,
            min_count=spec.min_count, lowercase=spec.lowercase,
        )
    return {
        "regime": config.regime,
        "languages": list(config.languages),
        "test_language": config.test_language,
        "feature": feature,
        "model": config.model,
        "include_language_feature": config.include_language_feature,
        "folds": config.folds,
        "seed": config.seed,
        "min_per_group": config.min_per_group,
        "allow_lexical_crosslingual": config.allow_lexical_crosslingual,
        "error_counts_path": config.error_counts_path,
        "model_params": dict(config.model_params),
        "neural": dict(config.neural),
    }


def config_digest(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def corpus_fingerprint(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for doc in corpus:
        digest.update(f"{doc.id}\x1f{doc.language}\x1f{doc.label}\x1f".encode("utf-8"))
        for sentence in doc.sentences:
            for t in sentence.tokens:
                digest.update(f"{t.form}\x1f{t.lemma}\x1f{t.upos}\x1f{t.head}\x1f{t.deprel}\x1e".encode("utf-8"))
        digest.update(b"\x1d")
    return digest.hexdigest()


def _language_onehot(docs, languages) -> np.ndarray:
    order = {lang: i for i, lang in enumerate(sorted(languages))}
    out = np.zeros((len(docs), len(order)))
    for row, doc in enumerate(docs):
        col = order.get(doc.language)
        if col is not None:
            out[row, col] = 1.0
    return out


class _FittedMatrixModel:
    """Matrix-featurized documents with a fitted softmax/forest on top."""

    def __init__(self, featurize, model, space=None):
        self._featurize = featurize
        self.model = model
        self.space = space
        self.feature_dim = None

    def predict(self, docs) -> list:
        return self.model.predict(self._featurize(docs))

    def serialize(self) -> str:
        return artifact_to_text(self.model, self.space)


class _NgramPipeline:
    def __init__(self, spec, model_spec, label_order, languages=None, threads=1):
        self.spec = spec
        self.model_spec = model_spec
        self.label_order = label_order
        self.languages = languages  # append one-hot language columns when set
        self.threads = threads

    def _matrix(self, docs, space) -> np.ndarray:
        X = to_matrix([vectorize(d, space) for d in docs], space.dim)
        if self.languages is not None:
            X = np.hstack([X, _language_onehot(docs, self.languages)])
        return X

    def fit(self, docs, labels, seed):
        space = build_feature_space(docs, self.spec)
        X = self._matrix(docs, space)
        model = fit_model(self.model_spec, X, labels, self.label_order, seed=seed, threads=self.threads)
        fitted = _FittedMatrixModel(lambda ds: self._matrix(ds, space), model, space)
        fitted.feature_dim = X.shape[1]
        return fitted


class _DenseDocPipeline:
    """Shared shape for the dense featurizations (domain features, doc length)."""

    def __init__(self, model_spec, label_order, error_counts=None, languages=None, threads=1, kind="domain"):
        self.model_spec = model_spec
        self.label_order = label_order
        self.error_counts = error_counts or {}
        self.languages = languages
        self.threads = threads
        self.kind = kind

    def _matrix(self, docs) -> np.ndarray:
        if self.kind == "domain":
            X = domain_matrix(docs, self.error_counts)
        else:
            X = np.array([[float(sum(1 for t in d.tokens() if t.upos != "PUNCT"))] for d in docs])
        if self.languages is not None:
            X = np.hstack([X, _language_onehot(docs, self.languages)])
        return X

    def fit(self, docs, labels, seed):
        X = self._matrix(docs)
        model = fit_model(self.model_spec, X, labels, self.label_order, seed=seed, threads=self.threads)
        fitted = _FittedMatrixModel(self._matrix, model)
        fitted.feature_dim = X.shape[1]
        return fitted


class _FittedStacked:
    def __init__(self, pipeline, space, stacked):
        self._pipeline = pipeline
        self.space = space
        self.stacked = stacked
        self.feature_dim = None

    def predict(self, docs) -> list:
        Xb = self._pipeline._base_matrix(docs, self.space)
        Xd = self._pipeline._domain(docs)
        return self.stacked.predict(Xb, Xd)

    def serialize(self) -> str:
        return artifact_to_text(self.stacked, self.space)


class _CombinedPipeline:
    """Stacked n-gram + domain combination with in-fold out-of-fold probabilities."""

    def __init__(self, spec, model_spec, label_order, folds, error_counts=None, languages=None, threads=1):
        self.spec = spec
        self.model_spec = model_spec
        self.label_order = label_order
        self.folds = folds
        self.error_counts = error_counts or {}
        self.languages = languages
        self.threads = threads

    def _base_matrix(self, docs, space) -> np.ndarray:
        X = to_matrix([vectorize(d, space) for d in docs], space.dim)
        if self.languages is not None:
            X = np.hstack([X, _language_onehot(docs, self.languages)])
        return X

    def _domain(self, docs) -> np.ndarray:
        return domain_matrix(docs, self.error_counts)

    def fit(self, docs, labels, seed):
        space = build_feature_space(docs, self.spec)
        Xb = self._base_matrix(docs, space)
        Xd = self._domain(docs)
        stacked = train_stacked(
            Xb, Xd, labels, self.model_spec, self.model_spec,
            k=min(self.folds, len(docs)), seed=seed, label_order=self.label_order,
        )
        fitted = _FittedStacked(self, space, stacked)
        fitted.feature_dim = Xb.shape[1]
        return fitted


class _FittedNeural:
    def __init__(self, model, multitask=False):
        self.model = model
        self.multitask = multitask
        head = model.params["cefr_w" if multitask else "head_w"]
        self.feature_dim = head.shape[1]  # pooled representation width

    def predict(self, docs) -> list:
        if self.multitask:
            cefr, _ = self.model.predict(docs)
            return cefr
        return self.model.predict(docs)

    def predict_language(self, docs) -> list:
        _, lang = self.model.predict(docs)
        return lang

    def serialize(self) -> str:
        return model_to_text(self.model)


class _EmbeddingPipeline:
    def __init__(self, mode, hyper, label_order):
        self.mode = mode
        self.hyper = hyper
        self.label_order = label_order

    def fit(self, docs, labels, seed):
        model = train_embedding_softmax(
            docs, labels, mode=self.mode, hyper=self.hyper, label_order=self.label_order, seed=seed
        )
        return _FittedNeural(model)


class _MultitaskPipeline:
    def __init__(self, hyper, label_order, lang_order):
        self.hyper = hyper
        self.label_order = label_order
        self.lang_order = lang_order

    def fit(self, docs, labels, seed):
        langs = [d.language for d in docs]
        model = train_multitask(
            docs, labels, langs, hyper=self.hyper,
            cefr_order=self.label_order, lang_order=self.lang_order, seed=seed,
        )
        return _FittedNeural(model, multitask=True)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_digest: str
    corpus_fingerprint: str
    report: EvaluationReport
    wall_clock: float
    model_text: str | None = None
    feature_space: object = None


def _mode_for(kind: str) -> str:
    return {"embed-word": "word", "embed-char": "char", "embed-both": "word+char"}[kind]


def build_pipeline(config: ExperimentConfig, label_order, lang_order=None, threads: int = 1):
    feature = config.feature
    error_counts = load_error_counts(config.error_counts_path) if config.error_counts_path else {}
    onehot_langs = tuple(config.languages) if config.include_language_feature else None
    if feature.kind == "ngram":
        return _NgramPipeline(feature.spec, config.model_spec(), label_order, onehot_langs, threads)
    if feature.kind == "domain":
        return _DenseDocPipeline(config.model_spec(), label_order, error_counts, onehot_langs, threads, "domain")
    if feature.kind == "length":
        return _DenseDocPipeline(config.model_spec(), label_order, error_counts, onehot_langs, threads, "length")
    if feature.kind == "combined":
        return _CombinedPipeline(
            feature.spec, config.model_spec(), label_order, config.folds, error_counts, onehot_langs, threads
        )
    if feature.kind in ("embed-word", "embed-char", "embed-both"):
        return _EmbeddingPipeline(_mode_for(feature.kind), config.neural_hyper(), label_order)
    if feature.kind == "multitask":
        return _MultitaskPipeline(config.neural_hyper(), label_order, lang_order)
    raise ConfigError(f"unhandled feature kind {feature.kind!r}")


def _select(corpus: Corpus, config: ExperimentConfig, languages) -> list:
    docs = filter_corpus(corpus, config.min_per_group).select_languages(languages).documents
    if not docs:
        raise ConfigError(f"no documents left for languages {tuple(languages)!r} after filtering")
    return docs


def _final_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 999_983]).generate_state(1)[0])


def run_experiment(corpus: Corpus, config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    started = time.perf_counter()
    if config.regime == "crosslingual":
        result = _run_crosslingual(corpus, config, threads)
    else:
        result = _run_cv_regime(corpus, config, threads)
    result.wall_clock = time.perf_counter() - started
    return result


def _run_cv_regime(corpus: Corpus, config: ExperimentConfig, threads: int) -> ExperimentResult:
    docs = _select(corpus, config, config.languages)
    labels = [d.label for d in docs]
    label_order = tuple(sorted(set(labels)))
    lang_order = tuple(sorted({d.language for d in docs}))
    pipeline = build_pipeline(config, label_order, lang_order, threads)

    lang_hits = [0, 0]

    def hook(fold, fitted, test_idx):
        if isinstance(fitted, _FittedNeural) and fitted.multitask:
            test_docs = [docs[i] for i in test_idx]
            predicted = fitted.predict_language(test_docs)
            lang_hits[0] += sum(1 for d, p in zip(test_docs, predicted) if d.language == p)
            lang_hits[1] += len(test_docs)

    report = cross_validate(
        docs, labels, pipeline, k=config.folds, seed=config.seed, label_order=label_order, fold_hook=hook
    )
    final = pipeline.fit(docs, labels, _final_seed(config.seed))
    report.extras["feature_dim"] = final.feature_dim
    if lang_hits[1]:
        report.extras["language_id_accuracy"] = lang_hits[0] / lang_hits[1]
    return _finish(corpus, config, report, final)


def _run_crosslingual(corpus: Corpus, config: ExperimentConfig, threads: int) -> ExperimentResult:
    train_docs = _select(corpus, config, config.languages)
    test_docs = _select(corpus, config, [config.test_language])
    train_labels = [d.label for d in train_docs]
    label_order = tuple(sorted(set(train_labels) | {d.label for d in test_docs}))
    pipeline = build_pipeline(config, label_order, None, threads)
    fitted = pipeline.fit(train_docs, train_labels, _final_seed(config.seed))
    return _transfer_result(corpus, config, fitted, test_docs, label_order)


def _transfer_result(corpus, config, fitted, test_docs, label_order) -> ExperimentResult:
    predicted = fitted.predict(test_docs)
    report = evaluate_predictions(
        [d.label for d in test_docs], predicted, label_order,
        provenance={"seed": config.seed, "folds": None},
    )
    report.extras["feature_dim"] = fitted.feature_dim
    return _finish(corpus, config, report, fitted)


def evaluate_with_artifact(corpus: Corpus, config: ExperimentConfig, artifact_text: str) -> ExperimentResult:
    """Cross-lingual evaluation of a previously trained artifact.

    With deterministic training this reproduces run_experiment byte for byte,
    which is what makes parse/featurize/train/evaluate compose into run.
    """
    if config.regime != "crosslingual":
        raise ConfigError("a stored model can only be evaluated in the crosslingual regime; "
                          "cross-validated regimes retrain per fold")
    model, space = artifact_from_text(artifact_text)
    test_docs = _select(corpus, config, [config.test_language])
    label_order = tuple(model.label_order if hasattr(model, "label_order") else model.cefr_order)
    pipeline = build_pipeline(config, label_order, None, 1)
    if isinstance(pipeline, _NgramPipeline):
        fitted = _FittedMatrixModel(lambda ds: pipeline._matrix(ds, space), model, space)
        fitted.feature_dim = model_input_dim(model)
    elif isinstance(pipeline, _DenseDocPipeline):
        fitted = _FittedMatrixModel(pipeline._matrix, model)
        fitted.feature_dim = model_input_dim(model)
    elif isinstance(pipeline, _CombinedPipeline):
        fitted = _FittedStacked(pipeline, space, model)
        fitted.feature_dim = model_input_dim(model.base_model)
    else:
        fitted = _FittedNeural(model, multitask=hasattr(model, "cefr_order"))
    return _transfer_result(corpus, config, fitted, test_docs, label_order)


def model_input_dim(model) -> int | None:
    if hasattr(model, "weights"):
        return model.weights.shape[1]
    if hasattr(model, "n_features"):
        return model.n_features
    return None


def _finish(corpus, config, report, fitted) -> ExperimentResult:
    report.provenance["config_digest"] = config_digest(config)
    return ExperimentResult(
        config=config,
        config_digest=config_digest(config),
        corpus_fingerprint=corpus_fingerprint(corpus),
        report=report,
        wall_clock=0.0,
        model_text=fitted.serialize() if hasattr(fitted, "serialize") else None,
        feature_space=getattr(fitted, "space", None),
    )


def run_baseline(corpus: Corpus, languages, model: str = "forest", k: int = 10, seed: int = 0,
                 test_language: str | None = None, min_per_group: int = 10,
                 model_params: dict | None = None, threads: int = 1) -> ExperimentResult:
    """Document-length-only classifier under the regime implied by the languages."""
    languages = tuple(languages)
    if test_language is not None:
        regime = "crosslingual"
    elif len(languages) == 1:
        regime = "monolingual"
    else:
        regime = "multilingual"
    config = ExperimentConfig(
        regime=regime,
        languages=languages,
        test_language=test_language,
        feature=FeatureChoice("length"),
        model=model,
        folds=k,
        seed=seed,
        min_per_group=min_per_group,
        model_params=tuple(sorted((model_params or {}).items())),
    )
    return run_experiment(corpus, config, threads)


def run_monolingual(corpus: Corpus, config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    if config.regime != "monolingual":
        raise ConfigError(f"expected a monolingual config, got {config.regime!r}")
    return run_experiment(corpus, config, threads)


def run_multilingual(corpus: Corpus, config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    if config.regime != "multilingual":
        raise ConfigError(f"expected a multilingual config, got {config.regime!r}")
    return run_experiment(corpus, config, threads)


def run_crosslingual(corpus: Corpus, config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    if config.regime != "crosslingual":
        raise ConfigError(f"expected a crosslingual config, got {config.regime!r}")
    return run_experiment(corpus, config, threads)


def result_to_json(result: ExperimentResult) -> str:
    payload = {
        "config": config_to_dict(result.config),
        "config_digest": result.config_digest,
        "corpus_fingerprint": result.corpus_fingerprint,
        "report": report_to_dict(result.report),
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def write_result(result: ExperimentResult, out_dir) -> Path:
    """Write report.json, confusion.tsv, and the fitted artifacts.

    Timing is deliberately excluded from the files so reruns with the same
    seed are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result_to_json(result), encoding="utf-8")
    (out / "confusion.tsv").write_text(confusion_to_tsv(result.report.matrix), encoding="utf-8")
    if result.model_text is not None:
        (out / "model.txt").write_text(result.model_text, encoding="utf-8")
    if result.feature_space is not None:
        save_feature_space(result.feature_space, out / "featurespace.txt")
    return out
