"""Command-line front end: parse, featurize, train, evaluate, run, report.

All randomness is controlled by --seed; --threads may change wall-clock but
never any output file. Commands exit 0 on success and nonzero with a one-line
diagnostic on failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import corpus_from_json, corpus_to_json, filter_corpus, load_corpus
from .errors import CefrkitError, ConfigError
from .evaluation import confusion_from_tsv, confusion_to_tsv, macro_f1, weighted_f1
from .experiments import (
    ExperimentConfig,
    build_pipeline,
    config_from_dict,
    evaluate_with_artifact,
    run_experiment,
    write_result,
    _final_seed,
    _select,
)
from .features import FeatureSpec, build_feature_space, save_feature_space, vectorize

_FEATURE_FLAG_MAP = {
    "word": {"kind": "ngram", "family": "word"},
    "pos": {"kind": "ngram", "family": "pos"},
    "dep": {"kind": "ngram", "family": "dep"},
    "domain": {"kind": "domain"},
    "length": {"kind": "length"},
    "combined-word": {"kind": "combined", "family": "word"},
    "combined-pos": {"kind": "combined", "family": "pos"},
    "combined-dep": {"kind": "combined", "family": "dep"},
    "embed-word": {"kind": "embed-word"},
    "embed-char": {"kind": "embed-char"},
    "embed-both": {"kind": "embed-both"},
    "multitask": {"kind": "multitask"},
}


def _load_config(args, defaults: dict | None = None) -> ExperimentConfig:
    """Config file merged with command-line overrides (flags win)."""
    raw: dict = dict(defaults or {})
    if args.config:
        file_raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(file_raw, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        raw.update(file_raw)
    if getattr(args, "regime", None):
        raw["regime"] = args.regime
    if getattr(args, "train_lang", None):
        raw["languages"] = args.train_lang.split(",")
    if getattr(args, "test_lang", None):
        raw["test_language"] = args.test_lang
    if getattr(args, "feature", None):
        feature = dict(_FEATURE_FLAG_MAP[args.feature])
        if args.min_count is not None and feature["kind"] in ("ngram", "combined"):
            feature["min_count"] = args.min_count
        raw["feature"] = feature
    elif args.min_count is not None and isinstance(raw.get("feature"), dict) \
            and raw["feature"].get("kind") in ("ngram", "combined"):
        raw["feature"]["min_count"] = args.min_count
    if getattr(args, "model", None):
        raw["model"] = args.model
    if args.seed is not None:
        raw["seed"] = args.seed
    if getattr(args, "folds", None) is not None:
        raw["folds"] = args.folds
    if getattr(args, "allow_lexical_crosslingual", False):
        raw["allow_lexical_crosslingual"] = True
    return config_from_dict(raw)


def _read_corpus(args):
    if args.corpus:
        return corpus_from_json(Path(args.corpus).read_text(encoding="utf-8"))
    if args.manifest:
        return load_corpus(args.manifest, args.base_dir)
    raise ConfigError("need --corpus (dump) or --manifest (CoNLL-U corpus)")


def _cmd_parse(args) -> int:
    corpus = load_corpus(args.manifest, args.base_dir)
    if not args.no_filter:
        corpus = filter_corpus(corpus, args.min_per_group)
    Path(args.out).write_text(corpus_to_json(corpus), encoding="utf-8")
    print(f"wrote {len(corpus)} documents to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    corpus = _read_corpus(args)
    config = _load_config(args)
    if config.feature.spec is None:
        raise ConfigError("featurize needs an n-gram feature (word/pos/dep or combined-*)")
    docs = _select(corpus, config, config.languages)
    space = build_feature_space(docs, config.feature.spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_feature_space(space, out_dir / "featurespace.txt")
    lines = []
    for doc in docs:
        vec = vectorize(doc, space)
        cells = ",".join(f"{i}:{int(v)}" for i, v in zip(vec.indices.tolist(), vec.values.tolist()))
        label = "unrated" if doc.label is None else doc.label.name
        lines.append(f"{doc.id}\t{doc.language}\t{label}\t{cells}")
    (out_dir / "vectors.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"feature space: {space.dim} keys; vectors for {len(docs)} documents in {out_dir}")
    return 0


def _cmd_train(args) -> int:
    corpus = _read_corpus(args)
    config = _load_config(args)
    docs = _select(corpus, config, config.languages)
    labels = [d.label for d in docs]
    label_order = tuple(sorted(set(labels)))
    lang_order = tuple(sorted({d.language for d in docs}))
    pipeline = build_pipeline(config, label_order, lang_order, args.threads)
    fitted = pipeline.fit(docs, labels, _final_seed(config.seed))
    Path(args.out).write_text(fitted.serialize(), encoding="utf-8")
    print(f"trained {config.model}/{config.feature.kind} on {len(docs)} documents -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    corpus = _read_corpus(args)
    config = _load_config(args)
    if args.model:
        result = evaluate_with_artifact(corpus, config, Path(args.model).read_text(encoding="utf-8"))
        result.model_text = None  # evaluate does not rewrite the artifact
        result.feature_space = None
    else:
        result = run_experiment(corpus, config, threads=args.threads)
        result.model_text = None
        result.feature_space = None
    write_result(result, args.out_dir)
    print(f"weighted F1 {result.report.weighted_f1:.3f} -> {args.out_dir}/report.json")
    print(f"wall-clock {result.wall_clock:.2f}s", file=sys.stderr)
    return 0


def _cmd_run(args) -> int:
    corpus = _read_corpus(args)
    config = _load_config(args)
    result = run_experiment(corpus, config, threads=args.threads)
    write_result(result, args.out_dir)
    print(f"weighted F1 {result.report.weighted_f1:.3f} -> {args.out_dir}/report.json")
    print(f"wall-clock {result.wall_clock:.2f}s", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    text = Path(args.path).read_text(encoding="utf-8")
    if args.path.endswith(".tsv") or text.startswith("true\\pred\t"):
        cm = confusion_from_tsv(text)
        print(f"labels: {', '.join(str(l) for l in cm.label_order)}")
        print(f"examples: {cm.total}")
        print(f"weighted F1 {weighted_f1(cm):.3f}")
        print(f"macro F1 {macro_f1(cm):.3f}")
        return 0
    payload = json.loads(text)
    report = payload.get("report", payload)
    print(f"regime: {payload.get('config', {}).get('regime', '?')}")
    print(f"weighted F1 {report['weighted_f1']:.3f}")
    print(f"macro F1 {report['macro_f1']:.3f}")
    print(f"adjacency share {report['adjacency_share']:.3f}"
          + ("" if report.get("adjacency_defined", True) else " (no errors; undefined)"))
    for label, metrics in sorted(report.get("per_class", {}).items()):
        print(
            f"  {label}: P {metrics['precision']:.3f} R {metrics['recall']:.3f} "
            f"F1 {metrics['f1']:.3f} (n={metrics['support']})"
        )
    return 0


def _add_common(parser, corpus=True, config=True, threads=True):
    if corpus:
        parser.add_argument("--corpus", help="internal corpus dump (from the parse command)")
        parser.add_argument("--manifest", help="manifest TSV referencing CoNLL-U files")
        parser.add_argument("--base-dir", help="base directory for manifest paths")
    if config:
        parser.add_argument("--config", help="experiment config JSON")
        parser.add_argument("--regime", choices=("monolingual", "multilingual", "crosslingual"))
        parser.add_argument("--train-lang", help="training language(s), comma-separated")
        parser.add_argument("--test-lang", help="held-out language (crosslingual)")
        parser.add_argument("--feature", choices=sorted(_FEATURE_FLAG_MAP))
        parser.add_argument("--model", choices=("softmax", "forest", "neural"))
        parser.add_argument("--min-count", type=int, help="n-gram count threshold")
        parser.add_argument("--folds", type=int)
        parser.add_argument("--allow-lexical-crosslingual", action="store_true")
    parser.add_argument("--seed", type=int)
    if threads:
        parser.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cefrkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="load CoNLL-U files via a manifest into a corpus dump")
    p.add_argument("--manifest", required=True)
    p.add_argument("--base-dir")
    p.add_argument("--out", required=True)
    p.add_argument("--min-per-group", type=int, default=10)
    p.add_argument("--no-filter", action="store_true", help="keep unrated docs and small groups")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("featurize", help="build a feature space and document vectors")
    _add_common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train a model on the configured languages")
    _add_common(p)
    p.add_argument("--featurespace", help="reuse a stored feature space (optional)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a config (or a stored model) and write reports")
    _add_common(p)
    p.add_argument("--model-file", dest="model_file", help=argparse.SUPPRESS)
    p.add_argument("--model-artifact", dest="model", default=None,
                   help="stored model artifact to evaluate (crosslingual only)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    _add_common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="render a stored report.json or confusion.tsv")
    p.add_argument("path")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CefrkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
