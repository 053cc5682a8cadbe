import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from app.config import Settings, load_settings
from app.exceptions import FeedbackError, UsageError
from app.models.classifier import ModelKind
from app.models.corpus import Corpus, Task
from app.models.features import FeatureKind
from app.services.classifier_service import TrainedClassifier, predict_texts
from app.services.corpus_service import (
    attach_annotations,
    format_stats_table,
    length_bucket_stats,
    load_annotations,
    load_corpus,
    save_annotations,
    save_corpus,
    split_train_test,
)
from app.services.embeddings import save_embeddings, train_word2vec
from app.services.experiment import build_spec, format_grid, run_experiment, run_grid, w2v_config
from app.services.preprocess import load_stopwords, preprocess_corpus
from app.services.report_service import FORMATS, analyze_batch, build_report, emit, model_info
from app.services.synth import FeedbackSynthesizer

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class CliParser(argparse.ArgumentParser):
    """argparse that reports bad flags as usage errors (exit code 1)."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _choices(enum_type, raw: str) -> List[Any]:
    values = []
    for item in raw.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            values.append(enum_type(item))
        except ValueError:
            allowed = ", ".join(e.value for e in enum_type)
            raise UsageError(f"unknown {enum_type.__name__} '{item}' (choose from {allowed})")
    return values


def _formats(raw: str) -> List[str]:
    formats = [f.strip().lower() for f in raw.split(",") if f.strip()]
    unknown = sorted(set(formats) - set(FORMATS))
    if unknown or not formats:
        raise UsageError(f"report formats must be a subset of {','.join(FORMATS)}, got '{raw}'")
    return formats


def _load_inputs(corpus_path: str, annotations_path: Optional[str]) -> Corpus:
    corpus = load_corpus(corpus_path)
    if annotations_path:
        corpus = attach_annotations(corpus, load_annotations(annotations_path))
    return corpus


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    semesters = [s.strip() for s in args.semesters.split(",") if s.strip()]
    synthesizer = FeedbackSynthesizer(separability=args.separability, semesters=semesters)
    corpus = synthesizer.generate(args.size, seed=settings.seed)
    annotations_out = args.annotations_out or str(Path(args.out).with_suffix(".conll"))
    save_corpus(corpus, args.out)
    save_annotations(corpus.annotations, annotations_out)
    print(f"Wrote {len(corpus)} records to {args.out} and annotations to {annotations_out}")
    return 0


def cmd_split(args: argparse.Namespace, settings: Settings) -> int:
    corpus = load_corpus(args.corpus)
    train, test = split_train_test(corpus, settings.split_ratio, settings.seed)
    out = Path(args.out_dir)
    save_corpus(train, str(out / "train.tsv"))
    save_corpus(test, str(out / "test.tsv"))
    print(f"train.tsv: {len(train)} records, test.tsv: {len(test)} records")
    return 0


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    tasks = list(Task) if args.labeling == "both" else [Task(args.labeling)]
    stopwords = load_stopwords(settings.stopwords_path)
    corpus = load_corpus(args.corpus)
    document: Dict[str, Any] = {}
    for task in tasks:
        stats = length_bucket_stats(corpus, task, stopwords)
        print(f"Distribution of {task.value} labels by sentence length ({stats.n_records} records)")
        print(format_stats_table(stats))
        print()
        document[task.value] = stats.model_dump(mode="json")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_train_embeddings(args: argparse.Namespace, settings: Settings) -> int:
    config = w2v_config(settings)
    stopwords = load_stopwords(settings.stopwords_path)
    corpus = load_corpus(args.corpus)
    prep = preprocess_corpus(corpus, stopwords)
    table = train_word2vec([prep[record_id] for record_id in corpus.ids], config)
    save_embeddings(table, args.out)
    print(f"Wrote {len(table)} x {table.dimension} embeddings to {args.out}")
    return 0


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    features = _choices(FeatureKind, args.features) if args.features else []
    spec = build_spec(settings, Task(args.task), ModelKind(args.model), features, args.embeddings)
    if spec.needs_annotations and not args.annotations:
        raise UsageError(f"{spec.features_label} features need --annotations")
    corpus = _load_inputs(args.corpus, args.annotations)
    result = run_experiment(spec, corpus, args.out_dir)
    print(" | ".join(result.row))
    return 0


def cmd_grid(args: argparse.Namespace, settings: Settings) -> int:
    tasks = _choices(Task, args.tasks)
    if not tasks:
        raise UsageError("--tasks needs at least one task")
    corpus = _load_inputs(args.corpus, args.annotations)
    grid = run_grid(tasks, corpus, args.out_dir, settings, embeddings_path=args.embeddings)
    print(format_grid(grid))
    for task, name in grid.best.items():
        print(f"Best {task} model: {name} -> best_{task}.json")
    return 0


def cmd_predict(args: argparse.Namespace, settings: Settings) -> int:
    classifier = TrainedClassifier.load(args.model, embeddings_path=args.embeddings)
    if args.text is not None:
        results = predict_texts(classifier, args.text)
        for text, (label, flagged) in zip(args.text, results):
            print(f"{label.value}\t{'flagged' if flagged else ''}\t{text}".rstrip("\t"))
        return 0

    corpus = _load_inputs(args.corpus, args.annotations)
    results = classifier.predict_corpus(corpus)
    rows = [(r.id, label.value, int(flagged)) for r, (label, flagged) in zip(corpus.records, results)]
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, delimiter="\t", lineterminator="\n")
            writer.writerow(["id", classifier.task.value, "flagged"])
            writer.writerows(rows)
        print(f"Wrote {len(rows)} predictions to {args.out}")
    else:
        for row in rows:
            print("\t".join(str(v) for v in row))
    return 0


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    formats = _formats(args.formats)
    sentiment_model = TrainedClassifier.load(args.sentiment_model)
    topic_model = TrainedClassifier.load(args.topic_model)
    corpus = _load_inputs(args.corpus, args.annotations)
    records = analyze_batch(corpus, sentiment_model, topic_model)
    bundle = build_report(
        records, {Task.SENTIMENT.value: model_info(sentiment_model), Task.TOPIC.value: model_info(topic_model)}
    )
    written = emit(bundle, formats, args.out_dir)
    print(f"Wrote {len(written)} files for {len(bundle.snapshots)} semesters to {args.out_dir}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value settings file; flags override it")
    parser.add_argument("--seed", type=int, help="random seed (default 42)")
    parser.add_argument("--stopwords", dest="stopwords_path", help="stopword list, one word per line")
    parser.add_argument("--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging")


def _add_ngram_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ratio", dest="split_ratio", type=float, help="train share of the split (default 0.8)")
    parser.add_argument("--min-df", dest="min_df", type=int)
    parser.add_argument("--top-k", dest="chi2_top_k", type=int, help="chi-square feature selection")
    parser.add_argument("--alpha", dest="nb_alpha", type=float, help="NB additive smoothing")
    parser.add_argument("--sigma2", dest="maxent_sigma2", type=float, help="Maxent prior variance")
    parser.add_argument("--maxent-lr", dest="maxent_learning_rate", type=float)
    parser.add_argument("--maxent-epochs", dest="maxent_epochs", type=int)


def _add_network_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--layers", dest="lstm_layers", type=int)
    parser.add_argument("--hidden", dest="lstm_hidden", type=int)
    parser.add_argument("--lstm-epochs", dest="lstm_epochs", type=int)
    parser.add_argument("--lstm-lr", dest="lstm_learning_rate", type=float)
    parser.add_argument("--dropout", dest="lstm_dropout", type=float)
    parser.add_argument("--clip-norm", dest="lstm_clip_norm", type=float)
    parser.add_argument("--no-peephole", dest="lstm_peephole", action="store_const", const=False)
    parser.add_argument("--fine-tune", dest="lstm_fine_tune", action="store_const", const=True)


def _add_w2v_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dimension", dest="w2v_dimension", type=int)
    parser.add_argument("--window", dest="w2v_window", type=int)
    parser.add_argument("--negative", dest="w2v_negative", type=int)
    parser.add_argument("--w2v-epochs", dest="w2v_epochs", type=int)
    parser.add_argument("--w2v-lr", dest="w2v_learning_rate", type=float)
    parser.add_argument("--min-count", dest="w2v_min_count", type=int)


def build_parser() -> CliParser:
    parser = CliParser(prog="feedback", description="Student feedback sentiment and topic classification")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    synth = commands.add_parser("synth", help="generate a synthetic labeled corpus")
    synth.add_argument("--size", type=int, default=1000)
    synth.add_argument("--separability", type=float, default=1.0)
    synth.add_argument("--semesters", default="2015-1,2015-2")
    synth.add_argument("--out", required=True)
    synth.add_argument("--annotations-out")
    synth.set_defaults(handler=cmd_synth)

    split = commands.add_parser("split", help="write train.tsv and test.tsv")
    split.add_argument("--corpus", required=True)
    split.add_argument("--out-dir", required=True)
    split.add_argument("--ratio", dest="split_ratio", type=float)
    split.set_defaults(handler=cmd_split)

    stats = commands.add_parser("stats", help="label distribution by sentence length")
    stats.add_argument("--corpus", required=True)
    stats.add_argument("--labeling", choices=["sentiment", "topic", "both"], default="both")
    stats.add_argument("--out", help="also write the tables as JSON")
    stats.set_defaults(handler=cmd_stats)

    embeddings = commands.add_parser("train-embeddings", help="train Word2Vec on a corpus")
    embeddings.add_argument("--corpus", required=True)
    embeddings.add_argument("--out", required=True)
    _add_w2v_flags(embeddings)
    embeddings.set_defaults(handler=cmd_train_embeddings)

    run = commands.add_parser("run", help="train and evaluate one model")
    run.add_argument("--task", choices=[t.value for t in Task], required=True)
    run.add_argument("--model", choices=[m.value for m in ModelKind], required=True)
    run.add_argument("--features", help="comma-separated: unigram,bigram,dep,pos")
    run.add_argument("--embeddings", help="word vector file (lstm, bilstm)")
    run.add_argument("--corpus", required=True)
    run.add_argument("--annotations")
    run.add_argument("--out-dir", required=True)
    _add_ngram_flags(run)
    _add_network_flags(run)
    run.set_defaults(handler=cmd_run)

    grid = commands.add_parser("grid", help="run the full model/feature ablation")
    grid.add_argument("--tasks", default="sentiment,topic")
    grid.add_argument("--corpus", required=True)
    grid.add_argument("--annotations")
    grid.add_argument("--embeddings", help="word vectors; trained on the train split when omitted")
    grid.add_argument("--out-dir", required=True)
    _add_ngram_flags(grid)
    _add_network_flags(grid)
    _add_w2v_flags(grid)
    grid.set_defaults(handler=cmd_grid)

    predict = commands.add_parser("predict", help="label feedback with a trained model")
    predict.add_argument("--model", required=True)
    predict.add_argument("--embeddings", help="override the model's embedding file path")
    source = predict.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus")
    source.add_argument("--text", action="append")
    predict.add_argument("--annotations")
    predict.add_argument("--out", help="TSV output; printed when omitted")
    predict.set_defaults(handler=cmd_predict)

    report = commands.add_parser("report", help="per-semester distributions and trends")
    report.add_argument("--corpus", required=True)
    report.add_argument("--sentiment-model", required=True)
    report.add_argument("--topic-model", required=True)
    report.add_argument("--annotations")
    report.add_argument("--out-dir", required=True)
    report.add_argument("--formats", default="json,csv,svg")
    report.set_defaults(handler=cmd_report)

    for sub in (synth, split, stats, embeddings, run, grid, predict, report):
        _add_common(sub)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in Settings.model_fields if getattr(args, name, None) is not None}


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = load_settings(args.config, **_overrides(args))
        configure_logging("DEBUG" if args.verbose else settings.log_level)
        return args.handler(args, settings)
    except FeedbackError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
