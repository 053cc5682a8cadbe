import json
import logging
import shutil
from pathlib import Path
from typing import AbstractSet, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.config import Settings
from app.exceptions import DataError, UsageError
from app.models.classifier import ModelKind, NetworkConfig, TrainConfig, W2vConfig
from app.models.corpus import Corpus, Task, TokenAnnotation
from app.models.embedding import EmbeddingTable
from app.models.experiment import ClassifierArtifact, ExperimentResult, ExperimentSpec, GridResult
from app.models.features import FeatureKind
from app.models.recurrent import Direction
from app.services.classifier_service import TrainedClassifier, save_artifact, token_ids
from app.services.corpus_service import split_train_test
from app.services.embeddings import file_fingerprint, load_embeddings, save_embeddings, train_word2vec
from app.services.evaluation import confusion, format_table, metrics, table_row
from app.services.features import build_vocabulary, chi_square_select, extract, vectorize
from app.services.maxent import train_maxent
from app.services.naive_bayes import train_nb
from app.services.preprocess import PreprocessedCorpus, load_stopwords, preprocess_corpus
from app.services.recurrent import train_network

logger = logging.getLogger(__name__)

GRID_FEATURES: List[List[FeatureKind]] = [
    [FeatureKind.UNIGRAM],
    [FeatureKind.BIGRAM],
    [FeatureKind.BIGRAM, FeatureKind.DEP],
    [FeatureKind.BIGRAM, FeatureKind.DEP, FeatureKind.POS],
]


def build_spec(
    settings: Settings,
    task: Task,
    model: ModelKind,
    features: Sequence[FeatureKind] = (),
    embeddings_path: Optional[str] = None,
) -> ExperimentSpec:
    """ExperimentSpec from Settings; invalid combinations are usage errors."""
    try:
        return ExperimentSpec(
            task=task,
            model=model,
            features=list(features),
            embeddings_path=embeddings_path,
            split_ratio=settings.split_ratio,
            seed=settings.seed,
            min_df=settings.min_df,
            chi2_top_k=settings.chi2_top_k,
            nb_alpha=settings.nb_alpha,
            maxent=TrainConfig(
                learning_rate=settings.maxent_learning_rate,
                epochs=settings.maxent_epochs,
                sigma2=settings.maxent_sigma2,
                tolerance=settings.maxent_tolerance,
                seed=settings.seed,
            ),
            network=NetworkConfig(
                layers=settings.lstm_layers,
                hidden=settings.lstm_hidden,
                embedding_dim=settings.w2v_dimension,
                epochs=settings.lstm_epochs,
                learning_rate=settings.lstm_learning_rate,
                dropout=settings.lstm_dropout,
                clip_norm=settings.lstm_clip_norm,
                peephole=settings.lstm_peephole,
                fine_tune_embeddings=settings.lstm_fine_tune,
                seed=settings.seed,
            ),
            stopwords_path=settings.stopwords_path,
        )
    except ValidationError as e:
        error = e.errors()[0]
        raise UsageError(f"Invalid experiment: {error['msg']}") from e


def w2v_config(settings: Settings) -> W2vConfig:
    try:
        return W2vConfig(
            dimension=settings.w2v_dimension,
            window=settings.w2v_window,
            negative=settings.w2v_negative,
            epochs=settings.w2v_epochs,
            learning_rate=settings.w2v_learning_rate,
            min_count=settings.w2v_min_count,
            seed=settings.seed,
        )
    except ValidationError as e:
        raise UsageError(f"Invalid word2vec settings: {e.errors()[0]['msg']}") from e


def gold_labels(corpus: Corpus, task: Task) -> List[int]:
    missing = [r.id for r in corpus.records if r.label_for(task) is None]
    if missing:
        raise DataError(f"records without a {task.value} label: {missing[:10]}")
    return [r.label_for(task) for r in corpus.records]


def _annotations(corpus: Corpus, record_id: str, kinds: AbstractSet[FeatureKind]) -> Optional[List[TokenAnnotation]]:
    if not any(kind.needs_annotations for kind in kinds):
        return None
    if corpus.annotations is None or record_id not in corpus.annotations:
        raise DataError(f"record {record_id} has no annotations")
    return corpus.annotations[record_id]


def _train_ngram(
    spec: ExperimentSpec, train: Corpus, prep: PreprocessedCorpus, labels: List[int], stopwords: AbstractSet[str]
) -> ClassifierArtifact:
    kinds = set(spec.features)
    n_classes = spec.task.n_classes
    bags = [extract(prep[r.id], _annotations(train, r.id, kinds), kinds) for r in train.records]
    vocab = build_vocabulary(bags, spec.min_df)
    docs = [vectorize(bag, vocab) for bag in bags]
    if spec.chi2_top_k:
        vocab = chi_square_select(docs, labels, vocab, spec.chi2_top_k, n_classes=n_classes)
        docs = [vectorize(bag, vocab) for bag in bags]

    if spec.model is ModelKind.NB:
        model = train_nb(docs, labels, alpha=spec.nb_alpha, n_classes=n_classes, vocab_size=len(vocab))
    else:
        model = train_maxent(docs, labels, spec.maxent, n_classes=n_classes, vocab_size=len(vocab))
    return ClassifierArtifact(
        task=spec.task,
        model=spec.model,
        features=spec.features,
        vocabulary=vocab,
        vocabulary_fingerprint=vocab.fingerprint(),
        stopwords=sorted(stopwords),
        payload=model.model_dump(),
    )


def _train_recurrent(
    spec: ExperimentSpec, train: Corpus, prep: PreprocessedCorpus, labels: List[int], stopwords: AbstractSet[str]
) -> Tuple[ClassifierArtifact, EmbeddingTable]:
    table = load_embeddings(spec.embeddings_path)
    config = spec.network.model_copy(update={"embedding_dim": table.dimension})
    examples = [(token_ids(table, prep[r.id]), label) for r, label in zip(train.records, labels)]
    oov = sum(int((ids < 0).sum()) for ids, _ in examples)
    if oov:
        logger.info(f"{oov} training tokens are outside the embedding table and map to zero vectors")
    direction = Direction.BIDIRECTIONAL if spec.model is ModelKind.BILSTM else Direction.FORWARD
    network, _ = train_network(
        examples, config, direction, n_classes=spec.task.n_classes, embedding_matrix=table.input_vectors
    )
    artifact = ClassifierArtifact(
        task=spec.task,
        model=spec.model,
        embeddings_path=spec.embeddings_path,
        embeddings_fingerprint=file_fingerprint(spec.embeddings_path),
        stopwords=sorted(stopwords),
        payload=network.to_payload(),
    )
    return artifact, table


def run_experiment(spec: ExperimentSpec, corpus: Corpus, out_dir: str) -> ExperimentResult:
    """preprocess -> split -> features/embeddings -> train -> evaluate -> write artifacts."""
    if spec.needs_annotations and corpus.annotations is None:
        raise UsageError(f"{spec.features_label} features need an annotation file")
    stopwords = load_stopwords(spec.stopwords_path)
    train, test = split_train_test(corpus, spec.split_ratio, spec.seed)
    if len(test) == 0:
        raise DataError(f"split ratio {spec.split_ratio} leaves no test records out of {len(corpus)}")
    y_train = gold_labels(train, spec.task)
    y_test = gold_labels(test, spec.task)
    prep_train = preprocess_corpus(train, stopwords)
    prep_test = preprocess_corpus(test, stopwords)

    logger.info(f"Running {spec.name} on {len(train)} train / {len(test)} test records")
    if spec.model.is_recurrent:
        artifact, table = _train_recurrent(spec, train, prep_train, y_train, stopwords)
        classifier = TrainedClassifier(artifact, table)
    else:
        artifact = _train_ngram(spec, train, prep_train, y_train, stopwords)
        classifier = TrainedClassifier(artifact)

    kinds = set(spec.features)
    predicted = []
    for record in test.records:
        label, _ = classifier.predict_tokens(prep_test[record.id], _annotations(test, record.id, kinds))
        predicted.append(label)

    labels = [label.value for label in spec.task.labels]
    report = metrics(confusion(y_test, predicted, spec.task.n_classes), labels)
    row = table_row(spec.model.display_name, spec.features_label, report)

    out = Path(out_dir)
    artifact_path = out / f"{spec.name}.model.json"
    save_artifact(artifact, str(artifact_path))
    result = ExperimentResult(
        spec=spec,
        metrics=report,
        row=row,
        artifact_path=str(artifact_path),
        n_train=len(train),
        n_test=len(test),
        flagged_test=len(prep_test.flagged),
    )
    write_result(result, out)
    logger.info(f"{spec.name}: P={row[2]} R={row[3]} F1={row[4]} (weighted)")
    return result


def metrics_json(result: ExperimentResult) -> str:
    """Byte-stable metrics document: sorted keys, no timestamps or artifact paths."""
    document = result.model_dump(mode="json", exclude={"artifact_path"})
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_result(result: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{result.spec.name}.metrics.json").write_text(metrics_json(result), encoding="utf-8")
    (out / f"{result.spec.name}.row.txt").write_text(format_table([result.row]) + "\n", encoding="utf-8")


def train_grid_embeddings(corpus: Corpus, settings: Settings, path: str) -> str:
    """Word2Vec on the training split only, saved in the text format."""
    train, _ = split_train_test(corpus, settings.split_ratio, settings.seed)
    prep = preprocess_corpus(train, load_stopwords(settings.stopwords_path))
    table = train_word2vec([prep[record_id] for record_id in train.ids], w2v_config(settings))
    save_embeddings(table, path)
    return path


def run_grid(
    tasks: Sequence[Task],
    corpus: Corpus,
    out_dir: str,
    settings: Settings,
    embeddings_path: Optional[str] = None,
) -> GridResult:
    """The full ablation: four NB rows, four Maxent rows, LSTM and Bi-LSTM per task."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # validate every row before any training
    plan = {}
    for task in tasks:
        specs = [build_spec(settings, task, model, kinds) for model in (ModelKind.NB, ModelKind.MAXENT) for kinds in GRID_FEATURES]
        plan[task] = specs

    if embeddings_path is None:
        embeddings_path = train_grid_embeddings(corpus, settings, str(out / "embeddings.txt"))

    grid = GridResult()
    for task, specs in plan.items():
        specs = specs + [build_spec(settings, task, model, embeddings_path=embeddings_path) for model in (ModelKind.LSTM, ModelKind.BILSTM)]
        rows: List[ExperimentResult] = []
        for spec in specs:
            if spec.needs_annotations and corpus.annotations is None:
                logger.warning(f"Skipping {spec.name}: no annotations supplied")
                grid.skipped.append(spec.name)
                continue
            rows.append(run_experiment(spec, corpus, str(out)))
        grid.results[task.value] = rows

        # max keeps the first of equal scores
        best = max(rows, key=lambda r: r.metrics.weighted.f1)
        shutil.copyfile(best.artifact_path, out / f"best_{task.value}.json")
        grid.best[task.value] = best.spec.name
        logger.info(f"Best {task.value} model: {best.spec.name} (weighted F1={best.metrics.weighted.f1:.3f})")

    (out / "grid.txt").write_text(format_grid(grid) + "\n", encoding="utf-8")
    document = {task: [json.loads(metrics_json(r)) for r in rows] for task, rows in grid.results.items()}
    document = {"results": document, "best": grid.best, "skipped": grid.skipped}
    (out / "grid.json").write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return grid


def format_grid(grid: GridResult) -> str:
    tables = []
    for task, rows in grid.results.items():
        tables.append(format_table([r.row for r in rows], title=f"Task: {task}"))
    return "\n\n".join(tables)
