#!/usr/bin/env python3
"""
End-to-end experiments: single runs, the ablation grid and the synthetic generator.
"""
import json

import pytest

from app.config import load_settings
from app.exceptions import DataError, UsageError
from app.models.classifier import ModelKind, TrainConfig
from app.models.corpus import Corpus, Task
from app.models.features import FeatureKind
from app.services.classifier_service import TrainedClassifier, predict_texts
from app.services.corpus_service import length_bucket_stats
from app.services.embeddings import save_embeddings
from app.services.experiment import build_spec, metrics_json, run_experiment, run_grid
from app.services.features import build_vocabulary, extract, vectorize
from app.services.maxent import predict_maxent, train_maxent
from app.services.naive_bayes import predict_nb, train_nb
from app.services.preprocess import preprocess_corpus
from app.services.synth import LENGTH_SHARES, SENTIMENT_SHARES, TOPIC_SHARES, FeedbackSynthesizer, allocate
from conftest import class_embeddings

UNI, BI, DEP, POS = FeatureKind.UNIGRAM, FeatureKind.BIGRAM, FeatureKind.DEP, FeatureKind.POS


@pytest.fixture
def small_settings():
    return load_settings(
        maxent_epochs=30,
        lstm_layers=1,
        lstm_hidden=4,
        lstm_epochs=1,
        lstm_dropout=0.0,
        w2v_dimension=8,
        w2v_epochs=1,
    )


@pytest.fixture(scope="module")
def synthetic_corpus():
    return FeedbackSynthesizer(separability=1.0).generate(1000, seed=1)


def test_single_run_writes_row_metrics_and_model(balanced_corpus, small_settings, tmp_path):
    spec = build_spec(small_settings, Task.SENTIMENT, ModelKind.NB, [BI])
    result = run_experiment(spec, balanced_corpus, str(tmp_path))
    assert result.row[:2] == ["NB", "Bi-gram"]
    assert (result.n_train, result.n_test) == (96, 24)
    assert (tmp_path / "sentiment_nb_bigram.model.json").is_file()
    metrics = json.loads((tmp_path / "sentiment_nb_bigram.metrics.json").read_text(encoding="utf-8"))
    assert "artifact_path" not in metrics
    assert metrics["row"] == result.row
    row_table = (tmp_path / "sentiment_nb_bigram.row.txt").read_text(encoding="utf-8")
    assert [c.strip() for c in row_table.splitlines()[2].split("|")][:2] == ["NB", "Bi-gram"]


def test_feature_order_is_canonical(small_settings):
    spec = build_spec(small_settings, Task.TOPIC, ModelKind.MAXENT, [POS, BI, DEP])
    assert spec.features == [BI, DEP, POS]
    assert spec.features_label == "Bi-gram+DEP+POS"
    assert spec.name == "topic_maxent_bigram-dep-pos"


@pytest.mark.parametrize(
    "model, features, embeddings",
    [
        (ModelKind.BILSTM, [], None),
        (ModelKind.LSTM, [UNI], "vectors.txt"),
        (ModelKind.NB, [], None),
        (ModelKind.MAXENT, [UNI], "vectors.txt"),
    ],
)
def test_invalid_combinations_are_usage_errors(small_settings, model, features, embeddings):
    with pytest.raises(UsageError):
        build_spec(small_settings, Task.SENTIMENT, model, features, embeddings_path=embeddings)


def test_dependency_features_need_annotations(balanced_corpus, small_settings, tmp_path):
    bare = Corpus(records=balanced_corpus.records)
    spec = build_spec(small_settings, Task.SENTIMENT, ModelKind.NB, [BI, DEP])
    with pytest.raises(UsageError):
        run_experiment(spec, bare, str(tmp_path / "out"))
    assert not (tmp_path / "out").exists()


def test_unlabeled_records_are_a_data_error(balanced_corpus, small_settings, tmp_path):
    records = [r.model_copy(update={"topic": None}) if i == 0 else r for i, r in enumerate(balanced_corpus.records)]
    spec = build_spec(small_settings, Task.TOPIC, ModelKind.NB, [UNI])
    with pytest.raises(DataError):
        run_experiment(spec, Corpus(records=records), str(tmp_path))


@pytest.mark.parametrize(
    "model, features",
    [(ModelKind.NB, [UNI]), (ModelKind.MAXENT, [BI, DEP, POS]), (ModelKind.LSTM, []), (ModelKind.BILSTM, [])],
)
def test_metrics_file_is_byte_identical_across_runs(balanced_corpus, small_settings, embedding_file, tmp_path, model, features):
    embeddings = embedding_file if model.is_recurrent else None
    spec = build_spec(small_settings, Task.TOPIC, model, features, embeddings_path=embeddings)
    first = run_experiment(spec, balanced_corpus, str(tmp_path / "a"))
    second = run_experiment(spec, balanced_corpus, str(tmp_path / "b"))
    assert metrics_json(first) == metrics_json(second)
    name = f"{spec.name}.metrics.json"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_saved_model_reproduces_test_predictions(balanced_corpus, small_settings, tmp_path):
    spec = build_spec(small_settings, Task.SENTIMENT, ModelKind.MAXENT, [UNI, BI])
    result = run_experiment(spec, balanced_corpus, str(tmp_path))
    classifier = TrainedClassifier.load(result.artifact_path)
    texts = [r.text for r in balanced_corpus.records[:10]]
    first = predict_texts(classifier, texts)
    assert predict_texts(TrainedClassifier.load(result.artifact_path), texts) == first


def test_recurrent_model_rejects_changed_embeddings(balanced_corpus, small_settings, embedding_file, tmp_path):
    spec = build_spec(small_settings, Task.SENTIMENT, ModelKind.LSTM, embeddings_path=embedding_file)
    result = run_experiment(spec, balanced_corpus, str(tmp_path))
    assert TrainedClassifier.load(result.artifact_path).predict_text("thầy rất hay")[1] is False

    table = class_embeddings()
    table.input_vectors[0, 0] = 2.0
    save_embeddings(table, embedding_file)
    with pytest.raises(DataError):
        TrainedClassifier.load(result.artifact_path)


def test_dep_pos_model_cannot_label_raw_text(balanced_corpus, small_settings, tmp_path):
    spec = build_spec(small_settings, Task.SENTIMENT, ModelKind.NB, [BI, POS])
    result = run_experiment(spec, balanced_corpus, str(tmp_path))
    with pytest.raises(UsageError):
        predict_texts(TrainedClassifier.load(result.artifact_path), ["thầy hay"])


@pytest.mark.parametrize("task", list(Task))
@pytest.mark.parametrize("model", [ModelKind.NB, ModelKind.MAXENT])
def test_ngram_models_separate_synthetic_classes(synthetic_corpus, tmp_path, task, model):
    settings = load_settings()
    result = run_experiment(build_spec(settings, task, model, [UNI]), synthetic_corpus, str(tmp_path))
    assert (result.n_train, result.n_test) == (800, 200)
    assert result.metrics.weighted.f1 >= 0.95


@pytest.mark.parametrize("task", list(Task))
@pytest.mark.parametrize("model", [ModelKind.LSTM, ModelKind.BILSTM])
def test_recurrent_models_separate_synthetic_classes(synthetic_corpus, embedding_file, tmp_path, task, model):
    settings = load_settings(lstm_layers=1, lstm_hidden=8, lstm_epochs=10, lstm_learning_rate=0.1, lstm_dropout=0.0)
    spec = build_spec(settings, task, model, embeddings_path=embedding_file)
    result = run_experiment(spec, synthetic_corpus, str(tmp_path))
    assert (result.n_train, result.n_test) == (800, 200)
    assert result.metrics.weighted.f1 >= 0.95


def test_grid_with_annotations(balanced_corpus, small_settings, tmp_path):
    grid = run_grid([Task.SENTIMENT], balanced_corpus, str(tmp_path), small_settings)
    rows = grid.results["sentiment"]
    assert len(rows) == 10
    assert [r.row[0] for r in rows] == ["NB"] * 4 + ["Maxent"] * 4 + ["LSTM", "Bi-LSTM"]
    assert [r.row[1] for r in rows[:4]] == ["Uni-gram", "Bi-gram", "Bi-gram+DEP", "Bi-gram+DEP+POS"]
    assert rows[-1].row[1] == "Word2Vec"
    assert grid.skipped == []
    assert (tmp_path / "embeddings.txt").is_file()
    assert (tmp_path / "grid.txt").read_text(encoding="utf-8").startswith("Task: sentiment")

    best = max(rows, key=lambda r: r.metrics.weighted.f1)
    assert grid.best["sentiment"] == best.spec.name
    assert (tmp_path / "best_sentiment.json").read_bytes() == (tmp_path / f"{best.spec.name}.model.json").read_bytes()
    document = json.loads((tmp_path / "grid.json").read_text(encoding="utf-8"))
    assert len(document["results"]["sentiment"]) == 10


def test_grid_without_annotations_skips_dep_pos_rows(balanced_corpus, small_settings, embedding_file, tmp_path):
    bare = Corpus(records=balanced_corpus.records)
    grid = run_grid([Task.TOPIC], bare, str(tmp_path), small_settings, embeddings_path=embedding_file)
    assert len(grid.results["topic"]) == 6
    assert len(grid.skipped) == 4
    assert all("dep" in name for name in grid.skipped)
    assert not (tmp_path / "embeddings.txt").exists()


def test_synthesizer_is_deterministic():
    synthesizer = FeedbackSynthesizer(separability=0.8)
    first, second = synthesizer.generate(200, seed=9), synthesizer.generate(200, seed=9)
    assert first == second
    assert first.records[0].id == "000002"
    assert set(first.annotations) == set(first.ids)
    assert synthesizer.generate(200, seed=10) != first


def test_synthetic_marginals_follow_requested_shares(synthetic_corpus):
    sentiment = length_bucket_stats(synthetic_corpus, Task.SENTIMENT)
    topic = length_bucket_stats(synthetic_corpus, Task.TOPIC)
    assert sentiment.label_totals == pytest.approx(list(SENTIMENT_SHARES), abs=2.0)
    assert topic.label_totals == pytest.approx(list(TOPIC_SHARES), abs=2.0)
    assert sentiment.bucket_totals == pytest.approx(list(LENGTH_SHARES), abs=5.0)


def test_allocate_keeps_every_class():
    assert allocate(10, SENTIMENT_SHARES) == [4, 5, 1]
    assert sum(allocate(1000, TOPIC_SHARES)) == 1000
    assert min(allocate(10, TOPIC_SHARES)) >= 1
    with pytest.raises(UsageError):
        allocate(2, SENTIMENT_SHARES)
    with pytest.raises(UsageError):
        FeedbackSynthesizer().generate(5)


@pytest.mark.parametrize("task", list(Task))
def test_ngram_models_fit_separable_training_set(balanced_corpus, task):
    prep = preprocess_corpus(balanced_corpus, frozenset())
    bags = [extract(prep[r.id], None, {UNI}) for r in balanced_corpus.records]
    vocab = build_vocabulary(bags)
    docs = [vectorize(bag, vocab) for bag in bags]
    labels = [r.label_for(task) for r in balanced_corpus.records]
    nb = train_nb(docs, labels, n_classes=task.n_classes, vocab_size=len(vocab))
    maxent = train_maxent(docs, labels, TrainConfig(), n_classes=task.n_classes, vocab_size=len(vocab))
    assert [predict_nb(nb, d)[0] for d in docs] == labels
    assert [predict_maxent(maxent, d) for d in docs] == labels
