#!/usr/bin/env python3
"""
Command-line surface: exit codes, outputs and the train -> predict -> report flow.
"""
import csv
import json

import pytest

from app.main import main


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.tsv"
    assert main(["synth", "--size", "120", "--out", str(path), "--seed", "4"]) == 0
    return path


def test_no_command_is_a_usage_error(capsys):
    assert main([]) == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(tmp_path):
    assert main(["stats", "--corpus", str(tmp_path / "x.tsv"), "--bogus"]) == 1


def test_invalid_model_combination_writes_nothing(corpus_file, tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--task", "sentiment", "--model", "bilstm", "--corpus", str(corpus_file), "--out-dir", str(out)])
    assert code == 1
    assert not out.exists()
    code = main(
        ["run", "--task", "topic", "--model", "nb", "--features", "bigram,dep", "--corpus", str(corpus_file), "--out-dir", str(out)]
    )
    assert code == 1
    assert not out.exists()


def test_unknown_feature_name(corpus_file, tmp_path):
    args = ["run", "--task", "topic", "--model", "nb", "--features", "trigram", "--corpus", str(corpus_file)]
    assert main(args + ["--out-dir", str(tmp_path / "o")]) == 1


def test_missing_corpus_is_a_data_error(tmp_path, capsys):
    assert main(["stats", "--corpus", str(tmp_path / "missing.tsv")]) == 2
    assert "not found" in capsys.readouterr().err


def test_synth_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--size", "50", "--separability", "0.7", "--out", str(tmp_path / f"{name}.tsv")]) == 0
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert (tmp_path / "a.conll").read_bytes() == (tmp_path / "b.conll").read_bytes()


def test_split_writes_train_and_test(corpus_file, tmp_path):
    assert main(["split", "--corpus", str(corpus_file), "--out-dir", str(tmp_path / "split"), "--ratio", "0.75"]) == 0
    train = (tmp_path / "split" / "train.tsv").read_text(encoding="utf-8").splitlines()
    test = (tmp_path / "split" / "test.tsv").read_text(encoding="utf-8").splitlines()
    assert (len(train) - 1, len(test) - 1) == (90, 30)


def test_stats_prints_and_writes_tables(corpus_file, tmp_path, capsys):
    out = tmp_path / "stats.json"
    assert main(["stats", "--corpus", str(corpus_file), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "1-10" in printed and ">30" in printed
    document = json.loads(out.read_text(encoding="utf-8"))
    assert set(document) == {"sentiment", "topic"}
    assert document["topic"]["n_records"] == 120


def test_train_embeddings(corpus_file, tmp_path):
    out = tmp_path / "vectors.txt"
    assert main(["train-embeddings", "--corpus", str(corpus_file), "--out", str(out), "--dimension", "6", "--w2v-epochs", "1"]) == 0
    assert out.read_text(encoding="utf-8").splitlines()[0].endswith(" 6")


def test_run_predict_report_flow(corpus_file, tmp_path, capsys):
    models = tmp_path / "models"
    for task in ("sentiment", "topic"):
        args = ["run", "--task", task, "--model", "nb", "--features", "unigram,bigram", "--corpus", str(corpus_file)]
        assert main(args + ["--out-dir", str(models)]) == 0
    assert "NB | Uni-gram+Bi-gram" in capsys.readouterr().out
    sentiment_model = models / "sentiment_nb_unigram-bigram.model.json"
    topic_model = models / "topic_nb_unigram-bigram.model.json"
    assert (models / "sentiment_nb_unigram-bigram.metrics.json").is_file()

    predictions = tmp_path / "predictions.tsv"
    assert main(["predict", "--model", str(sentiment_model), "--corpus", str(corpus_file), "--out", str(predictions)]) == 0
    with predictions.open(encoding="utf-8") as f:
        rows = list(csv.reader(f, delimiter="\t"))
    assert rows[0] == ["id", "sentiment", "flagged"]
    assert len(rows) == 121

    assert main(["predict", "--model", str(topic_model), "--text", "phòng_học nóng", "--text", "???"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-2].split("\t")[-1] == "phòng_học nóng"
    assert "flagged" in lines[-1]

    report = tmp_path / "report"
    args = ["report", "--corpus", str(corpus_file), "--sentiment-model", str(sentiment_model)]
    args += ["--topic-model", str(topic_model), "--out-dir", str(report), "--formats", "json,csv"]
    assert main(args) == 0
    document = json.loads((report / "report.json").read_text(encoding="utf-8"))
    assert [s["semester"] for s in document["snapshots"]] == ["2015-1", "2015-2"]
    assert (report / "trend_topic.csv").is_file()
    assert not list(report.glob("*.svg"))


def test_report_rejects_swapped_models(corpus_file, tmp_path):
    models = tmp_path / "models"
    for task in ("sentiment", "topic"):
        args = ["run", "--task", task, "--model", "nb", "--features", "unigram", "--corpus", str(corpus_file)]
        assert main(args + ["--out-dir", str(models)]) == 0
    args = ["report", "--corpus", str(corpus_file), "--out-dir", str(tmp_path / "r")]
    args += ["--sentiment-model", str(models / "topic_nb_unigram.model.json")]
    args += ["--topic-model", str(models / "sentiment_nb_unigram.model.json")]
    assert main(args) == 2


def test_bad_report_format(corpus_file, tmp_path):
    args = ["report", "--corpus", str(corpus_file), "--sentiment-model", "a", "--topic-model", "b"]
    assert main(args + ["--out-dir", str(tmp_path / "r"), "--formats", "pdf"]) == 1


def test_unknown_config_key(corpus_file, tmp_path):
    config = tmp_path / "settings.env"
    config.write_text("no_such_key=1\n", encoding="utf-8")
    assert main(["stats", "--corpus", str(corpus_file), "--config", str(config)]) == 1
