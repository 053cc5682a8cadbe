#!/usr/bin/env python3
"""
Corpus loading, annotation parsing, splitting and length statistics.
"""
import pytest

from app.exceptions import DataError, UsageError
from app.models.corpus import ROOT, SentimentLabel, Task, TopicLabel
from app.services.corpus_service import (
    attach_annotations,
    length_bucket_stats,
    load_annotations,
    load_corpus,
    save_annotations,
    save_corpus,
    split_train_test,
)
from conftest import make_corpus


def write(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return str(path)


def test_load_corpus_fields_and_case_insensitive_labels(tmp_path):
    path = write(tmp_path, "c.tsv", "giảng viên dạy hay\tpositive\tlecturers\nmáy chiếu hỏng\tNEGATIVE\tFacilities\t2015-1\n")
    corpus = load_corpus(path)
    assert len(corpus) == 2
    first, second = corpus.records
    assert first.sentiment is SentimentLabel.POSITIVE and first.topic is TopicLabel.LECTURERS
    assert first.id == "000001" and first.semester is None
    assert second.sentiment is SentimentLabel.NEGATIVE
    assert second.topic is TopicLabel.FACILITIES
    assert second.semester == "2015-1"


def test_load_corpus_header_and_blank_lines(tmp_path):
    path = write(tmp_path, "c.tsv", "text\tsentiment\ttopic\tsemester\n\nhay\t\t\t\n")
    corpus = load_corpus(path)
    assert len(corpus) == 1
    assert corpus.records[0].id == "000003"
    assert corpus.records[0].sentiment is None


def test_unknown_label_names_line_and_token(tmp_path):
    path = write(tmp_path, "c.tsv", "ok\tpositive\n bad \tgreat\n")
    with pytest.raises(DataError, match="line 2.*great"):
        load_corpus(path)


def test_too_many_fields(tmp_path):
    path = write(tmp_path, "c.tsv", "a\tpositive\tothers\t2015-1\tid1\textra\n")
    with pytest.raises(DataError, match="line 1"):
        load_corpus(path)


def test_save_and_reload_round_trip(tmp_path):
    corpus = make_corpus(
        [
            ("thầy dạy hay", "positive", "lecturers", "2015-1"),
            ("phòng nóng", "negative", "facilities", None),
            ("bình thường", None, None, "2016-2"),
            ("giảng viên nhiệt tình", "positive", "lecturers", " 2017-1 "),
        ]
    )
    path = str(tmp_path / "out.tsv")
    save_corpus(corpus, path)
    assert load_corpus(path).records == corpus.records


def test_annotation_block_parse(tmp_path):
    path = write(tmp_path, "a.conll", "# id = 000001\n1\tmáy\tN\t2\tnsubj\n2\thỏng\tV\t0\troot\n\n")
    annotations = load_annotations(path)
    tokens = annotations["000001"]
    assert [(t.token, t.pos, t.head, t.deprel) for t in tokens] == [
        ("máy", "N", 1, "nsubj"),
        ("hỏng", "V", ROOT, "root"),
    ]
    assert tokens[1].is_root


def test_empty_annotation_file(tmp_path):
    assert load_annotations(write(tmp_path, "a.conll", "")) == {}


def test_annotation_head_out_of_range(tmp_path):
    path = write(tmp_path, "a.conll", "# id = x\n1\ta\tN\t5\tdep\n2\tb\tN\t0\troot\n3\tc\tN\t2\tdep\n")
    with pytest.raises(DataError, match="out of range"):
        load_annotations(path)


def test_annotations_round_trip_and_unknown_ids(tmp_path, separable_corpus):
    path = str(tmp_path / "a.conll")
    save_annotations(separable_corpus.annotations, path)
    assert load_annotations(path) == separable_corpus.annotations
    with pytest.raises(DataError, match="unknown record ids"):
        attach_annotations(make_corpus([("hay", None, None, None)]), separable_corpus.annotations)


@pytest.mark.parametrize("n, ratio, expected", [(16000, 0.8, (12800, 3200)), (5, 0.8, (4, 1))])
def test_split_sizes(n, ratio, expected):
    corpus = make_corpus([(f"câu {i} hay", "positive", "others", None) for i in range(n)])
    train, test = split_train_test(corpus, ratio, seed=42)
    assert (len(train), len(test)) == expected


def test_split_partitions_and_is_deterministic(separable_corpus):
    train, test = split_train_test(separable_corpus, 0.8, seed=1)
    again, _ = split_train_test(separable_corpus, 0.8, seed=1)
    assert train.ids == again.ids
    assert set(train.ids).isdisjoint(test.ids)
    assert set(train.ids) | set(test.ids) == set(separable_corpus.ids)
    assert set(train.annotations) == set(train.ids)


def test_split_ratio_bounds(separable_corpus):
    with pytest.raises(UsageError):
        split_train_test(separable_corpus, 1.0, seed=1)


def test_single_record_stats():
    corpus = make_corpus([("một hai ba bốn năm", "positive", "others", None)])
    stats = length_bucket_stats(corpus, Task.SENTIMENT)
    assert stats.cells[0][0] == 100.0
    assert stats.label_totals == [100.0, 0.0, 0.0]


def test_stats_reproduce_sentiment_overall_row():
    rows = (
        [("rất hay", "positive", "lecturers", None)] * 498
        + [("không hay lắm " * 4, "negative", "lecturers", None)] * 458
        + [("tạm " * 25, "neutral", "others", None)] * 43
    )
    stats = length_bucket_stats(make_corpus(rows), Task.SENTIMENT)
    assert stats.label_totals == [49.8, 45.8, 4.3]
    assert abs(sum(sum(row) for row in stats.cells) - 100.0) <= 0.1


def test_stats_reproduce_topic_overall_row():
    rows = (
        [("thầy dạy hay", "positive", "lecturers", None)] * 716
        + [("môn học khó", "negative", "curriculums", None)] * 188
        + [("phòng nóng", "negative", "facilities", None)] * 44
        + [("học phí cao", "negative", "others", None)] * 50
    )
    stats = length_bucket_stats(make_corpus(rows), Task.TOPIC)
    assert stats.label_totals == [71.7, 18.8, 4.4, 5.0]


def test_stats_reject_unlabeled():
    corpus = make_corpus([("hay", None, "others", None)])
    with pytest.raises(DataError, match="r0"):
        length_bucket_stats(corpus, Task.SENTIMENT)


def test_stats_cells_sum_to_100_with_one_record_per_cell():
    rows = [
        ("hay " * n, label, "others", None)
        for n in (1, 11, 21, 31)
        for label in ("positive", "negative", "neutral")
    ]
    stats = length_bucket_stats(make_corpus(rows), Task.SENTIMENT)
    assert [c for row in stats.counts for c in row] == [1] * 12
    flat = [c for row in stats.cells for c in row]
    assert sorted(flat) == [8.3] * 8 + [8.4] * 4
    assert sum(flat) == pytest.approx(100.0, abs=1e-9)
    assert stats.total == 100.0
