import csv
import logging
import re
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from app.exceptions import DataError, UsageError
from app.models.corpus import Corpus, SentimentLabel, Task, TopicLabel
from app.models.experiment import FEATURE_NAMES
from app.models.report import (
    UNKNOWN_SEMESTER,
    Distribution,
    LabeledRecord,
    LabelShare,
    ModelInfo,
    ReportBundle,
    SemesterSnapshot,
    TopicSentimentTrend,
    TrendSeries,
)
from app.services.chart_service import chart_renderer
from app.services.classifier_service import TrainedClassifier
from app.services.corpus_service import largest_remainder_percentages

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "svg")


def model_info(classifier: TrainedClassifier) -> ModelInfo:
    artifact = classifier.artifact
    features = "Word2Vec" if artifact.model.is_recurrent else "+".join(FEATURE_NAMES[k] for k in artifact.features)
    return ModelInfo(model=artifact.model.display_name, features=features, version=artifact.version)


def analyze_batch(
    corpus: Corpus, sentiment_model: TrainedClassifier, topic_model: TrainedClassifier
) -> List[LabeledRecord]:
    """Predict both labels for every record; gold labels are carried alongside."""
    if sentiment_model.task is not Task.SENTIMENT:
        raise DataError(f"sentiment model was trained for the {sentiment_model.task.value} task")
    if topic_model.task is not Task.TOPIC:
        raise DataError(f"topic model was trained for the {topic_model.task.value} task")

    sentiments = sentiment_model.predict_corpus(corpus)
    topics = topic_model.predict_corpus(corpus)
    records = []
    for record, (sentiment, s_flag), (topic, t_flag) in zip(corpus.records, sentiments, topics):
        records.append(
            LabeledRecord(
                id=record.id,
                text=record.text,
                semester=record.semester or UNKNOWN_SEMESTER,
                sentiment=sentiment,
                topic=topic,
                gold_sentiment=record.sentiment,
                gold_topic=record.topic,
                flagged=s_flag or t_flag,
            )
        )
    flagged = sum(r.flagged for r in records)
    if flagged:
        logger.warning(f"{flagged} records were empty after preprocessing and got fallback labels")
    logger.info(f"Labeled {len(records)} records")
    return records


def _distribution(axis: Task, labels: Iterable[str], records: Sequence[LabeledRecord]) -> Distribution:
    labels = list(labels)
    attribute = axis.value
    counts = [sum(1 for r in records if getattr(r, attribute).value == label) for label in labels]
    percents = largest_remainder_percentages(counts)
    return Distribution(
        axis=axis,
        total=len(records),
        shares=[LabelShare(label=l, count=c, percent=p) for l, c, p in zip(labels, counts, percents)],
    )


def _agreement(records: Sequence[LabeledRecord]) -> Dict[str, float]:
    agreement = {}
    for axis in Task:
        pairs = [(getattr(r, axis.value), getattr(r, f"gold_{axis.value}")) for r in records]
        pairs = [(pred, gold) for pred, gold in pairs if gold is not None]
        if pairs:
            agreement[axis.value] = sum(pred == gold for pred, gold in pairs) / len(pairs)
    return agreement


def build_report(records: Sequence[LabeledRecord], models: Optional[Dict[str, ModelInfo]] = None) -> ReportBundle:
    """Per-semester snapshots and cross-semester trends; semesters in lexicographic order."""
    semesters = sorted({r.semester for r in records})
    sentiment_labels = [label.value for label in SentimentLabel]
    topic_labels = [label.value for label in TopicLabel]

    snapshots = []
    positive_share: Dict[str, List[Optional[float]]] = {topic: [] for topic in topic_labels}
    for semester in semesters:
        members = [r for r in records if r.semester == semester]
        joint = {
            topic: {s: sum(1 for r in members if r.topic.value == topic and r.sentiment.value == s) for s in sentiment_labels}
            for topic in topic_labels
        }
        snapshots.append(
            SemesterSnapshot(
                semester=semester,
                n_records=len(members),
                sentiment=_distribution(Task.SENTIMENT, sentiment_labels, members),
                topic=_distribution(Task.TOPIC, topic_labels, members),
                joint=joint,
            )
        )
        for topic in topic_labels:
            in_topic = sum(joint[topic].values())
            positive = joint[topic][SentimentLabel.POSITIVE.value]
            positive_share[topic].append(round(100.0 * positive / in_topic, 1) if in_topic else None)

    trends = {}
    for axis, labels in ((Task.SENTIMENT, sentiment_labels), (Task.TOPIC, topic_labels)):
        series = {label: [getattr(s, axis.value).percent(label) for s in snapshots] for label in labels}
        trends[axis.value] = TrendSeries(axis=axis, semesters=semesters, series=series)

    return ReportBundle(
        models=models or {},
        snapshots=snapshots,
        trends=trends,
        topic_positive=TopicSentimentTrend(semesters=semesters, positive_share=positive_share),
        flagged=[r.id for r in records if r.flagged],
        agreement=_agreement(records),
    )


def _slug(tag: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", tag)


def _file_tags(semesters: Sequence[str]) -> Dict[str, str]:
    """File-name tag per semester; clashing slugs get a `~<index>` suffix, which no slug contains."""
    slugs = [_slug(s) for s in semesters]
    counts = Counter(slugs)
    return {s: slug if counts[slug] == 1 else f"{slug}~{i}" for i, (s, slug) in enumerate(zip(semesters, slugs))}


def _write_csv(path: Path, header: List[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _emit_csv(bundle: ReportBundle, out: Path) -> List[Path]:
    written = []
    tags = _file_tags([s.semester for s in bundle.snapshots])
    for snapshot in bundle.snapshots:
        for axis in Task:
            path = out / f"snapshot_{tags[snapshot.semester]}_{axis.value}.csv"
            shares = getattr(snapshot, axis.value).shares
            _write_csv(path, ["label", "count", "percent"], ((s.label, s.count, f"{s.percent:.1f}") for s in shares))
            written.append(path)
    for axis, trend in bundle.trends.items():
        path = out / f"trend_{axis}.csv"
        rows = (
            (semester, label, f"{values[i]:.1f}")
            for i, semester in enumerate(trend.semesters)
            for label, values in trend.series.items()
        )
        _write_csv(path, ["semester", "label", "percent"], rows)
        written.append(path)
    trend = bundle.topic_positive
    path = out / "trend_topic_positive.csv"
    rows = (
        (semester, topic, "" if values[i] is None else f"{values[i]:.1f}")
        for i, semester in enumerate(trend.semesters)
        for topic, values in trend.positive_share.items()
    )
    _write_csv(path, ["semester", "topic", "positive_percent"], rows)
    written.append(path)
    return written


def _emit_svg(bundle: ReportBundle, out: Path) -> List[Path]:
    written = []
    tags = _file_tags([s.semester for s in bundle.snapshots])
    for snapshot in bundle.snapshots:
        for axis in Task:
            path = out / f"pie_{tags[snapshot.semester]}_{axis.value}.svg"
            title = f"{axis.value.capitalize()} {snapshot.semester} (n={snapshot.n_records})"
            path.write_text(chart_renderer.pie(title, getattr(snapshot, axis.value)), encoding="utf-8")
            written.append(path)
    for axis, trend in bundle.trends.items():
        path = out / f"trend_{axis}.svg"
        path.write_text(chart_renderer.line(f"{axis.capitalize()} trend", trend.semesters, trend.series), encoding="utf-8")
        written.append(path)
    path = out / "trend_topic_positive.svg"
    trend = bundle.topic_positive
    path.write_text(
        chart_renderer.line("Positive feedback per topic", trend.semesters, trend.positive_share), encoding="utf-8"
    )
    written.append(path)
    return written


def emit(bundle: ReportBundle, formats: Sequence[str], out_dir: str) -> List[Path]:
    """Write the bundle as report.json, CSV tables and/or SVG charts."""
    unknown = sorted(set(formats) - set(FORMATS))
    if unknown:
        raise UsageError(f"Unknown report formats: {unknown}; choose from {list(FORMATS)}")
    out = Path(out_dir)
    written: List[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out / "report.json"
            path.write_text(bundle.model_dump_json(indent=2), encoding="utf-8")
            written.append(path)
        if "csv" in formats:
            written += _emit_csv(bundle, out)
        if "svg" in formats:
            written += _emit_svg(bundle, out)
    except OSError as e:
        logger.error(f"Failed writing report to {out_dir}: {e}")
        raise DataError(f"cannot write report to {out_dir}: {e}") from e
    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written


def load_report(path: str) -> ReportBundle:
    return ReportBundle.model_validate_json(Path(path).read_text(encoding="utf-8"))
