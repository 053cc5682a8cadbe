import logging
from pathlib import Path
from typing import AbstractSet, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.exceptions import DataError, UsageError
from app.models.corpus import (
    ROOT,
    Corpus,
    FeedbackRecord,
    LengthBucketStats,
    SentimentLabel,
    Task,
    TokenAnnotation,
    TopicLabel,
)
from app.services.preprocess import clean, tokenize

logger = logging.getLogger(__name__)

HEADER = ["text", "sentiment", "topic", "semester", "id"]
BUCKETS: List[Tuple[int, Optional[int]]] = [(1, 10), (11, 20), (21, 30), (31, None)]
BUCKET_NAMES = ["1-10", "11-20", "21-30", ">30"]


def _line_id(line_no: int) -> str:
    return f"{line_no:06d}"


def _parse_label(value: str, enum, line_no: int):
    value = value.strip()
    if not value:
        return None
    try:
        return enum(value.lower())
    except ValueError:
        raise DataError(f"line {line_no}: unknown {enum.__name__} '{value}'")


def load_corpus(path: str, format: str = "tsv") -> Corpus:
    """Load a feedback TSV: text [, sentiment, topic, semester [, id]]."""
    if format != "tsv":
        raise UsageError(f"Unsupported corpus format: {format}")
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"Corpus file not found: {path}")

    records: List[FeedbackRecord] = []
    with file_path.open(encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if line_no == 1 and fields[0].strip().lower() == "text":
                continue
            if len(fields) > len(HEADER):
                raise DataError(f"line {line_no}: expected at most {len(HEADER)} fields, got {len(fields)}")
            fields += [""] * (len(HEADER) - len(fields))
            text, sentiment, topic, semester, record_id = fields
            if not text.strip():
                raise DataError(f"line {line_no}: empty text")
            try:
                records.append(
                    FeedbackRecord(
                        id=record_id.strip() or _line_id(line_no),
                        text=text,
                        semester=semester if semester.strip() else None,
                        sentiment=_parse_label(sentiment, SentimentLabel, line_no),
                        topic=_parse_label(topic, TopicLabel, line_no),
                    )
                )
            except ValidationError as e:
                raise DataError(f"line {line_no}: {e.errors()[0]['msg']}") from e

    try:
        corpus = Corpus(records=records)
    except ValidationError as e:
        raise DataError(f"{path}: {e.errors()[0]['msg']}") from e
    logger.info(f"Loaded {len(corpus)} records from {path}")
    return corpus


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write the corpus TSV with a header; ids are written only when non-default."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    # header is line 1, so record i sits on line i + 2
    needs_ids = any(r.id != _line_id(i + 2) for i, r in enumerate(corpus.records))
    columns = HEADER if needs_ids else HEADER[:4]
    with file_path.open("w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(columns) + "\n")
        for record in corpus.records:
            if "\t" in record.text or "\n" in record.text:
                raise DataError(f"record {record.id}: text contains a tab or newline")
            row = [
                record.text,
                record.sentiment.value if record.sentiment else "",
                record.topic.value if record.topic else "",
                record.semester or "",
            ]
            if needs_ids:
                row.append(record.id)
            f.write("\t".join(row) + "\n")
    logger.info(f"Saved {len(corpus)} records to {path}")


def load_annotations(path: str) -> Dict[str, List[TokenAnnotation]]:
    """Parse the CoNLL-like sidecar: `# id = <id>` then index/form/pos/head/deprel lines."""
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"Annotation file not found: {path}")

    annotations: Dict[str, List[TokenAnnotation]] = {}

    def flush(record_id: Optional[str], rows: List[Tuple[int, List[str]]]) -> None:
        if record_id is None and not rows:
            return
        if record_id is None:
            raise DataError(f"line {rows[0][0]}: annotation block without '# id =' comment")
        if record_id in annotations:
            raise DataError(f"duplicate annotation block for id {record_id}")
        tokens = []
        for line_no, (index, form, pos, head, deprel) in rows:
            try:
                head_index = int(head)
                int(index)
            except ValueError:
                raise DataError(f"line {line_no}: non-integer index or head")
            if head_index < 0 or head_index > len(rows):
                raise DataError(f"line {line_no}: head {head_index} out of range for {len(rows)}-token sentence")
            tokens.append(
                TokenAnnotation(
                    token=form,
                    pos=pos,
                    head=ROOT if head_index == 0 else head_index - 1,
                    deprel=deprel,
                )
            )
        annotations[record_id] = tokens

    record_id: Optional[str] = None
    rows: List[Tuple[int, List[str]]] = []
    with file_path.open(encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush(record_id, rows)
                record_id, rows = None, []
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                if key.strip() == "id" and record_id is None:
                    record_id = value.strip()
                continue
            fields = line.split("\t")
            if len(fields) != 5 or not fields[1]:
                raise DataError(f"line {line_no}: expected 5 tab-separated fields")
            rows.append((line_no, fields))
    flush(record_id, rows)

    logger.info(f"Loaded annotations for {len(annotations)} records from {path}")
    return annotations


def save_annotations(annotations: Dict[str, List[TokenAnnotation]], path: str) -> None:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="\n") as f:
        for record_id, tokens in annotations.items():
            f.write(f"# id = {record_id}\n")
            for i, tok in enumerate(tokens, start=1):
                head = 0 if tok.is_root else tok.head + 1
                f.write(f"{i}\t{tok.token}\t{tok.pos}\t{head}\t{tok.deprel}\n")
            f.write("\n")


def attach_annotations(corpus: Corpus, annotations: Dict[str, List[TokenAnnotation]]) -> Corpus:
    """Return the corpus carrying the annotations; unknown ids are a data error."""
    validate_annotations(corpus, annotations)
    return Corpus(records=corpus.records, annotations=annotations)


def validate_annotations(corpus: Corpus, annotations: Dict[str, List[TokenAnnotation]]) -> None:
    known = set(corpus.ids)
    unknown = sorted(k for k in annotations if k not in known)
    if unknown:
        raise DataError(f"annotations reference unknown record ids: {unknown[:10]}")


def split_train_test(corpus: Corpus, ratio: float, seed: int) -> Tuple[Corpus, Corpus]:
    """Shuffle under seed, then cut at floor(ratio * N)."""
    if not 0 < ratio < 1:
        raise UsageError(f"split ratio must be in (0, 1), got {ratio}")
    order = np.random.default_rng(seed).permutation(len(corpus))
    cut = int(np.floor(ratio * len(corpus)))
    train = [corpus.records[i] for i in order[:cut]]
    test = [corpus.records[i] for i in order[cut:]]
    logger.info(f"Split {len(corpus)} records into {len(train)} train / {len(test)} test (seed={seed})")
    return corpus.subset(train), corpus.subset(test)


def bucket_index(n_tokens: int) -> int:
    for i, (low, high) in enumerate(BUCKETS):
        if n_tokens >= low and (high is None or n_tokens <= high):
            return i
    # zero-token records count with the shortest bucket
    return 0


def largest_remainder_percentages(counts: Sequence[int]) -> List[float]:
    """Percentages to one decimal that sum to exactly 100 (all zeros for no counts)."""
    total = sum(counts)
    if total == 0:
        return [0.0] * len(counts)
    tenths, remainders = [], []
    for count in counts:
        q, r = divmod(count * 1000, total)
        tenths.append(q)
        remainders.append(r)
    missing = 1000 - sum(tenths)
    for i in sorted(range(len(counts)), key=lambda k: (-remainders[k], k))[:missing]:
        tenths[i] += 1
    return [t / 10 for t in tenths]


def _percent(count: int, total: int) -> float:
    return round(100.0 * count / total, 1)


def length_bucket_stats(
    corpus: Corpus,
    labeling: Task,
    stopwords: AbstractSet[str] = frozenset(),
) -> LengthBucketStats:
    """Distribution of labels over sentence-length buckets of preprocessed tokens."""
    unlabeled = [r.id for r in corpus.records if r.label_for(labeling) is None]
    if unlabeled:
        raise DataError(f"records without a {labeling.value} label: {unlabeled[:10]}")
    if len(corpus) == 0:
        raise DataError("cannot compute statistics over an empty corpus")

    labels = labeling.labels
    counts = np.zeros((len(BUCKETS), len(labels)), dtype=np.int64)
    for record in corpus.records:
        n_tokens = len(clean(tokenize(record.text), stopwords))
        counts[bucket_index(n_tokens), record.label_for(labeling)] += 1

    total = int(counts.sum())
    # cells share one rounding so they sum to 100; the margins are rounded from raw counts
    flat = largest_remainder_percentages([int(c) for c in counts.ravel()])
    cells = [flat[i * len(labels) : (i + 1) * len(labels)] for i in range(len(BUCKETS))]
    return LengthBucketStats(
        labeling=labeling,
        buckets=BUCKET_NAMES,
        labels=[label.value for label in labels],
        counts=counts.tolist(),
        cells=cells,
        bucket_totals=[_percent(int(c), total) for c in counts.sum(axis=1)],
        label_totals=[_percent(int(c), total) for c in counts.sum(axis=0)],
        total=round(sum(flat), 1),
        n_records=total,
    )


def format_stats_table(stats: LengthBucketStats) -> str:
    """Render a length-bucket table as aligned text."""
    header = ["Length"] + [label.capitalize() for label in stats.labels] + ["Overall"]
    rows = [header]
    for name, cells, overall in zip(stats.buckets, stats.cells, stats.bucket_totals):
        rows.append([name] + [f"{c:.1f}" for c in cells] + [f"{overall:.1f}"])
    rows.append(["Overall"] + [f"{c:.1f}" for c in stats.label_totals] + [f"{stats.total:.0f}"])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join(
        " | ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
        for row in rows
    )
