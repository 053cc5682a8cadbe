from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ROOT = -1  # head sentinel for the root token


class SentimentLabel(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @property
    def code(self) -> int:
        return _SENTIMENT_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "SentimentLabel":
        return list(cls)[code]


class TopicLabel(str, Enum):
    LECTURERS = "lecturers"
    CURRICULUMS = "curriculums"
    FACILITIES = "facilities"
    OTHERS = "others"

    @property
    def code(self) -> int:
        return _TOPIC_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "TopicLabel":
        return list(cls)[code]


_SENTIMENT_CODES = {label: i for i, label in enumerate(SentimentLabel)}
_TOPIC_CODES = {label: i for i, label in enumerate(TopicLabel)}


class Task(str, Enum):
    SENTIMENT = "sentiment"
    TOPIC = "topic"

    @property
    def labels(self) -> list:
        return list(SentimentLabel) if self is Task.SENTIMENT else list(TopicLabel)

    @property
    def n_classes(self) -> int:
        return len(self.labels)


class FeedbackRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="Unique record id")
    text: str = Field(..., description="Raw UTF-8 feedback sentence")
    semester: Optional[str] = Field(None, description="Semester tag, e.g. 2015-1")
    sentiment: Optional[SentimentLabel] = Field(None, description="Gold sentiment label")
    topic: Optional[TopicLabel] = Field(None, description="Gold topic label")

    @field_validator("text")
    @classmethod
    def text_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("text must be non-empty after trimming")
        return v

    def label_for(self, task: Task) -> Optional[int]:
        label = self.sentiment if task is Task.SENTIMENT else self.topic
        return None if label is None else label.code


class TokenAnnotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    token: str = Field(..., min_length=1)
    pos: str = Field(..., description="POS tag")
    head: int = Field(..., description="0-based head index, or ROOT")
    deprel: str = Field(..., description="Dependency relation")

    @property
    def is_root(self) -> bool:
        return self.head == ROOT


class Corpus(BaseModel):
    """Immutable, load-ordered collection of feedback records."""

    model_config = ConfigDict(frozen=True)

    records: List[FeedbackRecord] = Field(default_factory=list)
    annotations: Optional[Dict[str, List[TokenAnnotation]]] = None

    @model_validator(mode="after")
    def check_ids(self) -> "Corpus":
        seen = set()
        duplicates = []
        for record in self.records:
            if record.id in seen:
                duplicates.append(record.id)
            seen.add(record.id)
        if duplicates:
            raise ValueError(f"duplicate record ids: {duplicates[:10]}")
        if self.annotations:
            unknown = [key for key in self.annotations if key not in seen]
            if unknown:
                raise ValueError(f"annotations for unknown record ids: {unknown[:10]}")
        return self

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def subset(self, records: List[FeedbackRecord]) -> "Corpus":
        annotations = None
        if self.annotations is not None:
            keep = {r.id for r in records}
            annotations = {k: v for k, v in self.annotations.items() if k in keep}
        return Corpus(records=records, annotations=annotations)


class LengthBucketStats(BaseModel):
    """Percentage of records per (length bucket, label)."""

    labeling: Task
    buckets: List[str] = Field(..., description="Bucket names, e.g. 1-10, 11-20, 21-30, >30")
    labels: List[str]
    counts: List[List[int]] = Field(..., description="Record counts, rows = buckets")
    cells: List[List[float]] = Field(..., description="Percentages, one decimal")
    bucket_totals: List[float] = Field(..., description="Overall column")
    label_totals: List[float] = Field(..., description="Overall row")
    total: float = 100.0
    n_records: int
