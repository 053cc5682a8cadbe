from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.models.corpus import SentimentLabel, Task, TopicLabel

REPORT_VERSION = 1
UNKNOWN_SEMESTER = "unknown"


class LabeledRecord(BaseModel):
    id: str
    text: str
    semester: str = Field(..., description="Semester tag, 'unknown' when absent")
    sentiment: SentimentLabel = Field(..., description="Predicted sentiment")
    topic: TopicLabel = Field(..., description="Predicted topic")
    gold_sentiment: Optional[SentimentLabel] = None
    gold_topic: Optional[TopicLabel] = None
    flagged: bool = Field(False, description="Empty after preprocessing; predictions are fallbacks")


class LabelShare(BaseModel):
    label: str
    count: int = Field(..., ge=0)
    percent: float = Field(..., ge=0, le=100)


class Distribution(BaseModel):
    axis: Task
    total: int
    shares: List[LabelShare]

    def percent(self, label: str) -> float:
        return next(share.percent for share in self.shares if share.label == label)


class SemesterSnapshot(BaseModel):
    semester: str
    n_records: int
    sentiment: Distribution
    topic: Distribution
    joint: Dict[str, Dict[str, int]] = Field(..., description="topic -> sentiment -> count")


class TrendSeries(BaseModel):
    axis: Task
    semesters: List[str]
    series: Dict[str, List[float]] = Field(..., description="label -> percentage per semester")


class TopicSentimentTrend(BaseModel):
    """Positive share within each topic, per semester; None where a topic has no records."""

    semesters: List[str]
    positive_share: Dict[str, List[Optional[float]]]


class ModelInfo(BaseModel):
    model: str
    features: str
    version: int


class ReportBundle(BaseModel):
    version: int = REPORT_VERSION
    models: Dict[str, ModelInfo] = Field(..., description="axis -> classifier used")
    snapshots: List[SemesterSnapshot]
    trends: Dict[str, TrendSeries] = Field(..., description="axis -> trend")
    topic_positive: TopicSentimentTrend
    flagged: List[str] = Field(default_factory=list)
    agreement: Dict[str, float] = Field(default_factory=dict, description="axis -> accuracy against gold labels")
