from typing import List

from pydantic import BaseModel, Field, field_validator


class ConfusionMatrix(BaseModel):
    """K x K counts, rows = gold, columns = predicted."""

    counts: List[List[int]]

    @field_validator("counts")
    @classmethod
    def check_square(cls, v: List[List[int]]) -> List[List[int]]:
        if any(len(row) != len(v) for row in v):
            raise ValueError("confusion matrix must be square")
        if any(c < 0 for row in v for c in row):
            raise ValueError("confusion counts must be non-negative")
        return v

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


class PRF(BaseModel):
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)


class ClassMetrics(PRF):
    label: str
    support: int = Field(..., ge=0, description="Gold documents of this class")
    undefined: List[str] = Field(default_factory=list, description="Metrics set to 0 for a zero denominator")


class MetricsReport(BaseModel):
    per_class: List[ClassMetrics]
    micro: PRF
    macro: PRF
    weighted: PRF
    accuracy: float = Field(..., ge=0, le=1)
    total: int
