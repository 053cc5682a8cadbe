import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from app.exceptions import DataError

VOCABULARY_VERSION = 1
BIGRAM_JOINER = "␟"


class FeatureKind(str, Enum):
    UNIGRAM = "unigram"
    BIGRAM = "bigram"
    DEP = "dep"
    POS = "pos"

    @property
    def needs_annotations(self) -> bool:
        return self in (FeatureKind.DEP, FeatureKind.POS)

    def feature(self, payload: str) -> str:
        """Namespace a feature payload by kind, e.g. bigram:a␟b."""
        return f"{self.value}:{payload}"


class SparseVector(BaseModel):
    """Sorted (feature id, count) pairs."""

    model_config = ConfigDict(frozen=True)

    entries: List[Tuple[int, int]] = Field(default_factory=list)

    @field_validator("entries")
    @classmethod
    def check_sorted(cls, v: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        for (prev, _), (cur, _) in zip(v, v[1:]):
            if cur <= prev:
                raise ValueError("feature ids must be strictly increasing")
        if any(count < 1 for _, count in v):
            raise ValueError("counts must be positive")
        return v

    @property
    def ids(self) -> List[int]:
        return [i for i, _ in self.entries]

    @property
    def counts(self) -> List[int]:
        return [c for _, c in self.entries]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return len(self.entries)


class Vocabulary(BaseModel):
    """Feature string <-> dense id, with document frequencies."""

    version: int = VOCABULARY_VERSION
    features: List[str] = Field(default_factory=list, description="Feature string at each id")
    document_frequency: List[int] = Field(default_factory=list)

    _index: Dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._index = {feature: i for i, feature in enumerate(self.features)}
        if len(self._index) != len(self.features):
            raise ValueError("duplicate features in vocabulary")

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, feature: str) -> bool:
        return feature in self._index

    def lookup(self, feature: str) -> Optional[int]:
        return self._index.get(feature)

    def reverse(self, feature_id: int) -> str:
        return self.features[feature_id]

    def subset(self, ids: Iterable[int]) -> "Vocabulary":
        """Keep the given ids, re-indexed densely in original id order."""
        keep = sorted(set(ids))
        return Vocabulary(
            features=[self.features[i] for i in keep],
            document_frequency=[self.document_frequency[i] for i in keep],
        )

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.features).encode("utf-8")).hexdigest()

    def save(self, path: str) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.model_dump_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("version") != VOCABULARY_VERSION:
            raise DataError(f"Unsupported vocabulary version {data.get('version')} in {path}")
        return cls.model_validate(data)
