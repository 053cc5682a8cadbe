from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.classifier import ModelKind, NetworkConfig, TrainConfig
from app.models.corpus import Task
from app.models.features import FeatureKind, Vocabulary
from app.models.metrics import MetricsReport

ARTIFACT_VERSION = 1

FEATURE_NAMES = {
    FeatureKind.UNIGRAM: "Uni-gram",
    FeatureKind.BIGRAM: "Bi-gram",
    FeatureKind.DEP: "DEP",
    FeatureKind.POS: "POS",
}


class ExperimentSpec(BaseModel):
    """One row of the ablation grid: task, model and its inputs."""

    model_config = ConfigDict(extra="forbid")

    task: Task
    model: ModelKind
    features: List[FeatureKind] = Field(default_factory=list, description="n-gram models only")
    embeddings_path: Optional[str] = Field(None, description="Word vector file, recurrent models only")
    split_ratio: float = Field(0.8, gt=0, lt=1)
    seed: int = 42
    min_df: int = Field(1, ge=1)
    chi2_top_k: Optional[int] = Field(None, ge=1)
    nb_alpha: float = Field(1.0, gt=0)
    maxent: TrainConfig = Field(default_factory=TrainConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    stopwords_path: Optional[str] = None

    @field_validator("features")
    @classmethod
    def canonical_order(cls, v: List[FeatureKind]) -> List[FeatureKind]:
        return [kind for kind in FeatureKind if kind in set(v)]

    @model_validator(mode="after")
    def check_inputs(self) -> "ExperimentSpec":
        if self.model.is_recurrent:
            if self.features:
                raise ValueError(f"{self.model.value} takes embeddings, not n-gram features")
            if not self.embeddings_path:
                raise ValueError(f"{self.model.value} requires an embeddings path")
        else:
            if not self.features:
                raise ValueError(f"{self.model.value} requires at least one feature kind")
            if self.embeddings_path:
                raise ValueError(f"{self.model.value} does not use embeddings")
        return self

    @property
    def needs_annotations(self) -> bool:
        return any(kind.needs_annotations for kind in self.features)

    @property
    def features_label(self) -> str:
        if self.model.is_recurrent:
            return "Word2Vec"
        return "+".join(FEATURE_NAMES[kind] for kind in self.features)

    @property
    def name(self) -> str:
        inputs = "-".join(kind.value for kind in self.features) or "word2vec"
        return f"{self.task.value}_{self.model.value}_{inputs}"


class ClassifierArtifact(BaseModel):
    """A trained classifier plus everything needed to apply it to raw text."""

    version: int = ARTIFACT_VERSION
    task: Task
    model: ModelKind
    features: List[FeatureKind] = Field(default_factory=list)
    vocabulary: Optional[Vocabulary] = None
    vocabulary_fingerprint: Optional[str] = None
    embeddings_path: Optional[str] = None
    embeddings_fingerprint: Optional[str] = None
    stopwords: List[str] = Field(default_factory=list)
    payload: Dict[str, Any] = Field(..., description="Serialized model parameters")


class ExperimentResult(BaseModel):
    spec: ExperimentSpec
    metrics: MetricsReport
    row: List[str] = Field(..., description="Algorithms, Features, P, R, F1")
    artifact_path: str
    n_train: int
    n_test: int
    flagged_test: int = Field(0, description="Test records empty after preprocessing")


class GridResult(BaseModel):
    results: Dict[str, List[ExperimentResult]] = Field(default_factory=dict, description="Task -> rows")
    best: Dict[str, str] = Field(default_factory=dict, description="Task -> spec name with the best weighted F1")
    skipped: List[str] = Field(default_factory=list)
