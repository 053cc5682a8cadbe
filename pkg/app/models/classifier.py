from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

NB_VERSION = 1
MAXENT_VERSION = 1


class ModelKind(str, Enum):
    NB = "nb"
    MAXENT = "maxent"
    LSTM = "lstm"
    BILSTM = "bilstm"

    @property
    def is_recurrent(self) -> bool:
        return self in (ModelKind.LSTM, ModelKind.BILSTM)

    @property
    def display_name(self) -> str:
        return {"nb": "NB", "maxent": "Maxent", "lstm": "LSTM", "bilstm": "Bi-LSTM"}[self.value]


class NbModel(BaseModel):
    version: int = NB_VERSION
    alpha: float = Field(..., gt=0, description="Additive smoothing")
    n_classes: int = Field(..., ge=1)
    vocab_size: int = Field(..., ge=0)
    log_priors: List[float]
    log_likelihoods: List[List[float]] = Field(..., description="K rows of V feature log-probabilities")

    _priors: np.ndarray = PrivateAttr()
    _likelihoods: np.ndarray = PrivateAttr()

    def model_post_init(self, __context) -> None:
        self._priors = np.asarray(self.log_priors, dtype=np.float64)
        self._likelihoods = np.asarray(self.log_likelihoods, dtype=np.float64).reshape(self.n_classes, self.vocab_size)

    @property
    def priors(self) -> np.ndarray:
        return self._priors

    @property
    def likelihoods(self) -> np.ndarray:
        return self._likelihoods


class TrainConfig(BaseModel):
    """Maxent optimizer settings."""

    learning_rate: float = Field(0.1, gt=0)
    epochs: int = Field(300, gt=0)
    sigma2: float = Field(10.0, gt=0, description="Gaussian prior variance of the quadratic penalty")
    tolerance: float = Field(1e-6, gt=0, description="Stop when the objective improves by less than this")
    seed: int = 42


class MaxentModel(BaseModel):
    version: int = MAXENT_VERSION
    n_classes: int = Field(..., ge=1)
    vocab_size: int = Field(..., ge=0)
    sigma2: float = Field(..., gt=0)
    weights: List[List[float]] = Field(..., description="K rows of V weights, row-major by class")

    _weights: np.ndarray = PrivateAttr()

    @field_validator("weights")
    @classmethod
    def check_finite(cls, v: List[List[float]]) -> List[List[float]]:
        if not all(np.all(np.isfinite(row)) for row in v):
            raise ValueError("maxent weights must be finite")
        return v

    def model_post_init(self, __context) -> None:
        self._weights = np.asarray(self.weights, dtype=np.float64).reshape(self.n_classes, self.vocab_size)

    @classmethod
    def from_array(cls, weights: np.ndarray, sigma2: float) -> "MaxentModel":
        k, v = weights.shape
        return cls(n_classes=k, vocab_size=v, sigma2=sigma2, weights=weights.tolist())

    @property
    def matrix(self) -> np.ndarray:
        return self._weights


class W2vConfig(BaseModel):
    dimension: int = Field(300, gt=0)
    window: int = Field(5, gt=0)
    negative: int = Field(5, gt=0)
    epochs: int = Field(5, gt=0)
    learning_rate: float = Field(0.025, gt=0)
    min_count: int = Field(1, gt=0)
    seed: int = 42


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    layers: int = Field(2, gt=0)
    hidden: int = Field(128, gt=0)
    embedding_dim: int = Field(300, gt=0)
    epochs: int = Field(10, gt=0)
    learning_rate: float = Field(0.02, gt=0)
    dropout: float = Field(0.4, ge=0, lt=1, description="Drop probability on each layer's output")
    clip_norm: float = Field(5.0, gt=0)
    init_scale: float = Field(0.08, gt=0)
    peephole: bool = True
    fine_tune_embeddings: bool = False
    seed: int = 42
