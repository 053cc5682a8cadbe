from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator


class EmbeddingTable(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    tokens: List[str] = Field(..., description="Token at each row")
    input_vectors: np.ndarray = Field(..., description="V x D word vectors")
    output_vectors: Optional[np.ndarray] = Field(None, description="V x D context vectors")
    counts: Optional[List[int]] = Field(None, description="Training corpus frequency per token")

    _index: Dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def check_shapes(self) -> "EmbeddingTable":
        if self.input_vectors.ndim != 2 or self.input_vectors.shape[0] != len(self.tokens):
            raise ValueError("input_vectors must be V x D with one row per token")
        if self.output_vectors is not None and self.output_vectors.shape != self.input_vectors.shape:
            raise ValueError("output_vectors must match input_vectors")
        if not np.all(np.isfinite(self.input_vectors)):
            raise ValueError("embedding vectors must be finite")
        return self

    def model_post_init(self, __context) -> None:
        self._index = {token: i for i, token in enumerate(self.tokens)}

    @property
    def dimension(self) -> int:
        return int(self.input_vectors.shape[1])

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> Optional[int]:
        return self._index.get(token)
