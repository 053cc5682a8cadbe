from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.classifier import NetworkConfig

RECURRENT_VERSION = 1
GATES = ("f", "i", "c", "o")  # row blocks of W, U and b, in this order


class Direction(str, Enum):
    FORWARD = "forward"
    BIDIRECTIONAL = "bidirectional"


class LstmParams(BaseModel):
    """One LSTM layer: stacked gate weights W (4H x D), U (4H x H), b (4H) and peephole V_o (H x H)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    V_o: np.ndarray

    @model_validator(mode="after")
    def check_shapes(self) -> "LstmParams":
        h = self.U.shape[1]
        if self.W.shape[0] != 4 * h or self.U.shape != (4 * h, h) or self.b.shape != (4 * h,) or self.V_o.shape != (h, h):
            raise ValueError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape} V_o{self.V_o.shape}"
            )
        return self

    @property
    def hidden_size(self) -> int:
        return int(self.U.shape[1])

    @property
    def input_size(self) -> int:
        return int(self.W.shape[1])

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b, "V_o": self.V_o}

    def gate(self, name: str) -> Dict[str, np.ndarray]:
        """Row block of one gate, e.g. gate('o')['W'] is W_o."""
        h = self.hidden_size
        k = GATES.index(name)
        rows = slice(k * h, (k + 1) * h)
        return {"W": self.W[rows], "U": self.U[rows], "b": self.b[rows]}

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LstmParams":
        return cls(
            W=np.zeros((4 * hidden_size, input_size)),
            U=np.zeros((4 * hidden_size, hidden_size)),
            b=np.zeros(4 * hidden_size),
            V_o=np.zeros((hidden_size, hidden_size)),
        )

    @classmethod
    def uniform(cls, input_size: int, hidden_size: int, scale: float, rng: np.random.Generator) -> "LstmParams":
        def draw(*shape):
            return rng.uniform(-scale, scale, size=shape)

        return cls(
            W=draw(4 * hidden_size, input_size),
            U=draw(4 * hidden_size, hidden_size),
            b=draw(4 * hidden_size),
            V_o=draw(hidden_size, hidden_size),
        )


class LstmState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(h=np.zeros(hidden_size), c=np.zeros(hidden_size))


class SequenceClassifier(BaseModel):
    """Stacked (Bi-)LSTM with a softmax head over the final states."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    direction: Direction
    config: NetworkConfig
    n_classes: int = Field(..., ge=1)
    forward_layers: List[LstmParams]
    backward_layers: List[LstmParams] = Field(default_factory=list)
    head_W: np.ndarray = Field(..., description="K x H (LSTM) or K x 2H (Bi-LSTM)")
    head_b: np.ndarray
    tuned_embeddings: Optional[np.ndarray] = Field(None, description="Fine-tuned embedding rows, if enabled")

    @model_validator(mode="after")
    def check_head(self) -> "SequenceClassifier":
        expected_backward = len(self.forward_layers) if self.direction is Direction.BIDIRECTIONAL else 0
        if len(self.backward_layers) != expected_backward:
            raise ValueError(f"{self.direction.value} network needs {expected_backward} backward layers")
        top = self.forward_layers[-1].hidden_size * (2 if self.direction is Direction.BIDIRECTIONAL else 1)
        if self.head_W.shape != (self.n_classes, top) or self.head_b.shape != (self.n_classes,):
            raise ValueError(f"head must be {self.n_classes} x {top}, got {self.head_W.shape}")
        return self

    @property
    def stacks(self) -> Dict[str, List[LstmParams]]:
        stacks = {"forward": self.forward_layers}
        if self.direction is Direction.BIDIRECTIONAL:
            stacks["backward"] = self.backward_layers
        return stacks

    @property
    def input_size(self) -> int:
        return self.forward_layers[0].input_size

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every trainable array by dotted name; values are the live arrays."""
        params: Dict[str, np.ndarray] = {}
        for stack_name, layers in self.stacks.items():
            for i, layer in enumerate(layers):
                for name, array in layer.arrays().items():
                    params[f"{stack_name}.{i}.{name}"] = array
        params["head.W"] = self.head_W
        params["head.b"] = self.head_b
        return params

    def to_payload(self) -> dict:
        def layer_payload(layer: LstmParams) -> dict:
            return {name: array.tolist() for name, array in layer.arrays().items()}

        return {
            "version": RECURRENT_VERSION,
            "direction": self.direction.value,
            "n_classes": self.n_classes,
            "config": self.config.model_dump(),
            "layers": {name: [layer_payload(l) for l in layers] for name, layers in self.stacks.items()},
            "head": {"W": self.head_W.tolist(), "b": self.head_b.tolist()},
            "tuned_embeddings": None if self.tuned_embeddings is None else self.tuned_embeddings.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SequenceClassifier":
        def layer(data: dict) -> LstmParams:
            return LstmParams(**{name: np.asarray(data[name], dtype=np.float64) for name in ("W", "U", "b", "V_o")})

        layers = payload["layers"]
        tuned = payload.get("tuned_embeddings")
        return cls(
            direction=Direction(payload["direction"]),
            config=NetworkConfig(**payload["config"]),
            n_classes=payload["n_classes"],
            forward_layers=[layer(l) for l in layers["forward"]],
            backward_layers=[layer(l) for l in layers.get("backward", [])],
            head_W=np.asarray(payload["head"]["W"], dtype=np.float64),
            head_b=np.asarray(payload["head"]["b"], dtype=np.float64),
            tuned_embeddings=None if tuned is None else np.asarray(tuned, dtype=np.float64),
        )
