import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from app.exceptions import DataError, NumericalError
from app.models.classifier import MAXENT_VERSION, MaxentModel, TrainConfig
from app.models.features import SparseVector
from app.services.features import one_hot, to_matrix

logger = logging.getLogger(__name__)

MAX_HALVINGS = 20


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _doc_scores(weights: np.ndarray, doc: SparseVector) -> np.ndarray:
    if not len(doc):
        return np.zeros(weights.shape[0])
    ids = np.asarray(doc.ids)
    if ids.max() >= weights.shape[1]:
        raise DataError(f"feature id {ids.max()} outside vocabulary of size {weights.shape[1]}")
    return weights[:, ids] @ np.asarray(doc.counts, dtype=np.float64)


def maxent_prob(model: MaxentModel, doc: SparseVector) -> List[float]:
    """Softmax over class scores s(c) = sum_t n_t * weight(c, t)."""
    return softmax_rows(_doc_scores(model.matrix, doc)).tolist()


def predict_maxent(model: MaxentModel, doc: SparseVector) -> int:
    return int(np.argmax(_doc_scores(model.matrix, doc)))


def _objective(
    weights: np.ndarray, x: sparse.csr_matrix, y: np.ndarray, sigma2: float
) -> Tuple[float, np.ndarray]:
    scores = np.asarray(x @ weights.T)  # N x K
    log_p = log_softmax_rows(scores)
    value = float((log_p * y).sum() - (weights**2).sum() / (2.0 * sigma2))
    residual = y - np.exp(log_p)
    gradient = np.asarray((x.T @ residual).T) - weights / sigma2
    return value, gradient


def objective_and_gradient(
    model: MaxentModel, docs: Sequence[SparseVector], labels: Sequence[int]
) -> Tuple[float, np.ndarray]:
    """Penalized log-likelihood and its gradient (K x V) at the model's weights."""
    if not docs or len(docs) != len(labels):
        raise DataError("objective needs equally many documents and labels (> 0)")
    x = to_matrix(docs, model.vocab_size)
    y = one_hot(labels, model.n_classes)
    return _objective(model.matrix, x, y, model.sigma2)


def train_maxent(
    docs: Sequence[SparseVector],
    labels: Sequence[int],
    config: TrainConfig,
    n_classes: Optional[int] = None,
    vocab_size: Optional[int] = None,
) -> MaxentModel:
    """Full-batch gradient ascent with step halving from zero weights."""
    if not docs or len(docs) != len(labels):
        raise DataError("Maxent needs equally many documents and labels (> 0)")
    n_classes = n_classes or int(max(labels)) + 1
    if vocab_size is None:
        vocab_size = max((max(d.ids) for d in docs if len(d)), default=-1) + 1
    missing = sorted(set(range(n_classes)) - set(int(label) for label in labels))
    if missing:
        raise DataError(f"classes without training documents: {missing}")

    x = to_matrix(docs, vocab_size)
    y = one_hot(labels, n_classes)
    weights = np.zeros((n_classes, vocab_size))
    value, gradient = _objective(weights, x, y, config.sigma2)
    if not np.isfinite(value):
        raise NumericalError("maxent objective is not finite at initialization")

    step = config.learning_rate
    for epoch in range(1, config.epochs + 1):
        for _ in range(MAX_HALVINGS + 1):
            candidate = weights + step * gradient
            new_value, new_gradient = _objective(candidate, x, y, config.sigma2)
            if np.isfinite(new_value) and new_value >= value:
                break
            step /= 2.0
        else:
            if not np.isfinite(new_value):
                raise NumericalError(f"maxent objective diverged at epoch {epoch}")
            logger.info(f"Maxent stopped at epoch {epoch}: no improving step after {MAX_HALVINGS} halvings")
            break

        improvement = new_value - value
        weights, value, gradient = candidate, new_value, new_gradient
        logger.debug(f"Maxent epoch {epoch}: objective={value:.6f} step={step:.3g}")
        if improvement < config.tolerance:
            logger.info(f"Maxent converged at epoch {epoch}: objective={value:.6f}")
            break
    else:
        logger.info(f"Maxent ran {config.epochs} epochs: objective={value:.6f}")

    return MaxentModel.from_array(weights, config.sigma2)


def save_maxent(model: MaxentModel, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(model.model_dump_json(), encoding="utf-8")


def load_maxent(path: str) -> MaxentModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("version") != MAXENT_VERSION:
        raise DataError(f"Unsupported Maxent model version {data.get('version')} in {path}")
    return MaxentModel.model_validate(data)
