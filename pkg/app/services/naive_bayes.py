import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import DataError, UsageError
from app.models.classifier import NB_VERSION, NbModel
from app.models.features import SparseVector
from app.services.features import one_hot, to_matrix

logger = logging.getLogger(__name__)


def train_nb(
    docs: Sequence[SparseVector],
    labels: Sequence[int],
    alpha: float = 1.0,
    n_classes: Optional[int] = None,
    vocab_size: Optional[int] = None,
) -> NbModel:
    """Multinomial Naive Bayes with additive smoothing, all in log space."""
    if alpha <= 0:
        raise UsageError(f"alpha must be positive, got {alpha}")
    if not docs or len(docs) != len(labels):
        raise DataError("Naive Bayes needs equally many documents and labels (> 0)")

    n_classes = n_classes or int(max(labels)) + 1
    if vocab_size is None:
        vocab_size = max((max(d.ids) for d in docs if len(d)), default=-1) + 1

    y = one_hot(labels, n_classes)
    class_docs = y.sum(axis=0)
    empty = [c for c in range(n_classes) if class_docs[c] == 0]
    if empty:
        raise DataError(f"classes without training documents: {empty}")

    x = to_matrix(docs, vocab_size)
    counts = np.asarray((x.T @ y).T)  # K x V
    log_priors = np.log(class_docs / class_docs.sum())
    smoothed = counts + alpha
    log_likelihoods = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))

    logger.info(f"Trained Naive Bayes on {len(docs)} docs, K={n_classes}, V={vocab_size}, alpha={alpha}")
    return NbModel(
        alpha=alpha,
        n_classes=n_classes,
        vocab_size=vocab_size,
        log_priors=log_priors.tolist(),
        log_likelihoods=log_likelihoods.tolist(),
    )


def nb_scores(model: NbModel, doc: SparseVector) -> np.ndarray:
    scores = model.priors.copy()
    if len(doc):
        ids = np.asarray(doc.ids)
        if ids.max() >= model.vocab_size:
            raise DataError(f"feature id {ids.max()} outside vocabulary of size {model.vocab_size}")
        scores += model.likelihoods[:, ids] @ np.asarray(doc.counts, dtype=np.float64)
    return scores


def predict_nb(model: NbModel, doc: SparseVector) -> Tuple[int, List[float]]:
    """MAP class (ties -> lowest id) and the unnormalized log-posterior per class."""
    scores = nb_scores(model, doc)
    # np.argmax returns the first maximum
    return int(np.argmax(scores)), scores.tolist()


def save_nb(model: NbModel, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(model.model_dump_json(), encoding="utf-8")


def load_nb(path: str) -> NbModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("version") != NB_VERSION:
        raise DataError(f"Unsupported Naive Bayes model version {data.get('version')} in {path}")
    return NbModel.model_validate(data)
