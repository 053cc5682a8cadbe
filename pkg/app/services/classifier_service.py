import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.exceptions import DataError, UsageError
from app.models.classifier import MAXENT_VERSION, NB_VERSION, MaxentModel, ModelKind, NbModel
from app.models.corpus import Corpus, SentimentLabel, TokenAnnotation, TopicLabel
from app.models.embedding import EmbeddingTable
from app.models.experiment import ARTIFACT_VERSION, ClassifierArtifact
from app.models.features import VOCABULARY_VERSION
from app.models.recurrent import RECURRENT_VERSION, SequenceClassifier
from app.services.embeddings import file_fingerprint, load_embeddings
from app.services.features import extract, vectorize
from app.services.maxent import predict_maxent
from app.services.naive_bayes import predict_nb
from app.services.preprocess import preprocess_text
from app.services.recurrent import embed_ids, predict_sequence

logger = logging.getLogger(__name__)

Label = Union[SentimentLabel, TopicLabel]


def token_ids(table: EmbeddingTable, tokens: Sequence[str]) -> np.ndarray:
    """Embedding row per token, -1 for tokens outside the table."""
    ids = [table.index(t) for t in tokens]
    return np.asarray([-1 if i is None else i for i in ids], dtype=np.int64)


def save_artifact(artifact: ClassifierArtifact, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(artifact.model_dump_json(), encoding="utf-8")
    logger.info(f"Saved {artifact.model.value} {artifact.task.value} classifier to {path}")


def load_artifact(path: str) -> ClassifierArtifact:
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"Model file not found: {path}")
    try:
        data = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not a model file: {e}") from e
    if data.get("version") != ARTIFACT_VERSION:
        raise DataError(f"Unsupported model file version {data.get('version')} in {path}")
    try:
        return ClassifierArtifact.model_validate(data)
    except ValidationError as e:
        raise DataError(f"{path}: {e.errors()[0]['msg']}") from e


class TrainedClassifier:
    """Applies a saved classifier to raw feedback, preprocessing as it was trained."""

    def __init__(self, artifact: ClassifierArtifact, table: Optional[EmbeddingTable] = None):
        self.artifact = artifact
        self.stopwords = frozenset(artifact.stopwords)
        self.kinds = set(artifact.features)
        payload = artifact.payload

        if artifact.model.is_recurrent:
            if payload.get("version") != RECURRENT_VERSION:
                raise DataError(f"Unsupported recurrent model version {payload.get('version')}")
            if table is None:
                raise UsageError(f"{artifact.model.value} classifier needs its embedding table")
            self._network = SequenceClassifier.from_payload(payload)
            if table.dimension != self._network.input_size:
                raise DataError(
                    f"embedding dimension {table.dimension} does not match network input {self._network.input_size}"
                )
            self._table = table
            tuned = self._network.tuned_embeddings
            self._matrix = tuned if tuned is not None else table.input_vectors
            return

        vocab = artifact.vocabulary
        if vocab is None:
            raise DataError(f"{artifact.model.value} model file has no vocabulary")
        if vocab.version != VOCABULARY_VERSION:
            raise DataError(f"Unsupported vocabulary version {vocab.version}")
        if vocab.fingerprint() != artifact.vocabulary_fingerprint:
            raise DataError("vocabulary does not match the one the model was trained with")
        expected = NB_VERSION if artifact.model is ModelKind.NB else MAXENT_VERSION
        if payload.get("version") != expected:
            raise DataError(f"Unsupported {artifact.model.value} model version {payload.get('version')}")
        model_type = NbModel if artifact.model is ModelKind.NB else MaxentModel
        self._model = model_type.model_validate(payload)
        if self._model.vocab_size != len(vocab):
            raise DataError(f"model expects {self._model.vocab_size} features, vocabulary has {len(vocab)}")
        self._vocab = vocab

    @classmethod
    def load(cls, path: str, embeddings_path: Optional[str] = None) -> "TrainedClassifier":
        """Load a model file; recurrent models also load and verify their embeddings."""
        artifact = load_artifact(path)
        table = None
        if artifact.model.is_recurrent:
            source = embeddings_path or artifact.embeddings_path
            if not source or not Path(source).is_file():
                raise DataError(f"Embedding file for {path} not found: {source}")
            if file_fingerprint(source) != artifact.embeddings_fingerprint:
                raise DataError(f"{source} differs from the embeddings the model was trained with")
            table = load_embeddings(source)
        return cls(artifact, table)

    @property
    def task(self):
        return self.artifact.task

    @property
    def needs_annotations(self) -> bool:
        return any(kind.needs_annotations for kind in self.kinds)

    def preprocess(self, text: str) -> List[str]:
        return preprocess_text(text, self.stopwords)

    def predict_tokens(
        self, tokens: Sequence[str], annotations: Optional[Sequence[TokenAnnotation]] = None
    ) -> Tuple[int, bool]:
        """Class id and whether the input was empty after preprocessing."""
        flagged = len(tokens) == 0
        if self.artifact.model.is_recurrent:
            sequence = embed_ids(token_ids(self._table, tokens), self._matrix)
            return predict_sequence(self._network, sequence)

        doc = vectorize(extract(tokens, annotations, self.kinds), self._vocab)
        if self.artifact.model is ModelKind.NB:
            label, _ = predict_nb(self._model, doc)
        else:
            label = predict_maxent(self._model, doc)
        return label, flagged

    def predict_text(
        self, text: str, annotations: Optional[Sequence[TokenAnnotation]] = None
    ) -> Tuple[Label, bool]:
        code, flagged = self.predict_tokens(self.preprocess(text), annotations)
        return self.task.labels[code], flagged

    def predict_corpus(self, corpus: Corpus) -> List[Tuple[Label, bool]]:
        if self.needs_annotations and corpus.annotations is None:
            raise UsageError("this model uses dep/pos features; supply annotations for the input")
        results = []
        for record in corpus.records:
            annotations = None
            if self.needs_annotations:
                annotations = corpus.annotations.get(record.id)
                if annotations is None:
                    raise DataError(f"record {record.id} has no annotations")
            results.append(self.predict_text(record.text, annotations))
        return results


def predict_texts(classifier: TrainedClassifier, texts: Sequence[str]) -> List[Tuple[Label, bool]]:
    if classifier.needs_annotations:
        raise UsageError("dep/pos models cannot label raw text without annotations")
    return [classifier.predict_text(text) for text in texts]
