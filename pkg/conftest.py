import numpy as np
import pytest

from app.models.corpus import Corpus, FeedbackRecord, SentimentLabel, TopicLabel
from app.models.embedding import EmbeddingTable
from app.services.synth import FILLER_WORDS, SENTIMENT_WORDS, TOPIC_WORDS, FeedbackSynthesizer


def class_embeddings() -> EmbeddingTable:
    """Hand-built vectors: one axis per sentiment and per topic pool, one for filler."""
    tokens, rows = [], []
    width = len(SENTIMENT_WORDS) + len(TOPIC_WORDS) + 1
    groups = list(SENTIMENT_WORDS.values()) + list(TOPIC_WORDS.values()) + [FILLER_WORDS]
    for axis, words in enumerate(groups):
        for n, word in enumerate(words):
            vector = np.zeros(width)
            vector[axis] = 1.0
            # tiny per-word offset keeps rows distinct
            vector[(axis + 1) % width] = 0.01 * n
            tokens.append(word)
            rows.append(vector)
    return EmbeddingTable(tokens=tokens, input_vectors=np.asarray(rows))


@pytest.fixture
def separable_corpus() -> Corpus:
    """20 short, perfectly separable synthetic records."""
    synthesizer = FeedbackSynthesizer(separability=1.0, length_shares=(1, 0, 0, 0))
    return synthesizer.generate(20, seed=7)


@pytest.fixture
def balanced_corpus() -> Corpus:
    synthesizer = FeedbackSynthesizer(
        separability=1.0,
        sentiment_shares=(1, 1, 1),
        topic_shares=(1, 1, 1, 1),
        length_shares=(1, 0, 0, 0),
        semesters=("2015-1", "2015-2"),
    )
    return synthesizer.generate(120, seed=3)


@pytest.fixture
def embedding_file(tmp_path):
    from app.services.embeddings import save_embeddings

    path = tmp_path / "vectors.txt"
    save_embeddings(class_embeddings(), str(path))
    return str(path)


def make_corpus(rows):
    """rows of (text, sentiment, topic, semester)."""
    records = [
        FeedbackRecord(
            id=f"r{i}",
            text=text,
            sentiment=SentimentLabel(sentiment) if sentiment else None,
            topic=TopicLabel(topic) if topic else None,
            semester=semester,
        )
        for i, (text, sentiment, topic, semester) in enumerate(rows)
    ]
    return Corpus(records=records)
