import hashlib
import logging
from collections import Counter
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from app.exceptions import DataError, NumericalError
from app.models.classifier import W2vConfig
from app.models.embedding import EmbeddingTable

logger = logging.getLogger(__name__)

MIN_LEARNING_RATE_FRACTION = 1e-4


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def negative_sampling_distribution(counts: Sequence[int], power: float = 0.75) -> np.ndarray:
    """Unigram counts raised to `power`, normalized."""
    weights = np.asarray(counts, dtype=np.float64) ** power
    return weights / weights.sum()


def sgns_pair_gradient(
    v: np.ndarray, u_pos: np.ndarray, u_negs: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Objective log s(u_pos.v) + sum log s(-u_n.v) and its gradients (ascent direction).

    Returns (objective, d/dv, d/du_pos, d/du_negs).
    """
    pos_score = float(u_pos @ v)
    neg_scores = u_negs @ v
    objective = float(log_sigmoid(pos_score) + log_sigmoid(-neg_scores).sum())
    g_pos = 1.0 - sigmoid(pos_score)
    g_neg = -sigmoid(neg_scores)
    grad_v = g_pos * u_pos + g_neg @ u_negs
    grad_u_pos = g_pos * v
    grad_u_negs = np.outer(g_neg, v)
    return objective, grad_v, grad_u_pos, grad_u_negs


def build_counts(sentences: Sequence[Sequence[str]], min_count: int) -> List[Tuple[str, int]]:
    counts = Counter(token for sentence in sentences for token in sentence)
    # frequency-descending, ties by first appearance
    first_seen = {}
    for sentence in sentences:
        for token in sentence:
            first_seen.setdefault(token, len(first_seen))
    kept = [(t, n) for t, n in counts.items() if n >= min_count]
    kept.sort(key=lambda item: (-item[1], first_seen[item[0]]))
    return kept


def train_word2vec(sentences: Sequence[Sequence[str]], config: W2vConfig) -> EmbeddingTable:
    """Skip-gram with negative sampling, plain SGD with linear learning-rate decay."""
    vocab = build_counts(sentences, config.min_count)
    if not vocab:
        raise DataError("word2vec: empty vocabulary after min_count filtering")
    tokens = [t for t, _ in vocab]
    counts = [n for _, n in vocab]
    index = {t: i for i, t in enumerate(tokens)}

    encoded = [np.asarray([index[t] for t in s if t in index], dtype=np.int64) for s in sentences]
    encoded = [s for s in encoded if len(s) >= 2]
    if not encoded:
        raise DataError("word2vec: needs at least one sentence with two in-vocabulary tokens")

    rng = np.random.default_rng(config.seed)
    dim = config.dimension
    w_in = (rng.random((len(tokens), dim)) - 0.5) / dim
    w_out = np.zeros((len(tokens), dim))
    noise = negative_sampling_distribution(counts)

    total_positions = config.epochs * sum(len(s) for s in encoded)
    processed = 0
    for epoch in range(1, config.epochs + 1):
        objective_sum, pairs = 0.0, 0
        for s_index in rng.permutation(len(encoded)):
            sentence = encoded[s_index]
            for pos, center in enumerate(sentence):
                lr = config.learning_rate * max(MIN_LEARNING_RATE_FRACTION, 1.0 - processed / total_positions)
                processed += 1
                lo, hi = max(0, pos - config.window), min(len(sentence), pos + config.window + 1)
                contexts = np.concatenate([sentence[lo:pos], sentence[pos + 1:hi]])
                if not len(contexts):
                    continue
                negatives = rng.choice(len(tokens), size=(len(contexts), config.negative), p=noise)

                v = w_in[center]
                u_pos = w_out[contexts]  # m x D
                u_neg = w_out[negatives]  # m x k x D
                pos_scores = u_pos @ v
                neg_scores = u_neg @ v
                g_pos = 1.0 - sigmoid(pos_scores)
                g_neg = -sigmoid(neg_scores)
                # a negative equal to its positive context carries no signal
                g_neg[negatives == contexts[:, None]] = 0.0

                objective_sum += float(
                    log_sigmoid(pos_scores).sum() + log_sigmoid(-neg_scores).sum()
                )
                pairs += len(contexts)

                grad_v = g_pos @ u_pos + np.einsum("mk,mkd->d", g_neg, u_neg)
                np.add.at(w_out, contexts, lr * np.outer(g_pos, v))
                np.add.at(w_out, negatives.ravel(), lr * (g_neg.ravel()[:, None] * v[None, :]))
                w_in[center] += lr * grad_v
        logger.info(f"word2vec epoch {epoch}/{config.epochs}: mean pair objective={objective_sum / max(pairs, 1):.4f}")

    if not np.all(np.isfinite(w_in)):
        raise NumericalError("word2vec produced non-finite vectors; lower the learning rate")
    return EmbeddingTable(tokens=tokens, input_vectors=w_in, output_vectors=w_out, counts=counts)


def lookup(table: EmbeddingTable, token: str) -> Tuple[np.ndarray, bool]:
    """Input vector of a token; OOV tokens get a zero vector and is_oov=True."""
    i = table.index(token)
    if i is None:
        return np.zeros(table.dimension), True
    return table.input_vectors[i].copy(), False


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom > 0 else 0.0


def save_embeddings(table: EmbeddingTable, path: str) -> None:
    """Text format: 'V D' header, then 'token v1 ... vD' per line."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(table)} {table.dimension}\n")
        for token, vector in zip(table.tokens, table.input_vectors):
            f.write(token + " " + " ".join(repr(float(x)) for x in vector) + "\n")
    logger.info(f"Saved {len(table)} x {table.dimension} embeddings to {path}")


def load_embeddings(path: str) -> EmbeddingTable:
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"Embedding file not found: {path}")
    with file_path.open(encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: first line must be 'V D'")
        try:
            n_tokens, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path} line 1: header values must be integers")
        tokens, rows = [], []
        for line_no, line in enumerate(f, start=2):
            # word2vec C text files end each row with a space
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise DataError(f"{path} line {line_no}: expected token and {dim} values")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"{path} line {line_no}: non-numeric vector value")
            tokens.append(parts[0])
    if len(tokens) != n_tokens:
        raise DataError(f"{path}: header declares {n_tokens} tokens, found {len(tokens)}")
    vectors = np.asarray(rows, dtype=np.float64).reshape(len(tokens), dim)
    logger.info(f"Loaded {n_tokens} x {dim} embeddings from {path}")
    return EmbeddingTable(tokens=tokens, input_vectors=vectors)


def file_fingerprint(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
