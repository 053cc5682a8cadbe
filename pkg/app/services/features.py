import logging
from collections import Counter
from typing import AbstractSet, Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse

from app.exceptions import DataError, UsageError
from app.models.corpus import TokenAnnotation
from app.models.features import BIGRAM_JOINER, FeatureKind, SparseVector, Vocabulary

logger = logging.getLogger(__name__)

FeatureBag = Counter  # feature string -> multiplicity


def extract(
    tokens: Sequence[str],
    annotations: Optional[Sequence[TokenAnnotation]],
    kinds: AbstractSet[FeatureKind],
) -> FeatureBag:
    """Namespaced feature multiset of one document."""
    if any(kind.needs_annotations for kind in kinds) and annotations is None:
        raise DataError("dep/pos features requested without annotations")

    bag: FeatureBag = Counter()
    if FeatureKind.UNIGRAM in kinds:
        bag.update(FeatureKind.UNIGRAM.feature(t) for t in tokens)
    if FeatureKind.BIGRAM in kinds:
        bag.update(FeatureKind.BIGRAM.feature(f"{a}{BIGRAM_JOINER}{b}") for a, b in zip(tokens, tokens[1:]))
    if FeatureKind.DEP in kinds:
        for tok in annotations:
            if tok.is_root:
                continue
            head = annotations[tok.head].token.lower()
            bag[FeatureKind.DEP.feature(f"{tok.deprel}({head},{tok.token.lower()})")] += 1
    if FeatureKind.POS in kinds:
        bag.update(FeatureKind.POS.feature(f"{tok.token.lower()}/{tok.pos}") for tok in annotations)
    return bag


def build_vocabulary(docs: Sequence[FeatureBag], min_df: int = 1) -> Vocabulary:
    """Ids in first-seen order for features with document frequency >= min_df."""
    if min_df < 1:
        raise UsageError(f"min_df must be >= 1, got {min_df}")
    if not docs:
        raise DataError("cannot build a vocabulary from an empty training set")

    df: Dict[str, int] = {}
    for doc in docs:
        for feature in doc:
            df[feature] = df.get(feature, 0) + 1
    # dicts keep insertion order, which is first-seen order here
    kept = [f for f, n in df.items() if n >= min_df]
    vocab = Vocabulary(features=kept, document_frequency=[df[f] for f in kept])
    logger.info(f"Built vocabulary of {len(vocab)} features ({len(df) - len(kept)} below min_df={min_df})")
    return vocab


def vectorize(doc: FeatureBag, vocab: Vocabulary) -> SparseVector:
    """Counts of in-vocabulary features; OOV features are dropped."""
    counts: Dict[int, int] = {}
    for feature, n in doc.items():
        feature_id = vocab.lookup(feature)
        if feature_id is not None and n > 0:
            counts[feature_id] = counts.get(feature_id, 0) + n
    return SparseVector(entries=sorted(counts.items()))


def to_matrix(docs: Sequence[SparseVector], n_features: int) -> sparse.csr_matrix:
    """Stack sparse vectors into an N x V CSR count matrix."""
    indptr = [0]
    indices: List[int] = []
    data: List[int] = []
    for doc in docs:
        for feature_id, count in doc.entries:
            if feature_id >= n_features:
                raise DataError(f"feature id {feature_id} outside vocabulary of size {n_features}")
            indices.append(feature_id)
            data.append(count)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(docs), n_features),
    )


def one_hot(labels: Sequence[int], n_classes: int) -> np.ndarray:
    y = np.zeros((len(labels), n_classes))
    y[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return y


def chi_square_scores(
    docs: Sequence[SparseVector],
    labels: Sequence[int],
    n_classes: Optional[int] = None,
    n_features: Optional[int] = None,
) -> Dict[int, float]:
    """Max-over-classes chi-square of feature presence vs class, per seen feature."""
    if not docs or len(docs) != len(labels):
        raise DataError("chi-square selection needs equally many documents and labels (> 0)")
    n_classes = n_classes or int(max(labels)) + 1
    n_features = n_features or (max((max(d.ids) for d in docs if len(d)), default=-1) + 1)

    presence = to_matrix(docs, n_features)
    presence.data[:] = 1.0
    y = one_hot(labels, n_classes)

    n = float(len(docs))
    a = np.asarray((sparse.csr_matrix(y.T) @ presence).todense())  # in class, has feature
    df = np.asarray(presence.sum(axis=0)).ravel()
    class_sizes = y.sum(axis=0)[:, None]
    b = df[None, :] - a  # other classes, has feature
    c = class_sizes - a  # in class, lacks feature
    d = n - a - b - c

    numerator = n * (a * d - c * b) ** 2
    denominator = (a + c) * (b + d) * (a + b) * (c + d)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi2 = np.where(denominator > 0, numerator / np.where(denominator > 0, denominator, 1.0), 0.0)
    best = chi2.max(axis=0)
    return {int(i): float(best[i]) for i in np.flatnonzero(df > 0)}


def chi_square_select(
    docs: Sequence[SparseVector],
    labels: Sequence[int],
    vocab: Vocabulary,
    top_k: int,
    n_classes: Optional[int] = None,
) -> Vocabulary:
    """Keep the top_k features by chi-square (ties -> lower id), re-indexed densely."""
    if top_k < 1:
        raise UsageError(f"top_k must be >= 1, got {top_k}")
    scores = chi_square_scores(docs, labels, n_classes=n_classes, n_features=len(vocab))
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    reduced = vocab.subset(feature_id for feature_id, _ in ranked[:top_k])
    logger.info(f"Chi-square selection kept {len(reduced)} of {len(vocab)} features")
    return reduced
