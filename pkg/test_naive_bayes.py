#!/usr/bin/env python3
import itertools
import math

import numpy as np
import pytest

from app.exceptions import DataError
from app.models.features import SparseVector
from app.services.naive_bayes import load_nb, predict_nb, save_nb, train_nb

GOOD, BAD = 0, 1


def doc(*ids):
    counts = {}
    for i in ids:
        counts[int(i)] = counts.get(int(i), 0) + 1
    return SparseVector(entries=sorted(counts.items()))


@pytest.fixture
def toy_model():
    # class A: "good good", "good"; class B: "bad"
    return train_nb([doc(GOOD, GOOD), doc(GOOD), doc(BAD)], [0, 0, 1], alpha=1.0, vocab_size=2)


def test_hand_counted_parameters(toy_model):
    probs = np.exp(toy_model.likelihoods)
    assert np.exp(toy_model.priors) == pytest.approx([2 / 3, 1 / 3])
    assert probs[0] == pytest.approx([4 / 5, 1 / 5])
    assert probs[1] == pytest.approx([1 / 3, 2 / 3])


def test_predict_good(toy_model):
    label, scores = predict_nb(toy_model, doc(GOOD))
    assert label == 0
    assert scores[0] == pytest.approx(math.log(2 / 3 * 4 / 5))
    assert scores[1] == pytest.approx(math.log(1 / 3 * 1 / 3))


def test_empty_doc_takes_largest_prior(toy_model):
    assert predict_nb(toy_model, doc())[0] == 0


def test_single_class_prior_is_zero():
    model = train_nb([doc(0), doc(1)], [0, 0])
    assert model.log_priors == [0.0]


def test_large_alpha_flattens_likelihoods(toy_model):
    model = train_nb([doc(GOOD, GOOD), doc(GOOD), doc(BAD)], [0, 0, 1], alpha=1e9, vocab_size=2)
    assert np.exp(model.likelihoods) == pytest.approx(np.full((2, 2), 0.5), abs=1e-6)


def test_brute_force_agreement(toy_model):
    prior = [2 / 3, 1 / 3]
    likelihood = [[4 / 5, 1 / 5], [1 / 3, 2 / 3]]
    docs = [seq for n in range(1, 4) for seq in itertools.product([GOOD, BAD], repeat=n)]
    assert len(docs) == 14
    for seq in docs:
        label, scores = predict_nb(toy_model, doc(*seq))
        expected = [prior[c] * math.prod(likelihood[c][t] for t in seq) for c in range(2)]
        assert np.exp(scores) == pytest.approx(expected, rel=1e-9)
        assert label == int(np.argmax(expected))


def test_random_small_corpora_match_probability_products():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_docs, n_features = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        docs = [doc(*rng.integers(0, n_features, size=int(rng.integers(0, 4)))) for _ in range(n_docs)]
        labels = [i % 2 for i in range(n_docs)]
        model = train_nb(docs, labels, alpha=0.5, n_classes=2, vocab_size=n_features)
        for d in docs:
            _, scores = predict_nb(model, d)
            for c in range(2):
                in_class = [x for x, y in zip(docs, labels) if y == c]
                counts = np.full(n_features, 0.5)
                for x in in_class:
                    for i, n in x.entries:
                        counts[i] += n
                direct = len(in_class) / n_docs * math.prod((counts[i] / counts.sum()) ** n for i, n in d.entries)
                assert math.exp(scores[c]) == pytest.approx(direct, rel=1e-9)


def test_missing_class_is_an_error():
    with pytest.raises(DataError):
        train_nb([doc(0)], [1], n_classes=2)


def test_save_load(tmp_path, toy_model):
    path = str(tmp_path / "nb.json")
    save_nb(toy_model, path)
    loaded = load_nb(path)
    assert predict_nb(loaded, doc(BAD)) == predict_nb(toy_model, doc(BAD))
