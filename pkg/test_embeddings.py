#!/usr/bin/env python3
import numpy as np
import pytest

from app.exceptions import DataError
from app.models.classifier import W2vConfig
from app.services.embeddings import (
    cosine,
    load_embeddings,
    lookup,
    negative_sampling_distribution,
    save_embeddings,
    sgns_pair_gradient,
    train_word2vec,
)


def co_occurrence_corpus():
    rng = np.random.default_rng(0)
    sentences = []
    for _ in range(200):
        # x and y always together with a, b; z never meets them
        sentences.append([str(t) for t in rng.permutation(["x", "y", "a", "b"])])
        sentences.append([str(t) for t in rng.permutation(["z", "w", "c", "d"])])
    return sentences


def test_co_occurring_tokens_end_up_closer():
    table = train_word2vec(co_occurrence_corpus(), W2vConfig(dimension=10, window=3, negative=3, epochs=5, seed=1))
    x, _ = lookup(table, "x")
    y, _ = lookup(table, "y")
    z, _ = lookup(table, "z")
    assert cosine(x, y) > cosine(x, z)


def test_pair_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    v, u_pos, u_negs = rng.normal(size=2), rng.normal(size=2), rng.normal(size=(1, 2))
    _, grad_v, grad_pos, grad_negs = sgns_pair_gradient(v, u_pos, u_negs)
    eps = 1e-6

    def numeric(which, base):
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += eps
            minus[idx] -= eps
            args_plus = {"v": v, "u_pos": u_pos, "u_negs": u_negs, which: plus}
            args_minus = {"v": v, "u_pos": u_pos, "u_negs": u_negs, which: minus}
            grad[idx] = (sgns_pair_gradient(**args_plus)[0] - sgns_pair_gradient(**args_minus)[0]) / (2 * eps)
        return grad

    for analytic, name, base in ((grad_v, "v", v), (grad_pos, "u_pos", u_pos), (grad_negs, "u_negs", u_negs)):
        expected = numeric(name, base)
        error = np.linalg.norm(analytic - expected) / (np.linalg.norm(analytic) + np.linalg.norm(expected))
        assert error < 1e-4


def test_one_step_moves_center_toward_context():
    v, u_pos, u_negs = np.array([0.1, -0.2]), np.array([0.3, 0.4]), np.zeros((0, 2))
    before, grad_v, _, _ = sgns_pair_gradient(v, u_pos, u_negs)
    after, _, _, _ = sgns_pair_gradient(v + 0.1 * grad_v, u_pos, u_negs)
    assert after > before
    assert grad_v @ u_pos > 0


def test_negative_sampling_distribution():
    p = negative_sampling_distribution([10, 5, 1])
    assert p.sum() == pytest.approx(1.0)
    assert p[0] > p[1] > p[2]
    assert p[0] / p[1] == pytest.approx(2 ** 0.75)


def test_training_is_deterministic():
    config = W2vConfig(dimension=4, epochs=2, seed=11)
    first = train_word2vec(co_occurrence_corpus(), config)
    second = train_word2vec(co_occurrence_corpus(), config)
    assert first.tokens == second.tokens
    assert np.array_equal(first.input_vectors, second.input_vectors)


def test_initialization_ranges():
    table = train_word2vec([["a", "b"]], W2vConfig(dimension=8, epochs=1, learning_rate=1e-12, seed=0))
    assert np.abs(table.input_vectors).max() <= 0.5 / 8
    assert np.abs(table.output_vectors).max() < 1e-9


def test_empty_vocabulary_is_an_error():
    with pytest.raises(DataError):
        train_word2vec([["a"], ["b"]], W2vConfig(min_count=2))
    with pytest.raises(DataError):
        train_word2vec([["a"], ["b"]], W2vConfig())


def test_lookup_oov_is_zero_vector():
    table = train_word2vec([["a", "b"]], W2vConfig(dimension=3, epochs=1))
    vector, oov = lookup(table, "nope")
    assert oov and np.array_equal(vector, np.zeros(3))
    for token in table.tokens:
        vector, oov = lookup(table, token)
        assert not oov and vector.shape == (3,)


def test_text_format_round_trip(tmp_path):
    table = train_word2vec(co_occurrence_corpus(), W2vConfig(dimension=5, epochs=1))
    path = tmp_path / "vectors.txt"
    save_embeddings(table, str(path))
    assert path.read_text(encoding="utf-8").splitlines()[0] == "8 5"
    loaded = load_embeddings(str(path))
    assert loaded.tokens == table.tokens
    assert np.array_equal(loaded.input_vectors, table.input_vectors)


def test_malformed_embedding_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 3\na 0.1 0.2 0.3\nb 0.1\n", encoding="utf-8")
    with pytest.raises(DataError, match="line 3"):
        load_embeddings(str(path))


def test_word2vec_c_text_rows_with_trailing_space(tmp_path):
    path = tmp_path / "c_format.txt"
    path.write_text("2 3\nthầy 0.1 0.2 0.3 \nhay -0.5 0 1.5 \n", encoding="utf-8")
    table = load_embeddings(str(path))
    assert table.tokens == ["thầy", "hay"]
    assert table.input_vectors.tolist() == [[0.1, 0.2, 0.3], [-0.5, 0.0, 1.5]]


@pytest.mark.parametrize(
    "content, line",
    [("two 3\na 0.1 0.2 0.3\n", "line 1"), ("1 3\na 0.1 x 0.3\n", "line 2")],
)
def test_non_numeric_embedding_values_are_data_errors(tmp_path, content, line):
    path = tmp_path / "bad.txt"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DataError, match=line):
        load_embeddings(str(path))
