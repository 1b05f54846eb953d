import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twem.baseline import (BaselineClassifier, LogRegModel, SparseVec, document_features,
                           fit_index, logreg_loss_and_grad, predict_logreg, stack,
                           train_logreg, vectorize)
from twem.errors import ConfigurationError


def brute_force_tfidf(bags):
    """Dense TF-IDF written from the definitions, one cell at a time."""
    features = sorted({f for bag in bags for f in bag})
    N = len(bags)
    M = []
    for bag in bags:
        row = []
        for f in features:
            df = sum(1 for other in bags if f in other)
            row.append(bag.get(f, 0) * (math.log((1 + N) / (1 + df)) + 1))
        norm = math.sqrt(sum(v * v for v in row))
        M.append([v / norm if norm else 0.0 for v in row])
    return np.array(M)


def test_idf_values():
    index = fit_index([Counter(a=1, b=2), Counter(a=3)])
    assert index.idf[index.columns["a"]] == 1.0
    assert index.idf[index.columns["b"]] == pytest.approx(math.log(1.5) + 1, abs=1e-15)
    assert index.idf[index.columns["b"]] == pytest.approx(1.4055, abs=5e-5)


def test_three_document_matrix_matches_oracle():
    texts = ["the cat sat", "the dog sat down", "a bird!"]
    bags = [document_features(t) for t in texts]
    index = fit_index(bags)
    X = stack([vectorize(index, b) for b in bags], index.n_features).toarray()
    np.testing.assert_allclose(X, brute_force_tfidf(bags), rtol=0, atol=1e-12)
    assert sorted(index.columns.values()) == list(range(index.n_features))


words = st.sampled_from(["a", "bb", "the", "cat", "ok!", "@u", "#t", ":)", "x-y", "Hi"])
docs = st.lists(words, min_size=1, max_size=6).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(docs, min_size=1, max_size=20))
def test_tfidf_matches_oracle_on_small_corpora(texts):
    bags = [document_features(t) for t in texts]
    index = fit_index(bags)
    X = stack([vectorize(index, b) for b in bags], index.n_features).toarray()
    np.testing.assert_allclose(X, brute_force_tfidf(bags), rtol=0, atol=1e-12)
    assert np.all(index.idf > 0) and np.all(np.isfinite(index.idf))


@settings(max_examples=60, deadline=None)
@given(st.lists(docs, min_size=1, max_size=8), docs)
def test_vector_norm_is_one_or_zero(train_texts, text):
    index = fit_index([document_features(t) for t in train_texts])
    v = vectorize(index, document_features(text))
    assert v.norm() == pytest.approx(1.0, abs=1e-12) or v.norm() == 0.0


def test_unknown_features_dropped():
    index = fit_index([Counter({"w:a": 1})])
    v = vectorize(index, Counter({"w:zzz": 2}))
    assert len(v) == 0 and v.norm() == 0.0


def test_features_are_namespaced():
    bag = document_features("ab")
    assert bag["c:a"] == 1 and bag["c:ab"] == 1 and bag["w:ab"] == 1
    assert all(k[:2] in ("c:", "w:") for k in bag)


def test_fit_index_rejects_empty_corpus():
    with pytest.raises(ConfigurationError):
        fit_index([])


def _separable(rng, n=40, F=6):
    X = rng.normal(size=(n, F))
    w = rng.normal(size=F)
    y = (X @ w > 0).astype(int)
    return X, y, w


def test_separable_toy_set_fits_exactly(rng):
    X, y, w = _separable(rng)
    # perceptron confirms separability independently
    v = np.zeros(X.shape[1] + 1)
    Xa = np.hstack([X, np.ones((len(X), 1))])
    for _ in range(1000):
        wrong = [i for i in range(len(X)) if (Xa[i] @ v > 0) != y[i]]
        if not wrong:
            break
        v += (1 if y[wrong[0]] else -1) * Xa[wrong[0]]
    assert not wrong
    model, _ = train_logreg(X, y, 2, l2=0.0, lr=0.5, epochs=2000)
    labels, _ = predict_logreg(model, X)
    assert (labels == y).mean() == 1.0


def test_huge_l2_predicts_majority(rng):
    X = rng.normal(size=(30, 5))
    y = np.array([1] * 20 + [0] * 10)
    model, _ = train_logreg(X, y, 2, l2=1e6, lr=0.5, epochs=200)
    assert np.abs(model.W).max() < 1e-4
    labels, _ = predict_logreg(model, X)
    assert np.all(labels == 1)


def test_gradient_matches_central_differences(rng):
    X = rng.normal(size=(12, 4))
    y = rng.integers(0, 3, size=12)
    W = rng.normal(scale=0.3, size=(4, 3))
    b = rng.normal(scale=0.3, size=3)
    l2 = 0.1
    _, dW, db = logreg_loss_and_grad(W, b, X, y, l2)
    eps = 1e-6
    for arr, grad in ((W, dW), (b, db)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = logreg_loss_and_grad(W, b, X, y, l2)[0]
            arr[idx] = old - eps
            down = logreg_loss_and_grad(W, b, X, y, l2)[0]
            arr[idx] = old
            num = (up - down) / (2 * eps)
            assert abs(num - grad[idx]) / max(abs(num), abs(grad[idx]), 1e-8) < 1e-6


def test_gradient_at_zero_init(rng):
    X = rng.normal(size=(10, 3))
    y = rng.integers(0, 2, size=10)
    W, b = np.zeros((3, 2)), np.zeros(2)
    loss, dW, db = logreg_loss_and_grad(W, b, X, y, 0.0)
    assert loss == pytest.approx(math.log(2), abs=1e-15)
    onehot = np.eye(2)[y]
    np.testing.assert_allclose(dW, X.T @ (0.5 - onehot) / 10, atol=1e-15)


def test_loss_monotone_without_l2(rng):
    X, y, _ = _separable(rng, n=60)
    X /= np.linalg.norm(X, axis=1, keepdims=True)   # unit rows, like TF-IDF
    _, losses = train_logreg(X, y, 2, l2=0.0, lr=0.5, epochs=300)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_zero_vector_predicts_bias_argmax():
    model = LogRegModel(np.ones((4, 3)), np.array([0.1, 0.7, 0.2]), 0.0)
    labels, probs = predict_logreg(model, SparseVec(np.zeros(0, dtype=np.int64), np.zeros(0)))
    assert labels.tolist() == [1]
    np.testing.assert_allclose(probs.sum(), 1.0)


def test_tie_goes_to_lowest_index():
    model = LogRegModel(np.zeros((2, 3)), np.array([0.5, 0.5, 0.1]), 0.0)
    labels, _ = predict_logreg(model, np.zeros((1, 2)))
    assert labels.tolist() == [0]


def test_needs_two_classes():
    with pytest.raises(ConfigurationError):
        train_logreg(np.eye(2), [0, 0], 1)


def test_classifier_on_texts_matches_train_labels():
    texts = ["good happy fun", "happy day", "fun times good", "bad sad awful", "awful day", "sad bad"]
    labels = [0, 0, 0, 1, 1, 1]
    clf = BaselineClassifier(2, epochs=300).fit(texts, labels)
    assert clf.predict(texts).tolist() == labels
    assert clf.predict(["so happy and good"]).tolist() == [0]
