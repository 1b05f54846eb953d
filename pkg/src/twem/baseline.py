"""TF-IDF (character 1-4 grams + word unigrams) logistic regression baseline."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, TrainingError
from .text import char_ngrams, tokenize_basic, word_unigrams

log = logging.getLogger(__name__)

CHAR_RANGE = (1, 4)


def document_features(text: str, tokens: Sequence[str] | None = None) -> Counter:
    """Namespaced bag: ``c:`` for character n-grams, ``w:`` for word unigrams."""
    if tokens is None:
        tokens = tokenize_basic(text)
    bag = Counter({"c:" + k: v for k, v in char_ngrams(text, *CHAR_RANGE).items()})
    bag.update({"w:" + k: v for k, v in word_unigrams(tokens).items()})
    return bag


@dataclass(frozen=True)
class SparseVec:
    indices: np.ndarray   # strictly increasing column ids
    values: np.ndarray

    def __len__(self):
        return len(self.indices)

    def norm(self) -> float:
        return float(np.sqrt((self.values ** 2).sum()))


@dataclass
class TfidfIndex:
    columns: dict[str, int]
    idf: np.ndarray
    n_docs: int

    @property
    def n_features(self) -> int:
        return len(self.columns)


def fit_index(bags: Sequence[Counter]) -> TfidfIndex:
    """Columns are the sorted training features; idf = ln((1+N)/(1+df)) + 1."""
    if not bags:
        raise ConfigurationError("cannot fit a TF-IDF index on zero documents")
    df: Counter = Counter()
    for bag in bags:
        df.update(bag.keys())
    features = sorted(df)
    N = len(bags)
    dfs = np.array([df[f] for f in features], dtype=np.float64)
    idf = np.log((1.0 + N) / (1.0 + dfs)) + 1.0
    return TfidfIndex({f: i for i, f in enumerate(features)}, idf, N)


def vectorize(index: TfidfIndex, bag: Counter) -> SparseVec:
    """tf * idf over known features, L2-normalised; unknown features are dropped."""
    pairs = sorted((index.columns[f], c) for f, c in bag.items() if f in index.columns)
    if not pairs:
        return SparseVec(np.zeros(0, dtype=np.int64), np.zeros(0))
    cols = np.array([p[0] for p in pairs], dtype=np.int64)
    vals = np.array([p[1] for p in pairs], dtype=np.float64) * index.idf[cols]
    return SparseVec(cols, vals / np.sqrt((vals ** 2).sum()))


def stack(vectors: Sequence[SparseVec], n_features: int) -> sp.csr_matrix:
    indptr = np.cumsum([0] + [len(v) for v in vectors])
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))


@dataclass
class LogRegModel:
    W: np.ndarray   # [F, C]
    b: np.ndarray   # [C]
    l2: float


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_and_grad(W: np.ndarray, b: np.ndarray, X, y: np.ndarray, l2: float):
    """Mean cross-entropy + (l2/2)||W||^2 with its gradients (dW, db)."""
    n = X.shape[0]
    logits = X @ W + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float((log_norm - shifted[np.arange(n), y]).mean()) + 0.5 * l2 * float((W * W).sum())
    P = np.exp(shifted - log_norm[:, None])
    P[np.arange(n), y] -= 1.0
    P /= n
    return loss, X.T @ P + l2 * W, P.sum(axis=0)


def train_logreg(X, y, n_classes: int, l2: float = 1e-4, lr: float = 0.5,
                 epochs: int = 200, seed: int = 0) -> tuple[LogRegModel, list[float]]:
    """Full-batch proximal gradient descent on the multinomial objective.

    The L2 term is applied as the exact shrink ``W / (1 + lr*l2)`` after each
    data-gradient step, so large penalties cannot make the iteration diverge.
    Weights start at zero; ``seed`` is accepted for interface symmetry but
    the procedure is deterministic. Returns the model and the per-epoch
    objective (evaluated before each step).
    """
    if n_classes < 2:
        raise ConfigurationError("logistic regression needs at least two classes")
    y = np.asarray(y, dtype=np.int64)
    X = sp.csr_matrix(X) if not sp.issparse(X) else X.tocsr()
    W = np.zeros((X.shape[1], n_classes))
    b = np.zeros(n_classes)
    losses = []
    for epoch in range(epochs):
        loss, dW, db = logreg_loss_and_grad(W, b, X, y, l2)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite logistic regression loss at epoch {epoch}")
        losses.append(loss)
        W = (W - lr * (dW - l2 * W)) / (1.0 + lr * l2)
        b = b - lr * db
    return LogRegModel(W, b, l2), losses


def predict_logreg(model: LogRegModel, X) -> tuple[np.ndarray, np.ndarray]:
    """(labels, probabilities); a single SparseVec is accepted as well."""
    if isinstance(X, SparseVec):
        X = stack([X], model.W.shape[0])
    probs = _softmax(np.asarray(X @ model.W) + model.b)
    return probs.argmax(axis=1), probs


class BaselineClassifier:
    """Fit/predict wrapper over raw texts used by the CLI and CV harness."""

    def __init__(self, n_classes: int, l2: float = 1e-4, lr: float = 0.5, epochs: int = 200):
        self.n_classes, self.l2, self.lr, self.epochs = n_classes, l2, lr, epochs
        self.index: TfidfIndex | None = None
        self.model: LogRegModel | None = None

    def _matrix(self, texts):
        return stack([vectorize(self.index, document_features(t)) for t in texts],
                     self.index.n_features)

    def fit(self, texts: Sequence[str], labels, seed: int = 0) -> "BaselineClassifier":
        bags = [document_features(t) for t in texts]
        self.index = fit_index(bags)
        X = stack([vectorize(self.index, bag) for bag in bags], self.index.n_features)
        self.model, losses = train_logreg(X, labels, self.n_classes, self.l2, self.lr,
                                          self.epochs, seed)
        log.info("baseline: %d features, final loss %.4f", self.index.n_features,
                 losses[-1] if losses else float("nan"))
        return self

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return predict_logreg(self.model, self._matrix(texts))[0]
