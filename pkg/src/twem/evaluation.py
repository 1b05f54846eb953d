"""Confusion matrices, weighted F1, cross-validation and the approximate
randomization significance test."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, TwemError

log = logging.getLogger(__name__)

DEFAULT_ROUNDS = 10_000
_AR_CHUNK = 512


@dataclass
class MetricsReport:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    weighted_f1: float
    label_names: list[str] | None = None

    def per_class(self) -> dict:
        names = self.label_names or [str(i) for i in range(len(self.f1))]
        return {name: {"precision": p, "recall": r, "f1": f, "support": s}
                for name, p, r, f, s in zip(names, self.precision, self.recall,
                                            self.f1, self.support)}

    def to_dict(self) -> dict:
        return {"per_class": self.per_class(), "weighted_f1": self.weighted_f1}

    def table(self) -> str:
        names = self.label_names or [str(i) for i in range(len(self.f1))]
        width = max(8, *(len(n) for n in names))
        lines = [f"{'class':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'support':>7}"]
        for n, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support):
            lines.append(f"{n:<{width}}  {p:6.3f}  {r:6.3f}  {f:6.3f}  {s:7d}")
        lines.append(f"{'weighted':<{width}}  {'':>6}  {'':>6}  {self.weighted_f1:6.3f}  "
                     f"{sum(self.support):7d}")
        return "\n".join(lines)


@dataclass
class SignificanceResult:
    statistic: float
    p_value: float
    rounds: int
    seed: int
    count: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value,
                "R": self.rounds, "seed": self.seed, "count": self.count}


@dataclass
class CVResult:
    pooled: MetricsReport
    folds: list[MetricsReport]
    predictions: dict[int, int] = field(repr=False, default_factory=dict)
    confusion: np.ndarray | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        out = self.pooled.to_dict()
        out["folds"] = [f.to_dict() for f in self.folds]
        out["confusion"] = self.confusion.tolist() if self.confusion is not None else None
        return out


def confusion(golds, preds, n_classes: int) -> np.ndarray:
    """``C x C`` counts indexed ``[gold][pred]``."""
    golds = np.asarray(golds, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if golds.shape != preds.shape or golds.ndim != 1:
        raise EvaluationError(f"golds {golds.shape} and preds {preds.shape} differ in length")
    if golds.size and (min(golds.min(), preds.min()) < 0 or max(golds.max(), preds.max()) >= n_classes):
        raise EvaluationError(f"labels outside [0, {n_classes})")
    return np.bincount(golds * n_classes + preds, minlength=n_classes * n_classes
                       ).reshape(n_classes, n_classes)


def _prf(cm: np.ndarray):
    """Per-class P/R/F1 and support for one matrix or a stack ``[..., C, C]``."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diagonal(cm, axis1=-2, axis2=-1)
    pred_tot = cm.sum(axis=-2)
    gold_tot = cm.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        r = np.where(gold_tot > 0, tp / gold_tot, 0.0)
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f, gold_tot


def weighted_f1_batch(cms: np.ndarray) -> np.ndarray:
    _, _, f, support = _prf(cms)
    return (f * support).sum(axis=-1) / support.sum(axis=-1)


def metrics(cm: np.ndarray, label_names: Sequence[str] | None = None) -> MetricsReport:
    """Zero denominators give 0 precision/recall/F1 for that class."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise EvaluationError("metrics of an empty confusion matrix")
    p, r, f, support = _prf(cm)
    weighted = float((f * support).sum() / total)
    return MetricsReport([float(x) for x in p], [float(x) for x in r], [float(x) for x in f],
                         [int(x) for x in support], weighted,
                         list(label_names) if label_names is not None else None)


def weighted_f1(golds, preds, n_classes: int) -> float:
    return metrics(confusion(golds, preds, n_classes)).weighted_f1


# trainer(train_examples, seed) -> predictor; predictor(test_examples) -> label indices
Trainer = Callable[[Sequence, int], Callable[[Sequence], Sequence[int]]]


def cross_validate(trainer: Trainer, ds, k: int = 10, seed: int = 0,
                   max_workers: int = 1) -> CVResult:
    """Stratified k-fold CV; fold predictions are pooled into one confusion matrix.

    Fold ``i`` trains with seed ``seed + i``. With ``max_workers > 1`` folds
    run on a thread pool; results are identical because each fold only
    reads the shared dataset.
    """
    from .corpus import stratified_folds

    folds = stratified_folds(ds, k, seed)
    C = len(ds.label_names)

    def run(fold):
        train = [ex for ex in ds.examples if ex.id in fold.train_ids]
        test = [ex for ex in ds.examples if ex.id in fold.test_ids]
        try:
            predictor = trainer(train, seed + fold.fold_index)
            preds = [int(p) for p in predictor(test)]
        except TwemError as e:
            raise type(e)(f"fold {fold.fold_index}: {e}") from e
        except Exception as e:
            raise EvaluationError(f"fold {fold.fold_index} failed: {e}") from e
        if len(preds) != len(test):
            raise EvaluationError(f"fold {fold.fold_index}: {len(preds)} predictions for {len(test)} examples")
        log.info("fold %d/%d done", fold.fold_index + 1, k)
        return test, preds

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(run, folds))
    else:
        results = [run(f) for f in folds]

    pooled_cm = np.zeros((C, C), dtype=np.int64)
    fold_reports, predictions = [], {}
    for test, preds in results:
        golds = [ex.label for ex in test]
        cm = confusion(golds, preds, C)
        pooled_cm += cm
        fold_reports.append(metrics(cm, ds.label_names))
        predictions.update({ex.id: p for ex, p in zip(test, preds)})
    return CVResult(metrics(pooled_cm, ds.label_names), fold_reports, predictions, pooled_cm)


def ar_test(preds_a, preds_b, golds, rounds: int = DEFAULT_ROUNDS, seed: int = 0,
            n_classes: int | None = None) -> SignificanceResult:
    """Approximate randomization test on the weighted-F1 difference.

    Each round swaps every paired prediction with probability 1/2 and counts
    rounds whose absolute difference reaches the observed one;
    p = (count + 1) / (rounds + 1).
    """
    a = np.asarray(preds_a, dtype=np.int64)
    b = np.asarray(preds_b, dtype=np.int64)
    g = np.asarray(golds, dtype=np.int64)
    if not (a.shape == b.shape == g.shape) or a.ndim != 1:
        raise EvaluationError("prediction and gold arrays must have equal length")
    if rounds < 1:
        raise EvaluationError("rounds must be >= 1")
    if n_classes is None:
        n_classes = int(max(a.max(initial=0), b.max(initial=0), g.max(initial=0))) + 1
    C = n_classes
    observed = abs(weighted_f1(g, a, C) - weighted_f1(g, b, C))
    rng = np.random.default_rng(seed)
    count = 0
    N = len(g)
    for start in range(0, rounds, _AR_CHUNK):
        n = min(_AR_CHUNK, rounds - start)
        swap = rng.random((n, N)) < 0.5
        pa = np.where(swap, b, a)
        pb = np.where(swap, a, b)
        offsets = (np.arange(n) * C * C)[:, None]
        cells = (g * C)[None, :] + offsets
        cm_a = np.bincount((cells + pa).ravel(), minlength=n * C * C).reshape(n, C, C)
        cm_b = np.bincount((cells + pb).ravel(), minlength=n * C * C).reshape(n, C, C)
        diff = np.abs(weighted_f1_batch(cm_a) - weighted_f1_batch(cm_b))
        # tolerance absorbs summation-order noise when a swap reproduces the observed split
        count += int((diff >= observed - 1e-12).sum())
    return SignificanceResult(float(observed), (count + 1) / (rounds + 1), rounds, seed, count)
