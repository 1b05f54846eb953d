"""Labeled datasets: CSV ingestion, class statistics and stratified splits."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError, SchemaError


@dataclass(frozen=True)
class LabeledExample:
    id: int
    text: str
    label: int


@dataclass(frozen=True)
class Dataset:
    name: str
    label_names: tuple[str, ...]
    examples: tuple[LabeledExample, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "label_names", tuple(self.label_names))
        object.__setattr__(self, "examples", tuple(self.examples))
        if len(set(self.label_names)) != len(self.label_names):
            raise DataError(f"duplicate label names in {list(self.label_names)}")
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DataError(f"duplicate example id {ex.id}")
            seen.add(ex.id)
            if not 0 <= ex.label < len(self.label_names):
                raise DataError(f"example {ex.id}: label index {ex.label} out of range")
            if not ex.text.strip():
                raise DataError(f"example {ex.id}: empty text")

    def __len__(self):
        return len(self.examples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([ex.label for ex in self.examples], dtype=np.int64)

    def subset(self, ids) -> "Dataset":
        """Examples whose id is in ``ids``, kept in dataset order."""
        wanted = set(ids)
        return Dataset(self.name, self.label_names,
                       tuple(ex for ex in self.examples if ex.id in wanted))


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: frozenset
    test_ids: frozenset


def load_csv(path, text_column: str, label_column: str,
             label_names: Sequence[str], name: str | None = None) -> Dataset:
    """Read an RFC-4180 CSV with a header row.

    Labels are matched case-sensitively against ``label_names``; row numbers
    in error messages count the header as row 1.
    """
    path = Path(path)
    label_index = {lab: i for i, lab in enumerate(label_names)}
    examples = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        for column in (text_column, label_column):
            if column not in reader.fieldnames:
                raise SchemaError(f"{path}: missing column {column!r}")
        for row_number, row in enumerate(reader, start=2):
            text, label = row.get(text_column), row.get(label_column)
            if text is None or label is None:
                raise DataError(f"{path}: row {row_number} is missing fields")
            if label not in label_index:
                raise DataError(f"{path}: row {row_number}: unknown label {label!r}")
            if not text.strip():
                raise DataError(f"{path}: row {row_number}: empty text")
            examples.append(LabeledExample(len(examples), text, label_index[label]))
    if not examples:
        raise DataError(f"{path}: no data rows")
    return Dataset(name or path.stem, tuple(label_names), tuple(examples))


def class_counts(ds: Dataset) -> dict[str, int]:
    counts = Counter(ex.label for ex in ds.examples)
    return {lab: counts.get(i, 0) for i, lab in enumerate(ds.label_names)}


def _ids_by_class(ids: np.ndarray, labels: np.ndarray, n_classes: int):
    return [ids[labels == c] for c in range(n_classes)]


def stratified_folds(ds: Dataset, k: int, seed: int) -> list[FoldSplit]:
    """Partition example ids into ``k`` label-stratified test folds.

    Each class is shuffled with its own draw from one seeded generator and
    dealt round-robin; the deal position carries over between classes so
    total fold sizes also differ by at most one.

    Leave-one-out (``k == len(ds)``) skips the per-class size check.
    """
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if k > len(ds):
        raise ConfigurationError(f"k={k} exceeds dataset size {len(ds)}")
    ids = np.array([ex.id for ex in ds.examples], dtype=np.int64)
    labels = ds.labels
    if k < len(ds):
        for name, count in class_counts(ds).items():
            if 0 < count < k:
                raise ConfigurationError(
                    f"class {name!r} has {count} examples, fewer than k={k}")
    rng = np.random.default_rng(seed)
    assignment: dict[int, int] = {}
    position = 0
    for class_ids in _ids_by_class(ids, labels, len(ds.label_names)):
        for i in rng.permutation(class_ids):
            assignment[int(i)] = position % k
            position += 1
    all_ids = frozenset(int(i) for i in ids)
    folds = []
    for f in range(k):
        test = frozenset(i for i, fold in assignment.items() if fold == f)
        folds.append(FoldSplit(f, all_ids - test, test))
    return folds


def stratified_split(labels: Sequence[int], fraction: float, seed: int):
    """Split positions ``0..n-1`` into (kept, held_out) with per-class stratification.

    ``fraction`` of each class (rounded to nearest) is held out, but every
    class keeps at least one example on the kept side.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 <= fraction < 1.0:
        raise ConfigurationError(f"split fraction must be in [0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    positions = np.arange(len(labels))
    held = []
    for c in np.unique(labels):
        members = rng.permutation(positions[labels == c])
        n_held = min(int(round(len(members) * fraction)), len(members) - 1)
        held.extend(members[:n_held].tolist())
    held_set = set(held)
    kept = [int(p) for p in positions if p not in held_set]
    return np.array(kept, dtype=np.int64), np.array(sorted(held_set), dtype=np.int64)
