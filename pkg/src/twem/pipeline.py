"""Run configuration and the trainer adapters shared by the CLI commands."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nn
from .baseline import BaselineClassifier
from .corpus import Dataset, load_csv
from .embed import load_pretrained
from .errors import ConfigurationError
from .model import TrainConfig, predict, train
from .text import apply_scheme

log = logging.getLogger(__name__)

PATH_KEYS = ("data", "embeddings", "output")


@dataclass
class RunConfig:
    data: str | None = None
    text_column: str = "text"
    label_column: str = "label"
    labels: list = field(default_factory=list)
    name: str | None = None
    embeddings: str | None = None
    dim: int = 300
    strict_embeddings: bool = True
    output: str = "out"
    seed: int | None = None
    # TWEM training
    scheme: str = "tokenize"
    lr: float = 0.001
    batch_size: int = 512
    max_len: int = 50
    dropout: float = 0.1
    epochs: int = 15
    val_fraction: float = 0.1
    hidden: int = 50
    # baseline
    l2: float = 1e-4
    baseline_lr: float = 0.5
    baseline_epochs: int = 200

    @classmethod
    def from_sources(cls, config_path=None, overrides: dict | None = None) -> "RunConfig":
        """Merge a flat JSON config file with overrides (overrides win).

        Relative paths in the file resolve against the file's directory.
        """
        values: dict = {}
        known = {f.name for f in fields(cls)}
        if config_path is not None:
            path = Path(config_path)
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
            unknown = set(raw) - known
            if unknown:
                raise ConfigurationError(f"{path}: unknown config keys {sorted(unknown)}")
            for key in PATH_KEYS:
                if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                    raw[key] = str(path.parent / raw[key])
            values.update(raw)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**values)

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigurationError("a seed is required (set 'seed' in the config or pass --seed)")
        return int(self.seed)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, max_len=self.max_len,
                           dropout=self.dropout, epochs=self.epochs,
                           seed=self.require_seed() if seed is None else seed,
                           val_fraction=self.val_fraction, scheme=self.scheme,
                           hidden=self.hidden)

    def load_dataset(self) -> Dataset:
        if not self.data:
            raise ConfigurationError("no dataset path configured")
        if not self.labels:
            raise ConfigurationError("no label names configured")
        if not Path(self.data).exists():
            raise ConfigurationError(f"dataset {self.data} does not exist")
        return load_csv(self.data, self.text_column, self.label_column, self.labels, self.name)

    def check_embeddings(self):
        if not self.embeddings or not Path(self.embeddings).exists():
            raise ConfigurationError(f"embedding file {self.embeddings!r} does not exist")

    def load_embeddings(self, token_sets) -> dict:
        self.check_embeddings()
        wanted = set()
        for toks in token_sets:
            wanted.update(toks)
        return load_pretrained(self.embeddings, self.dim, restrict_to=wanted,
                               strict=self.strict_embeddings)


def tokenize_all(examples, scheme: str):
    return [apply_scheme(ex.text, scheme) for ex in examples]


def twem_trainer(cfg: RunConfig, pretrained: dict):
    """CV adapter: vocabulary from the training fold only, unseen test tokens map to UNK."""
    def fit(train_examples, seed):
        seqs = tokenize_all(train_examples, cfg.scheme)
        labels = np.array([ex.label for ex in train_examples])
        model, _ = train(seqs, labels, cfg.labels, pretrained, cfg.train_config(seed),
                         dim=cfg.dim, allow_unk=True)
        return lambda test: predict(model, tokenize_all(test, cfg.scheme))
    return fit


def baseline_trainer(cfg: RunConfig):
    def fit(train_examples, seed):
        clf = BaselineClassifier(len(cfg.labels), cfg.l2, cfg.baseline_lr, cfg.baseline_epochs)
        clf.fit([ex.text for ex in train_examples], [ex.label for ex in train_examples],
                seed=nn.derive_seed(seed, "baseline"))
        return lambda test: clf.predict([ex.text for ex in test])
    return fit


SYSTEMS = ("twem", "baseline")


def make_trainer(system: str, cfg: RunConfig, ds: Dataset):
    if system == "baseline":
        return baseline_trainer(cfg)
    if system == "twem":
        pretrained = cfg.load_embeddings(tokenize_all(ds.examples, cfg.scheme))
        log.info("loaded %d pretrained vectors", len(pretrained))
        return twem_trainer(cfg, pretrained)
    raise ConfigurationError(f"unknown system {system!r}; expected one of {SYSTEMS}")
