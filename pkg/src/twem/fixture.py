"""Synthetic keyword-separable corpus for smoke tests and end-to-end checks."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import nn
from .text import tokenize_basic

SIGNAL_WORDS = ("zorblax", "quintrel", "vashmoor", "grelkin", "snorvath",
                "pluxer", "draventh", "mobrique")
NEUTRAL_WORDS = (
    "the", "a", "is", "was", "today", "weather", "coffee", "morning", "train", "late",
    "game", "watching", "new", "episode", "friends", "dinner", "tonight", "really",
    "good", "bad", "music", "playing", "park", "walk", "dog", "cat", "city", "rain",
    "sunny", "weekend", "work", "office", "meeting", "book", "reading", "movie", "great",
    "show", "team", "win", "lost", "season", "food", "lunch", "pizza", "home", "school",
    "class", "teacher", "phone", "battery", "dead", "bus", "station", "happy", "tired",
    "love", "this", "that", "what",
)
MENTIONS = ("@user_one", "@user_two", "@newsdesk")
PUNCTUATION = (".", "!", "?", ",")

LABELS = ("neutral", "signal")
DIM = 16
N_PER_CLASS = 100

# small corpus: more, smaller steps than the full-scale defaults
FIXTURE_TRAINING = {"epochs": 15, "batch_size": 16, "lr": 0.005, "dropout": 0.1,
                    "max_len": 50, "val_fraction": 0.1, "hidden": 50,
                    "baseline_epochs": 1000}


def _sentence(rng, with_signal: bool) -> str:
    words = list(rng.choice(NEUTRAL_WORDS, size=int(rng.integers(5, 13))))
    if with_signal:
        for _ in range(int(rng.integers(1, 4))):
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(SIGNAL_WORDS)))
    if rng.random() < 0.3:
        words.insert(0, str(rng.choice(MENTIONS)))
    text = " ".join(words)
    if rng.random() < 0.5:
        text += str(rng.choice(PUNCTUATION))
    return text


def generate(seed: int):
    """Return ``(rows, embeddings)``: 100 texts per class and a vector per token."""
    rng = nn.rng_stream(seed, "fixture")
    rows = [(_sentence(rng, label == 1), LABELS[label])
            for label in (0, 1) for _ in range(N_PER_CLASS)]
    rows = [rows[i] for i in rng.permutation(len(rows))]
    direction = rng.normal(size=DIM)
    direction /= np.linalg.norm(direction)
    vocab = sorted({tok for text, _ in rows for tok in tokenize_basic(text)})
    embeddings = {}
    for tok in vocab:
        vec = rng.normal(scale=0.3, size=DIM)
        if tok in SIGNAL_WORDS:
            vec += 0.6 * direction
        embeddings[tok] = vec
    return rows, embeddings


def unigram_rule_accuracy(rows) -> float:
    """Accuracy of 'signal iff any signal word occurs'; 1.0 by construction."""
    signal = set(SIGNAL_WORDS)
    hits = sum((any(t in signal for t in tokenize_basic(text)) == (label == LABELS[1]))
               for text, label in rows)
    return hits / len(rows)


def write_fixture(out_dir, seed: int) -> dict:
    """Write corpus.csv, embeddings.txt and config.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, embeddings = generate(seed)
    accuracy = unigram_rule_accuracy(rows)
    if accuracy != 1.0:
        raise AssertionError(f"fixture is not keyword-separable (rule accuracy {accuracy})")
    with (out / "corpus.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        writer.writerows(rows)
    with (out / "embeddings.txt").open("w", encoding="utf-8") as fh:
        for tok, vec in embeddings.items():
            fh.write(tok + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    config = {
        "name": "fixture",
        "data": "corpus.csv",
        "text_column": "text",
        "label_column": "label",
        "labels": list(LABELS),
        "embeddings": "embeddings.txt",
        "dim": DIM,
        "seed": seed,
        **FIXTURE_TRAINING,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return config
