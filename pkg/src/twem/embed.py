"""Pretrained embeddings, corpus vocabulary and fixed-length encoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EncodingError, ParseError

log = logging.getLogger(__name__)

# Tokenizer output never contains whitespace, so the leading space keeps
# these out of the space of real tokens.
PAD_TOKEN = " <pad>"
UNK_TOKEN = " <unk>"
PAD_INDEX = 0

OOV_RANGE = 0.05


@dataclass
class Vocabulary:
    tokens: list[str]
    oov: frozenset = field(default_factory=frozenset)
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.tokens or self.tokens[PAD_INDEX] != PAD_TOKEN:
            raise ValueError("vocabulary must start with the PAD token")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    @property
    def unk_index(self) -> int | None:
        return self.index.get(UNK_TOKEN)

    def words(self) -> list[tuple[int, str]]:
        """(index, token) for every real token, skipping PAD and UNK."""
        return [(i, t) for i, t in enumerate(self.tokens) if t not in (PAD_TOKEN, UNK_TOKEN)]

    def decode(self, indices) -> list[str]:
        return [self.tokens[i] for i in indices]


@dataclass
class EmbeddingTable:
    weights: np.ndarray
    trainable: bool = True

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class EncodedExample:
    indices: np.ndarray
    mask: np.ndarray

    @property
    def length(self) -> int:
        return int(self.mask.sum())


def load_pretrained(path, dim: int, restrict_to: Iterable[str] | None = None,
                    strict: bool = True) -> dict[str, np.ndarray]:
    """Read a GloVe-style text file: ``token v1 ... v_dim`` per line.

    The file is streamed; with ``restrict_to`` only those tokens are kept,
    which is how the 840B-token file is used without holding it in memory.
    ``strict=False`` skips malformed lines instead of raising (the public
    Common Crawl file has a handful of tokens containing spaces).
    """
    keep = set(restrict_to) if restrict_to is not None else None
    table: dict[str, np.ndarray] = {}
    skipped = 0
    with Path(path).open(encoding="utf-8", errors="strict") as fh:
        for line_number, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip("\r").split(" ")
            if parts == [""]:
                continue
            try:
                if len(parts) != dim + 1:
                    raise ParseError(
                        f"{path}:{line_number}: expected {dim} components, got {len(parts) - 1}")
                token = parts[0]
                if keep is not None and token not in keep:
                    continue
                try:
                    vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
                except ValueError:
                    raise ParseError(f"{path}:{line_number}: non-numeric component") from None
                if not np.all(np.isfinite(vec)):
                    raise ParseError(f"{path}:{line_number}: non-finite component")
            except ParseError:
                if strict:
                    raise
                skipped += 1
                continue
            table[token] = vec
    if skipped:
        log.warning("skipped %d malformed lines in %s", skipped, path)
    return table


def build_vocab(corpus: Sequence[Sequence[str]], pretrained: dict[str, np.ndarray],
                seed: int, dim: int | None = None, allow_unk: bool = False,
                dtype=np.float32) -> tuple[Vocabulary, EmbeddingTable]:
    """Vocabulary of corpus token types in first-occurrence order.

    Rows come from ``pretrained`` where available; OOV rows (and UNK when
    ``allow_unk``) are drawn uniform(-0.05, 0.05); the PAD row is zero.
    """
    if dim is None:
        if not pretrained:
            raise ValueError("dim is required when the pretrained mapping is empty")
        dim = len(next(iter(pretrained.values())))
    tokens = [PAD_TOKEN] + ([UNK_TOKEN] if allow_unk else [])
    seen = set(tokens)
    for seq in corpus:
        for tok in seq:
            if tok not in seen:
                seen.add(tok)
                tokens.append(tok)
    rng = np.random.default_rng(seed)
    weights = np.zeros((len(tokens), dim), dtype=np.float64)
    oov = []
    for i, tok in enumerate(tokens):
        if i == PAD_INDEX:
            continue
        vec = pretrained.get(tok)
        if vec is None:
            weights[i] = rng.uniform(-OOV_RANGE, OOV_RANGE, size=dim)
            if tok != UNK_TOKEN:
                oov.append(tok)
        else:
            if len(vec) != dim:
                raise ValueError(f"pretrained vector for {tok!r} has {len(vec)} dims, expected {dim}")
            weights[i] = vec
    return Vocabulary(tokens, frozenset(oov)), EmbeddingTable(weights.astype(dtype))


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> EncodedExample:
    """Head-truncate or end-pad to ``max_len``."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not tokens:
        raise EncodingError("cannot encode an empty token sequence")
    unk = vocab.unk_index
    indices = np.full(max_len, PAD_INDEX, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.int8)
    for pos, tok in enumerate(tokens[:max_len]):
        i = vocab.index.get(tok)
        if i is None or i == PAD_INDEX:
            if unk is None:
                raise EncodingError(f"token {tok!r} is not in the vocabulary")
            i = unk
        indices[pos] = i
        mask[pos] = 1
    return EncodedExample(indices, mask)


def encode_batch(sequences: Sequence[Sequence[str]], vocab: Vocabulary,
                 max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack encodings into ``(indices [N, max_len], mask [N, max_len])``."""
    encoded = [encode(seq, vocab, max_len) for seq in sequences]
    if not encoded:
        return (np.zeros((0, max_len), dtype=np.int64), np.zeros((0, max_len), dtype=np.int8))
    return (np.stack([e.indices for e in encoded]), np.stack([e.mask for e in encoded]))
