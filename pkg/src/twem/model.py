"""The transformed word embedding classifier: graph, training, persistence.

Per token: embedding -> shared dense projection + ReLU. Per document:
concat(mean pool, max pool) -> dense+ReLU -> dense+ReLU -> dropout ->
dense -> softmax. Pooling is masked, so padding never contributes.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .corpus import stratified_split
from .embed import Vocabulary, build_vocab, encode_batch
from .errors import ConfigurationError, FormatError, TrainingError
from .evaluation import confusion, metrics
from .text import PreprocessScheme

log = logging.getLogger(__name__)

MAGIC = b"TWEM1\n"
TENSOR_ORDER = ("embeddings", "proj_W", "proj_b", "hidden1_W", "hidden1_b",
                "hidden2_W", "hidden2_b", "out_W", "out_b")

HIDDEN = 50
# Figure quoted in the literature for this architecture; the exact count
# from the layer sizes is larger (see param_count_note).
QUOTED_PARAM_COUNT = 100_000


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 512
    max_len: int = 50
    dropout: float = 0.1
    epochs: int = 15
    seed: int = 0
    val_fraction: float = 0.1
    scheme: str = PreprocessScheme.TOKENIZE.value
    hidden: int = HIDDEN

    def __post_init__(self):
        PreprocessScheme.parse(self.scheme)
        if self.lr <= 0 or self.batch_size < 1 or self.max_len < 1 or self.hidden < 1:
            raise ConfigurationError("lr, batch_size, max_len and hidden must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")
        if not 0.0 <= self.val_fraction <= 0.5:
            raise ConfigurationError("val_fraction must be in [0, 0.5]")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_weighted_f1: list = field(default_factory=list)
    selected_epoch: int | None = None

    def to_dict(self):
        return asdict(self)


class TwemModel:
    def __init__(self, vocab: Vocabulary, embeddings: np.ndarray, label_names: Sequence[str],
                 hidden: int = HIDDEN, max_len: int = 50,
                 scheme: str = PreprocessScheme.TOKENIZE.value, seed: int = 0,
                 dtype=None):
        dtype = np.dtype(dtype or embeddings.dtype)
        if embeddings.shape[0] != len(vocab):
            raise ValueError(f"embedding rows {embeddings.shape[0]} != vocabulary size {len(vocab)}")
        if len(label_names) < 2:
            raise ValueError("need at least two labels")
        self.vocab = vocab
        self.label_names = tuple(label_names)
        self.max_len = max_len
        self.scheme = PreprocessScheme.parse(scheme).value
        D, C = embeddings.shape[1], len(label_names)
        rng = nn.rng_stream(seed, "twem.init")
        glorot = lambda i, o: nn.glorot_uniform(rng, i, o, dtype)  # noqa: E731
        zeros = lambda o: np.zeros((1, o), dtype=dtype)  # noqa: E731
        self.embeddings = nn.Param(np.array(embeddings, dtype=dtype))
        self.proj_W, self.proj_b = nn.Param(glorot(D, D)), nn.Param(zeros(D))
        self.hidden1_W, self.hidden1_b = nn.Param(glorot(2 * D, hidden)), nn.Param(zeros(hidden))
        self.hidden2_W, self.hidden2_b = nn.Param(glorot(hidden, hidden)), nn.Param(zeros(hidden))
        self.out_W, self.out_b = nn.Param(glorot(hidden, C)), nn.Param(zeros(C))

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def hidden(self) -> int:
        return self.hidden1_W.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def params(self) -> list[nn.Param]:
        return [getattr(self, name) for name in TENSOR_ORDER]

    def named_params(self) -> dict[str, nn.Param]:
        return {name: getattr(self, name) for name in TENSOR_ORDER}

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.params()]

    def restore(self, values: Sequence[np.ndarray]):
        for p, v in zip(self.params(), values):
            p.value[...] = v

    def astype(self, dtype) -> "TwemModel":
        """Copy with every parameter cast (float64 for gradient checks)."""
        other = TwemModel.__new__(TwemModel)
        other.vocab, other.label_names = self.vocab, self.label_names
        other.max_len, other.scheme = self.max_len, self.scheme
        for name, p in self.named_params().items():
            setattr(other, name, nn.Param(p.value.astype(dtype)))
        return other


def param_count(model: TwemModel | None = None, *, dim: int = 300, hidden: int = HIDDEN,
                n_classes: int = 3) -> int:
    """Trainable parameters excluding the embedding table."""
    if model is not None:
        return sum(p.value.size for name, p in model.named_params().items() if name != "embeddings")
    D, H, C = dim, hidden, n_classes
    return (D * D + D) + (2 * D * H + H) + (H * H + H) + (H * C + C)


def param_count_note(n_classes: int = 3, dim: int = 300, hidden: int = HIDDEN) -> str:
    exact = param_count(dim=dim, hidden=hidden, n_classes=n_classes)
    return (f"exact non-embedding parameter count is {exact:,}; the commonly quoted "
            f"~{QUOTED_PARAM_COUNT // 1000}k is approximate and understates it by "
            f"{exact - QUOTED_PARAM_COUNT:,}")


@dataclass
class ForwardCache:
    indices: np.ndarray
    mask: np.ndarray
    x: np.ndarray           # [B*T, D] embedded tokens
    z_pre: np.ndarray       # [B*T, D] projection before ReLU
    z: np.ndarray           # [B, T, D]
    argmax: np.ndarray      # [B, D]
    d: np.ndarray           # [B, 2D]
    h1_pre: np.ndarray
    h1: np.ndarray
    h2_pre: np.ndarray
    h2: np.ndarray
    drop_scale: np.ndarray | None
    h2d: np.ndarray
    probs: np.ndarray


def forward(model: TwemModel, indices: np.ndarray, mask: np.ndarray, training: bool = False,
            dropout_rate: float = 0.0, rng: np.random.Generator | None = None
            ) -> tuple[np.ndarray, ForwardCache]:
    indices = np.asarray(indices, dtype=np.int64)
    mask = np.asarray(mask)
    B, T = indices.shape
    D = model.dim
    x = model.embeddings.value[indices.reshape(-1)]
    z_pre = nn.linear(x, model.proj_W, model.proj_b)
    z = nn.relu(z_pre).reshape(B, T, D)
    m, argmax = nn.masked_max_pool(z, mask)
    a = nn.masked_mean_pool(z, mask)
    d = np.concatenate([a, m], axis=1)
    h1_pre = nn.linear(d, model.hidden1_W, model.hidden1_b)
    h1 = nn.relu(h1_pre)
    h2_pre = nn.linear(h1, model.hidden2_W, model.hidden2_b)
    h2 = nn.relu(h2_pre)
    h2d, scale = nn.dropout(h2, dropout_rate, training, rng)
    logits = nn.linear(h2d, model.out_W, model.out_b)
    probs = nn.softmax(logits)
    cache = ForwardCache(indices, mask, x, z_pre, z, argmax, d, h1_pre, h1,
                         h2_pre, h2, scale, h2d, probs)
    return probs, cache


def loss_and_backward(model: TwemModel, cache: ForwardCache, labels) -> float:
    """Mean cross-entropy of the cached batch; accumulates every parameter gradient."""
    labels = np.asarray(labels, dtype=np.int64)
    logits = nn.linear(cache.h2d, model.out_W, model.out_b)
    probs, loss = nn.softmax_xent(logits, labels)
    dlogits = nn.softmax_xent_backward(probs, labels)
    dh2d = nn.linear_backward(dlogits, cache.h2d, model.out_W, model.out_b)
    dh2 = nn.dropout_backward(dh2d, cache.drop_scale)
    dh1 = nn.linear_backward(nn.relu_backward(dh2, cache.h2_pre), cache.h1,
                             model.hidden2_W, model.hidden2_b)
    dd = nn.linear_backward(nn.relu_backward(dh1, cache.h1_pre), cache.d,
                            model.hidden1_W, model.hidden1_b)
    B, T, D = cache.z.shape
    da, dm = dd[:, :D], dd[:, D:]
    dz = nn.masked_mean_pool_backward(da, cache.mask) + nn.masked_max_pool_backward(dm, cache.argmax, T)
    dz_pre = nn.relu_backward(dz.reshape(B * T, D), cache.z_pre)
    dx = nn.linear_backward(dz_pre, cache.x, model.proj_W, model.proj_b)
    np.add.at(model.embeddings.grad, cache.indices.reshape(-1), dx)
    return loss


def predict_proba(model: TwemModel, indices: np.ndarray, mask: np.ndarray,
                  batch_size: int = 1024) -> np.ndarray:
    out = [forward(model, indices[i:i + batch_size], mask[i:i + batch_size])[0]
           for i in range(0, len(indices), batch_size)]
    if not out:
        return np.zeros((0, model.n_classes), dtype=model.out_W.value.dtype)
    return np.concatenate(out)


def predict(model: TwemModel, sequences: Sequence[Sequence[str]],
            return_proba: bool = False):
    """Argmax label per token sequence (ties go to the lowest class index)."""
    indices, mask = encode_batch(sequences, model.vocab, model.max_len)
    probs = predict_proba(model, indices, mask)
    labels = probs.argmax(axis=1)
    return (labels, probs) if return_proba else labels


def _eval_loss(model, indices, mask, labels, batch_size):
    total = 0.0
    for i in range(0, len(labels), batch_size):
        probs, cache = forward(model, indices[i:i + batch_size], mask[i:i + batch_size])
        logits = nn.linear(cache.h2d, model.out_W, model.out_b)
        _, loss = nn.softmax_xent(logits, labels[i:i + batch_size])
        total += loss * len(labels[i:i + batch_size])
    return total / len(labels)


def train_encoded(model: TwemModel, indices: np.ndarray, mask: np.ndarray, labels: np.ndarray,
                  config: TrainConfig) -> TrainHistory:
    """Train ``model`` in place on pre-encoded examples and return its history.

    A stratified ``val_fraction`` is held out for per-epoch validation loss;
    the parameters from the lowest-validation-loss epoch are restored at the
    end. Without a validation split, training loss is used for selection.
    """
    labels = np.asarray(labels, dtype=np.int64)
    history = TrainHistory()
    if config.epochs == 0:
        return history
    if len(np.unique(labels)) < 2:
        raise TrainingError("training data must contain at least two classes")
    fit_pos, val_pos = stratified_split(labels, config.val_fraction,
                                        nn.derive_seed(config.seed, "twem.val_split"))
    shuffle_rng = nn.rng_stream(config.seed, "twem.shuffle")
    dropout_rng = nn.rng_stream(config.seed, "twem.dropout")
    params = model.params()
    best_loss, best_values = np.inf, None
    for epoch in range(config.epochs):
        order = fit_pos[shuffle_rng.permutation(len(fit_pos))]
        epoch_loss = 0.0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start:start + config.batch_size]
            _, cache = forward(model, indices[batch], mask[batch], training=True,
                               dropout_rate=config.dropout, rng=dropout_rng)
            loss = loss_and_backward(model, cache, labels[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            for p in params:
                nn.rmsprop_step(p, config.lr)
            epoch_loss += loss * len(batch)
        history.train_loss.append(epoch_loss / len(order))
        if len(val_pos):
            val_loss = _eval_loss(model, indices[val_pos], mask[val_pos], labels[val_pos],
                                  config.batch_size)
            val_pred = predict_proba(model, indices[val_pos], mask[val_pos]).argmax(axis=1)
            report = metrics(confusion(labels[val_pos], val_pred, model.n_classes))
            history.val_loss.append(val_loss)
            history.val_weighted_f1.append(report.weighted_f1)
            selection_loss = val_loss
        else:
            selection_loss = history.train_loss[-1]
        log.info("epoch %d train_loss=%.4f val_loss=%s", epoch, history.train_loss[-1],
                 f"{history.val_loss[-1]:.4f}" if history.val_loss else "-")
        if selection_loss < best_loss:
            best_loss, best_values = selection_loss, model.snapshot()
            history.selected_epoch = epoch
    model.restore(best_values)
    return history


def train(sequences: Sequence[Sequence[str]], labels, label_names: Sequence[str],
          pretrained: dict, config: TrainConfig, dim: int | None = None,
          allow_unk: bool = False) -> tuple[TwemModel, TrainHistory]:
    """Build the vocabulary over ``sequences``, initialise and train a model."""
    vocab, table = build_vocab(sequences, pretrained, nn.derive_seed(config.seed, "embed.oov"),
                               dim=dim, allow_unk=allow_unk)
    model = TwemModel(vocab, table.weights, label_names, hidden=config.hidden,
                      max_len=config.max_len, scheme=config.scheme, seed=config.seed)
    indices, mask = encode_batch(sequences, vocab, config.max_len)
    history = train_encoded(model, indices, mask, labels, config)
    return model, history


def _write_tensor(fh, arr: np.ndarray):
    data = np.ascontiguousarray(arr, dtype="<f4")
    fh.write(struct.pack("<Q", data.size))
    fh.write(data.tobytes())


def save_model(model: TwemModel, path):
    """Write the TWEM1 binary format.

    Layout: magic; ``V D C max_len scheme``; tab-joined label names; one
    vocabulary token per line; then each tensor in ``TENSOR_ORDER`` as an
    8-byte little-endian element count followed by little-endian float32.
    """
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        V, D, C = len(model.vocab), model.dim, model.n_classes
        fh.write(f"{V} {D} {C} {model.max_len} {model.scheme}\n".encode())
        fh.write(("\t".join(model.label_names) + "\n").encode("utf-8"))
        for tok in model.vocab.tokens:
            fh.write((tok + "\n").encode("utf-8"))
        for p in model.params():
            _write_tensor(fh, p.value)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def line(self, what: str) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise FormatError(f"truncated model file while reading {what}")
        text = self.data[self.pos:end].decode("utf-8")
        self.pos = end + 1
        return text

    def tensor(self, name: str) -> np.ndarray:
        if self.pos + 8 > len(self.data):
            raise FormatError(f"truncated model file: missing length of tensor {name}")
        (n,) = struct.unpack_from("<Q", self.data, self.pos)
        self.pos += 8
        nbytes = 4 * n
        if self.pos + nbytes > len(self.data):
            raise FormatError(f"truncated model file: tensor {name} is incomplete")
        arr = np.frombuffer(self.data, dtype="<f4", count=n, offset=self.pos).astype(np.float32)
        self.pos += nbytes
        return arr


def load_model(path) -> TwemModel:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise FormatError(f"{path}: bad magic {data[:6]!r}")
    r = _Reader(data)
    r.pos = len(MAGIC)
    try:
        V_s, D_s, C_s, max_len_s, scheme = r.line("header").split(" ")
        V, D, C, max_len = int(V_s), int(D_s), int(C_s), int(max_len_s)
        PreprocessScheme.parse(scheme)
    except ValueError as e:
        raise FormatError(f"{path}: malformed header ({e})") from None
    label_names = r.line("label names").split("\t")
    if len(label_names) != C:
        raise FormatError(f"{path}: header says {C} labels, found {len(label_names)}")
    tokens = [r.line(f"vocabulary entry {i}") for i in range(V)]
    flat = {name: r.tensor(name) for name in TENSOR_ORDER}
    if r.pos != len(data):
        raise FormatError(f"{path}: {len(data) - r.pos} trailing bytes")
    if flat["hidden1_b"].size == 0 or flat["hidden1_W"].size != 2 * D * flat["hidden1_b"].size:
        raise FormatError(f"{path}: inconsistent hidden layer sizes")
    H = flat["hidden1_b"].size
    shapes = {"embeddings": (V, D), "proj_W": (D, D), "proj_b": (1, D),
              "hidden1_W": (2 * D, H), "hidden1_b": (1, H), "hidden2_W": (H, H),
              "hidden2_b": (1, H), "out_W": (H, C), "out_b": (1, C)}
    try:
        vocab = Vocabulary(tokens)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None
    model = TwemModel.__new__(TwemModel)
    model.vocab, model.label_names, model.max_len, model.scheme = vocab, tuple(label_names), max_len, scheme
    for name in TENSOR_ORDER:
        if flat[name].size != int(np.prod(shapes[name])):
            raise FormatError(f"{path}: tensor {name} has {flat[name].size} values, "
                              f"expected shape {shapes[name]}")
        setattr(model, name, nn.Param(flat[name].reshape(shapes[name]).copy()))
    return model

