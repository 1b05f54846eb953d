"""Dense numeric core with hand-written backward rules.

Arrays are plain numpy; precision is whatever dtype the parameters carry
(float32 for training, float64 for gradient checking). Every ``*_backward``
returns the input gradient and accumulates parameter gradients in place.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, OptimizerError, PoolingError

RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-8


def derive_seed(seed: int, component: str) -> int:
    """Stable 64-bit seed for a named subsystem."""
    digest = hashlib.sha256(f"{component}:{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_stream(seed: int, component: str | None = None) -> np.random.Generator:
    """PCG64 generator; same seed gives the same draws on every platform."""
    s = derive_seed(seed, component) if component is not None else seed
    return np.random.Generator(np.random.PCG64(s))


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    cache: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)
        self.cache = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def linear(x: np.ndarray, W: Param, b: Param) -> np.ndarray:
    if x.ndim != 2 or W.value.ndim != 2 or x.shape[1] != W.shape[0] or b.shape != (1, W.shape[1]):
        raise DimensionError(
            f"linear: x{tuple(x.shape)} @ W{tuple(W.shape)} + b{tuple(b.shape)}")
    return x @ W.value + b.value


def linear_backward(dy: np.ndarray, x: np.ndarray, W: Param, b: Param) -> np.ndarray:
    W.grad += x.T @ dy
    b.grad += dy.sum(axis=0, keepdims=True)
    return dy @ W.value.T


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def _batched(Z: np.ndarray, mask: np.ndarray):
    if Z.ndim == 2:
        Z, mask = Z[None], np.asarray(mask)[None]
        squeeze = True
    else:
        squeeze = False
    mask = np.asarray(mask).astype(bool)
    if mask.shape != Z.shape[:2]:
        raise DimensionError(f"pooling: mask {mask.shape} does not match {Z.shape[:2]}")
    if not mask.any(axis=1).all():
        raise PoolingError("pooling over an all-padding sequence")
    return Z, mask, squeeze


def masked_max_pool(Z: np.ndarray, mask) -> tuple[np.ndarray, np.ndarray]:
    """Max over unmasked rows. Returns (pooled, argmax rows).

    Accepts ``[T, D]`` with ``[T]`` or a batch ``[B, T, D]`` with ``[B, T]``.
    Ties resolve to the lowest row index.
    """
    Zb, m, squeeze = _batched(Z, mask)
    filled = np.where(m[:, :, None], Zb, -np.inf)
    arg = filled.argmax(axis=1)
    out = np.take_along_axis(Zb, arg[:, None, :], axis=1)[:, 0, :]
    return (out[0], arg[0]) if squeeze else (out, arg)


def masked_max_pool_backward(dy: np.ndarray, argmax: np.ndarray, T: int) -> np.ndarray:
    squeeze = dy.ndim == 1
    dyb, argb = (dy[None], argmax[None]) if squeeze else (dy, argmax)
    B, D = dyb.shape
    dZ = np.zeros((B, T, D), dtype=dy.dtype)
    np.put_along_axis(dZ, argb[:, None, :], dyb[:, None, :], axis=1)
    return dZ[0] if squeeze else dZ


def masked_mean_pool(Z: np.ndarray, mask) -> np.ndarray:
    Zb, m, squeeze = _batched(Z, mask)
    w = m.astype(Zb.dtype)
    out = (Zb * w[:, :, None]).sum(axis=1) / w.sum(axis=1, keepdims=True)
    return out[0] if squeeze else out


def masked_mean_pool_backward(dy: np.ndarray, mask) -> np.ndarray:
    squeeze = dy.ndim == 1
    dyb = dy[None] if squeeze else dy
    w = np.asarray(mask, dtype=dy.dtype).reshape(dyb.shape[0], -1)
    w = w / w.sum(axis=1, keepdims=True)
    dZ = w[:, :, None] * dyb[:, None, :]
    return dZ[0] if squeeze else dZ


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels) -> tuple[np.ndarray, float]:
    """Row softmax and mean negative log-likelihood, both max-shifted."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[1] < 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"softmax_xent: logits {logits.shape}, labels {labels.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    probs = np.exp(shifted - log_norm[:, None])
    nll = log_norm - shifted[np.arange(len(labels)), labels]
    return probs, float(nll.mean())


def softmax_xent_backward(probs: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    d = probs.copy()
    d[np.arange(len(labels)), labels] -= 1
    return d / len(labels)


def dropout(x: np.ndarray, rate: float, training: bool,
            rng: np.random.Generator | None) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout. Returns (output, scale mask or None when identity)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    keep = rng.random(x.shape) >= rate
    scale = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * scale, scale


def dropout_backward(dy: np.ndarray, scale: np.ndarray | None) -> np.ndarray:
    return dy if scale is None else dy * scale


def rmsprop_step(p: Param, lr: float, rho: float = RMSPROP_RHO, eps: float = RMSPROP_EPS):
    if not np.all(np.isfinite(p.grad)):
        raise OptimizerError(f"non-finite gradient in parameter of shape {p.shape}")
    g = p.grad
    p.cache *= p.cache.dtype.type(rho)
    p.cache += p.cache.dtype.type(1.0 - rho) * g * g
    p.value -= p.value.dtype.type(lr) * g / (np.sqrt(p.cache) + p.value.dtype.type(eps))
    p.zero_grad()


def grad_check(loss_and_grad: Callable[[], float], params: Sequence[Param],
               epsilon: float = 1e-6, max_coords: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad`` must zero, then fill, every ``param.grad`` and return
    the loss from the current parameter values. Run with float64 params.
    With ``max_coords`` only that many coordinates per tensor are sampled.
    """
    for p in params:
        p.zero_grad()
    loss_and_grad()
    analytic = [p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = loss_and_grad()
            flat[i] = orig - epsilon
            f_minus = loss_and_grad()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * epsilon)
            ana = a.reshape(-1)[i]
            err = abs(ana - numeric) / max(abs(ana), abs(numeric), 1e-8)
            worst = max(worst, float(err))
    for p, a in zip(params, analytic):
        p.grad[...] = a
    return worst
