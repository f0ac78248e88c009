"""Small numeric kernel: attention primitives with analytic gradients, Adam, checkpoints.

Matrices are float64 numpy arrays. Every attention routine accepts an
optional leading batch axis, so ``x`` may be ``(seq, d)`` or ``(batch, seq, d)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis; ``-inf`` entries get exactly zero weight."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def causal_mask(n: int) -> np.ndarray:
    """Boolean (n, n) mask, True where column > row (blocked)."""
    return np.triu(np.ones((n, n), dtype=bool), k=1)


@dataclass
class AttentionParams:
    """Weights of one (possibly multi-head) attention layer.

    ``w_q``, ``w_k``, ``w_v`` are stacked per head: ``(H, d_model, d_head)``.
    ``w_o`` maps the concatenated heads ``(H * d_head, d_out)``.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    def __post_init__(self):
        h, d_model, d_head = self.w_q.shape
        for name in ("w_k", "w_v"):
            if getattr(self, name).shape != (h, d_model, d_head):
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {(h, d_model, d_head)}")
        if self.w_o.ndim != 2 or self.w_o.shape[0] != h * d_head:
            raise ShapeError(f"w_o has shape {self.w_o.shape}, expected ({h * d_head}, d_out)")

    @property
    def head_count(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_model(self) -> int:
        return self.w_q.shape[1]

    @property
    def d_head(self) -> int:
        return self.w_q.shape[2]

    @property
    def d_out(self) -> int:
        return self.w_o.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w_q": self.w_q, "w_k": self.w_k, "w_v": self.w_v, "w_o": self.w_o}

    def copy(self) -> "AttentionParams":
        return AttentionParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        d_model: int,
        d_head: int,
        d_out: int,
        heads: int = 1,
        scale: float | None = None,
    ) -> "AttentionParams":
        """Gaussian init with std ``1/sqrt(fan_in)`` unless ``scale`` is given."""
        s_in = scale if scale is not None else 1.0 / np.sqrt(d_model)
        s_out = scale if scale is not None else 1.0 / np.sqrt(heads * d_head)
        return cls(
            w_q=rng.normal(0.0, s_in, size=(heads, d_model, d_head)),
            w_k=rng.normal(0.0, s_in, size=(heads, d_model, d_head)),
            w_v=rng.normal(0.0, s_in, size=(heads, d_model, d_head)),
            w_o=rng.normal(0.0, s_out, size=(heads * d_head, d_out)),
        )


@dataclass
class AttentionCache:
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    scale: float
    causal: bool = True


def _t(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def attention_forward(
    x: np.ndarray,
    w_q: np.ndarray,
    w_k: np.ndarray,
    w_v: np.ndarray,
    *,
    causal: bool = True,
) -> tuple[np.ndarray, np.ndarray, AttentionCache]:
    """Scaled dot-product self-attention for a single head.

    Returns ``(weights, context, cache)``; ``cache`` feeds :func:`attention_backward`.
    """
    q = matmul(x, w_q)
    k = matmul(x, w_k)
    v = matmul(x, w_v)
    scale = 1.0 / np.sqrt(w_q.shape[-1])
    scores = (q @ _t(k)) * scale
    if causal:
        scores = np.where(causal_mask(scores.shape[-1]), -np.inf, scores)
    weights = softmax_rows(scores)
    context = weights @ v
    return weights, context, AttentionCache(x, q, k, v, weights, scale, causal)


def masked_attention(x: np.ndarray, p: AttentionParams, head: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Causal self-attention of head ``head``: returns ``(weights, context)``."""
    weights, context, _ = attention_forward(x, p.w_q[head], p.w_k[head], p.w_v[head])
    return weights, context


@dataclass
class AttentionGrads:
    x: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    scores: np.ndarray = field(repr=False)


def attention_backward(
    cache: AttentionCache,
    w_q: np.ndarray,
    w_k: np.ndarray,
    w_v: np.ndarray,
    d_context: np.ndarray | None = None,
    d_scores_extra: np.ndarray | None = None,
) -> AttentionGrads:
    """Gradients of a loss through :func:`attention_forward`.

    ``d_context`` is the upstream gradient at the context output.
    ``d_scores_extra`` is added directly to the gradient at the (scaled,
    pre-softmax) scores; losses defined on the softmax weights such as a
    cross-entropy pass ``weights - target`` here. Masked scores always get
    exactly zero gradient because their softmax weight is zero.
    """
    w = cache.weights
    d_scores = np.zeros_like(w)
    d_v = np.zeros_like(cache.v)
    if d_context is not None:
        d_w = d_context @ _t(cache.v)
        d_v = _t(w) @ d_context
        d_scores = w * (d_w - np.sum(d_w * w, axis=-1, keepdims=True))
    if d_scores_extra is not None:
        if cache.causal:
            d_scores_extra = np.where(causal_mask(w.shape[-1]), 0.0, d_scores_extra)
        d_scores = d_scores + d_scores_extra
    d_q = (d_scores @ cache.k) * cache.scale
    d_k = (_t(d_scores) @ cache.q) * cache.scale
    x = cache.x
    d_wq = _sum_batch(_t(x) @ d_q)
    d_wk = _sum_batch(_t(x) @ d_k)
    d_wv = _sum_batch(_t(x) @ d_v)
    d_x = d_q @ w_q.T + d_k @ w_k.T + d_v @ w_v.T
    return AttentionGrads(x=d_x, w_q=d_wq, w_k=d_wk, w_v=d_wv, scores=d_scores)


def _sum_batch(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, *a.shape[-2:]).sum(axis=0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bin_output(z: np.ndarray) -> np.ndarray:
    """Threshold at 0.5: strictly greater maps to 1, everything else to 0."""
    return (np.asarray(z) > 0.5).astype(np.uint8)


class Adam:
    """Adaptive-moment optimizer updating a dict of arrays in place."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def optimizer_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: Adam) -> None:
    state.step(params, grads)


# Checkpoint layout (all little-endian):
#   8s magic | u32 version | u32 kind | u32 count | count * (u32 rows, u32 cols) | float64 data
MAGIC = b"HOPCKPT\x00"
VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint is malformed or does not match the expected model."""


def save_checkpoint(path: str | Path, kind: int, matrices: list[np.ndarray]) -> None:
    mats = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in matrices]
    if any(m.ndim != 2 for m in mats):
        raise ShapeError("checkpoint entries must be 2-D")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, kind, len(mats)))
        for m in mats:
            fh.write(struct.pack("<II", *m.shape))
        for m in mats:
            fh.write(m.astype("<f8").tobytes(order="C"))


def load_checkpoint(path: str | Path) -> tuple[int, list[np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:8]!r}")
    version, kind, count = struct.unpack_from("<III", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    offset = 20
    shapes = []
    for _ in range(count):
        shapes.append(struct.unpack_from("<II", data, offset))
        offset += 8
    mats = []
    for rows, cols in shapes:
        n = rows * cols
        if offset + 8 * n > len(data):
            raise CheckpointError(f"{path}: truncated data")
        mats.append(np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(rows, cols).copy())
        offset += 8 * n
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    return kind, mats
