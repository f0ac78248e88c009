"""Phase-1 predictor: period capture from causal attention weights and CO continuation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .nnkernel import (
    Adam,
    AttentionParams,
    attention_backward,
    attention_forward,
    bin_output,
    sigmoid,
)

log = logging.getLogger(__name__)

CHECKPOINT_KIND = 1


class NoPeriodError(ValueError):
    """No row of the attention map points at an earlier, similar slot."""


@dataclass(frozen=True)
class PeriodEstimate:
    period: int
    offset: int
    confidence: float


def calculate_period(
    weights: np.ndarray, threshold: float = 0.3, *, rel_tol: float = 1e-9
) -> PeriodEstimate:
    """Recover the common period from an (ell, ell) causal attention map.

    A cell is *high* when its weight reaches ``threshold`` times the row
    maximum (exact repeats of a slot tie with the diagonal, so their weight
    equals the maximum). Every row votes for each lag at which it holds a
    high cell; a lag's support is the fraction of rows old enough to have
    that lag that voted for it. The period is the smallest lag with the
    highest support.
    """
    weights = np.asarray(weights, dtype=np.float64)
    ell = weights.shape[0]
    if weights.shape != (ell, ell):
        raise ValueError(f"weights must be square, got {weights.shape}")
    if ell < 2:
        raise NoPeriodError("need at least two slots to see a repeat")
    row_max = weights.max(axis=1, keepdims=True)
    high = weights >= row_max * (threshold - rel_tol)
    high &= np.tril(np.ones((ell, ell), dtype=bool), k=-1)
    if not high.any():
        raise NoPeriodError("every row abstained: no earlier slot received a high weight")
    max_lag = ell // 2
    support = np.zeros(max_lag + 1)
    for lag in range(1, max_lag + 1):
        r = np.arange(lag, ell)
        support[lag] = high[r, r - lag].mean()
    best = support.max()
    if best <= 0.0:
        raise NoPeriodError("no lag up to ell/2 is supported by any row")
    period = int(np.flatnonzero(support >= best - 1e-12)[0])
    return PeriodEstimate(period=period, offset=ell % period, confidence=float(best))


def brute_force_period(co: np.ndarray) -> int | None:
    """Smallest p <= ell/2 with co[t] == co[t + p] for every valid t, else None."""
    co = np.asarray(co)
    ell = co.shape[0]
    for p in range(1, ell // 2 + 1):
        if np.array_equal(co[p:], co[:-p]):
            return p
    return None


def shift_indices(ell: int, period: int, horizon: int) -> np.ndarray:
    """Rows of the last observed period that continue the sequence for ``horizon`` slots.

    Output row ``i`` is aligned with slot ``t + 1 + i`` where ``t`` is the
    last observed slot.
    """
    if not 1 <= period <= ell:
        raise ValueError(f"period {period} outside [1, {ell}]")
    offset = ell % period
    phase = (offset + np.arange(horizon)) % period
    # latest observed row in the same residue class
    return phase + period * ((ell - 1 - phase) // period)


def matrix_shift(m_v: np.ndarray, period: int, horizon: int) -> np.ndarray:
    return m_v[..., shift_indices(m_v.shape[-2], period, horizon), :]


@dataclass
class Ssan1Model:
    params: AttentionParams
    input_len: int = 40
    horizon: int = 40
    high_weight_threshold: float = 0.3
    standard: bool = False  # ablation variant: plain self-attention readout

    @property
    def n_channels(self) -> int:
        return self.params.d_model

    @classmethod
    def init(
        cls,
        n_channels: int = 16,
        input_len: int = 40,
        horizon: int = 40,
        seed: int = 0,
        high_weight_threshold: float = 0.3,
    ) -> "Ssan1Model":
        rng = np.random.default_rng(seed)
        params = AttentionParams.init(rng, n_channels, n_channels, n_channels, heads=1)
        return cls(params, input_len, horizon, high_weight_threshold)

    def attention(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        weights, _, _ = attention_forward(np.asarray(x, dtype=np.float64), p.w_q[0], p.w_k[0], p.w_v[0])
        return weights

    def to_matrices(self) -> list[np.ndarray]:
        p = self.params
        meta = np.array([[self.input_len, self.horizon, self.high_weight_threshold, float(self.standard)]])
        return [p.w_q[0], p.w_k[0], p.w_v[0], p.w_o, meta]

    @classmethod
    def from_matrices(cls, mats: list[np.ndarray]) -> "Ssan1Model":
        if len(mats) != 5:
            raise ValueError(f"expected 5 matrices for the phase-1 model, got {len(mats)}")
        w_q, w_k, w_v, w_o, meta = mats
        params = AttentionParams(w_q[None], w_k[None], w_v[None], w_o)
        return cls(params, int(meta[0, 0]), int(meta[0, 1]), float(meta[0, 2]), bool(meta[0, 3]))


def predict_co(
    model: Ssan1Model, x: np.ndarray
) -> tuple[np.ndarray, PeriodEstimate, np.ndarray]:
    """Predict the next ``model.horizon`` CO vectors from an (ell, U) binary window."""
    x = np.asarray(x, dtype=np.float64)
    p = model.params
    weights, _, _ = attention_forward(x, p.w_q[0], p.w_k[0], p.w_v[0])
    est = calculate_period(weights, model.high_weight_threshold)
    m_v = x @ p.w_v[0]
    logits = matrix_shift(m_v, est.period, model.horizon) @ p.w_o
    return bin_output(sigmoid(logits)), est, weights


def predict_standard(model: Ssan1Model, x: np.ndarray) -> np.ndarray:
    """Ablation: plain self-attention, context rows mapped straight to the output."""
    x = np.asarray(x, dtype=np.float64)
    p = model.params
    _, context, _ = attention_forward(x, p.w_q[0], p.w_k[0], p.w_v[0])
    return bin_output(sigmoid(_standard_rows(context, model.horizon) @ p.w_o))


def _standard_rows(context: np.ndarray, horizon: int) -> np.ndarray:
    ell = context.shape[-2]
    if horizon > ell:
        raise ValueError(f"standard attention emits at most {ell} rows, asked for {horizon}")
    return context[..., ell - horizon :, :]


def alignment_targets(x: np.ndarray, period: int) -> np.ndarray:
    """Target attention distribution per row: earlier-or-same slots at multiples of ``period``
    whose CO vector equals the row's. Rows without such a slot get an all-zero target."""
    ell = x.shape[-2]
    r = np.arange(ell)
    congruent = ((r[:, None] - r[None, :]) % period == 0) & (r[None, :] <= r[:, None])
    same = np.all(x[..., :, None, :] == x[..., None, :, :], axis=-1)
    t = (congruent & same).astype(np.float64)
    # rows younger than one period have no repeat to align to
    t[..., :period, :] = 0.0
    norm = t.sum(axis=-1, keepdims=True)
    return np.divide(t, norm, out=np.zeros_like(t), where=norm > 0)


@dataclass
class Ssan1Loss:
    total: float
    bce: float
    align: float
    grads: dict[str, np.ndarray] = field(repr=False)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def ssan1_loss(
    params: AttentionParams,
    x: np.ndarray,
    y: np.ndarray,
    periods: np.ndarray,
    *,
    align_weight: float = 1.0,
    standard: bool = False,
) -> Ssan1Loss:
    """Loss and analytic gradients on a batch.

    ``x``: (B, ell, U), ``y``: (B, T, U), ``periods``: (B,) true periods used
    for the value-row gather. ``standard=True`` scores the ablation variant
    (context rows through ``w_o``, no period logic, no alignment term).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    b, ell, _ = x.shape
    horizon = y.shape[1]
    w_q, w_k, w_v, w_o = params.w_q[0], params.w_k[0], params.w_v[0], params.w_o
    weights, context, cache = attention_forward(x, w_q, w_k, w_v)

    if standard:
        rows = _standard_rows(context, horizon)
    else:
        idx = np.stack([shift_indices(ell, int(p), horizon) for p in periods])
        m_v = cache.v
        rows = np.take_along_axis(m_v, idx[:, :, None], axis=1)
    logits = rows @ w_o
    n_bits = logits.size
    bce = float(np.sum(_softplus(logits) - y * logits) / n_bits)
    d_logits = (sigmoid(logits) - y) / n_bits
    d_wo = np.einsum("bti,btj->ij", rows, d_logits)
    d_rows = d_logits @ w_o.T

    align = 0.0
    d_scores = None
    if standard:
        d_context = np.zeros_like(context)
        d_context[:, ell - horizon :, :] = d_rows
        g = attention_backward(cache, w_q, w_k, w_v, d_context=d_context)
        d_wv = g.w_v
    else:
        d_mv = np.zeros_like(cache.v)
        np.add.at(d_mv, (np.arange(b)[:, None], idx), d_rows)
        d_wv = np.einsum("bli,blj->ij", x, d_mv)
        if align_weight > 0:
            target = np.stack([alignment_targets(x[k], int(periods[k])) for k in range(b)])
            has = target.sum(axis=-1) > 0
            n_rows = max(int(has.sum()), 1)
            logw = np.log(np.maximum(weights, 1e-300))
            align = float(-np.sum(target * logw) / n_rows)
            d_scores = align_weight * np.where(has[..., None], weights - target, 0.0) / n_rows
        g = attention_backward(cache, w_q, w_k, w_v, d_scores_extra=d_scores)
        d_wv = d_wv + g.w_v
    grads = {
        "w_q": g.w_q[None],
        "w_k": g.w_k[None],
        "w_v": d_wv[None],
        "w_o": d_wo,
    }
    return Ssan1Loss(total=bce + align_weight * align, bce=bce, align=align, grads=grads)


@dataclass
class Ssan1Sample:
    x: np.ndarray  # (ell, U)
    y: np.ndarray  # (T, U)
    period: int


def train_ssan1(
    samples: list[Ssan1Sample],
    epochs: int = 100,
    *,
    lr: float = 1e-2,
    batch_size: int = 10,
    seed: int = 0,
    align_weight: float = 1.0,
    augment: bool = True,
    standard: bool = False,
    model: Ssan1Model | None = None,
    high_weight_threshold: float = 0.3,
) -> tuple[Ssan1Model, list[float]]:
    """Fit a phase-1 model; returns the model and the mean loss of every epoch.

    ``augment`` relabels channels with a fresh random permutation per sample
    and epoch so every channel row of the weights is trained.
    """
    if not samples:
        raise ValueError("training set is empty")
    ell, n_channels = samples[0].x.shape
    horizon = samples[0].y.shape[0]
    rng = np.random.default_rng(seed)
    if model is None:
        model = Ssan1Model.init(n_channels, ell, horizon, seed=seed, high_weight_threshold=high_weight_threshold)
        model.standard = standard
    params = model.params
    opt = Adam(lr=lr)
    xs = np.stack([s.x for s in samples]).astype(np.float64)
    ys = np.stack([s.y for s in samples]).astype(np.float64)
    ps = np.array([s.period for s in samples])
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(samples))
        total = 0.0
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            xb, yb = xs[sel], ys[sel]
            if augment:
                perms = np.stack([rng.permutation(n_channels) for _ in sel])
                xb = np.take_along_axis(xb, perms[:, None, :], axis=2)
                yb = np.take_along_axis(yb, perms[:, None, :], axis=2)
            res = ssan1_loss(params, xb, yb, ps[sel], align_weight=align_weight, standard=standard)
            opt.step(params.as_dict(), res.grads)
            total += res.total * len(sel)
        history.append(total / len(samples))
        log.debug("ssan1 epoch %d loss %.6f", epoch, history[-1])
    return model, history


def bit_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(truth)))
