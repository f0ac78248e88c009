"""Phase-2 predictor: multi-head causal attention over received-power sequences."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .netsim import NOISE_FLOOR_DBM, ObservationTrace
from .nnkernel import Adam, AttentionParams, attention_backward, attention_forward
from .ssan1 import PeriodEstimate

log = logging.getLogger(__name__)

CHECKPOINT_KIND = 2


class InsufficientHistoryError(ValueError):
    """The trace is too short for the requested window and stride."""


@dataclass(frozen=True)
class PowerSequence:
    values: np.ndarray  # (W,) dBm
    stride: int
    channel: int
    anchor_slot: int

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


def power_window(rp: np.ndarray, channel: int, end: int, window: int, stride: int) -> np.ndarray | None:
    """Stride-subsampled column ``channel`` of ``rp`` ending at row ``end``; None if out of range."""
    start = end - (window - 1) * stride
    if start < 0 or end >= rp.shape[0]:
        return None
    return rp[start : end + 1 : stride, channel]


def extract_sequences(
    trace: ObservationTrace, est: PeriodEstimate | int, window: int, *, end: int | None = None
) -> list[PowerSequence]:
    """One stride-``period`` power sequence per sensed channel, ending at ``end``
    (default: the trace's last slot). Channels at the noise floor throughout are skipped."""
    period = est.period if isinstance(est, PeriodEstimate) else int(est)
    end = trace.ell - 1 if end is None else end
    if end - (window - 1) * period < 0:
        raise InsufficientHistoryError(
            f"need {(window - 1) * period + 1} slots up to slot {end} for window {window} at stride {period}"
        )
    out = []
    for ch in range(trace.n_channels):
        vals = power_window(trace.rp, ch, end, window, period)
        if np.all(vals <= NOISE_FLOOR_DBM):
            continue
        out.append(PowerSequence(vals.copy(), period, ch, end))
    return out


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass
class Ssan2Model:
    params: AttentionParams  # w_o: (H * d_head, 1) readout
    w_e: np.ndarray  # (1, d_model) scalar embedding
    b_e: np.ndarray  # (1, d_model)
    b_o: np.ndarray  # (1, 1)
    window: int = 30
    mean: float = 0.0
    std: float = 1.0
    floor: float = -np.inf  # inputs below this are raised to it before normalizing
    anchored: bool = False  # measure values from each window's last entry instead of ``mean``
    linear: bool = False  # work on 10^(-P/10), proportional to squared distance, instead of dBm

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")

    @property
    def d_model(self) -> int:
        return self.params.d_model

    @property
    def heads(self) -> int:
        return self.params.head_count

    @classmethod
    def init(cls, window: int = 30, heads: int = 3, d_model: int = 16, seed: int = 0) -> "Ssan2Model":
        """Random attention/embedding weights with a zero readout (outputs 0 until trained)."""
        rng = np.random.default_rng(seed)
        p = AttentionParams.init(rng, d_model, d_model, 1, heads=heads)
        p.w_o[:] = 0.0
        return cls(
            params=p,
            w_e=rng.normal(0.0, 1.0, size=(1, d_model)),
            b_e=np.zeros((1, d_model)),
            b_o=np.zeros((1, 1)),
            window=window,
        )

    def param_dict(self) -> dict[str, np.ndarray]:
        d = self.params.as_dict()
        d.update(w_e=self.w_e, b_e=self.b_e, b_o=self.b_o)
        return d

    def to_matrices(self) -> list[np.ndarray]:
        p = self.params
        h, d, dh = p.w_q.shape
        meta = np.array([[self.window, h, d, dh, self.mean, self.std, self.floor, float(self.anchored),
                          float(self.linear)]],
                        dtype=np.float64)
        return [meta, self.w_e, self.b_e, p.w_q.reshape(h * d, dh), p.w_k.reshape(h * d, dh),
                p.w_v.reshape(h * d, dh), p.w_o, self.b_o]

    @classmethod
    def from_matrices(cls, mats: list[np.ndarray]) -> "Ssan2Model":
        if len(mats) != 8:
            raise ValueError(f"expected 8 matrices for the phase-2 model, got {len(mats)}")
        meta, w_e, b_e, w_q, w_k, w_v, w_o, b_o = mats
        window, h, d, dh = (int(v) for v in meta[0, :4])
        p = AttentionParams(w_q.reshape(h, d, dh), w_k.reshape(h, d, dh), w_v.reshape(h, d, dh), w_o)
        return cls(p, w_e, b_e, b_o, window, float(meta[0, 4]), float(meta[0, 5]), float(meta[0, 6]),
                   bool(meta[0, 7]), bool(meta[0, 8]))


@dataclass
class _Forward:
    z: np.ndarray
    emb: np.ndarray
    caches: list
    concat: np.ndarray
    out: np.ndarray  # (B, W) normalized predictions at every position
    base: np.ndarray  # (B, 1) model-domain value that normalized zero stands for


def _encode(model: Ssan2Model, dbm: np.ndarray) -> np.ndarray:
    v = np.maximum(np.asarray(dbm, dtype=np.float64), model.floor)
    return 10.0 ** (-v / 10.0) if model.linear else v


def _decode(model: Ssan2Model, v: np.ndarray) -> np.ndarray:
    # predictions closer than the reference distance read as full transmit power
    return -10.0 * np.log10(np.maximum(v, 1.0)) if model.linear else v


def _forward(model: Ssan2Model, x: np.ndarray, *, causal: bool = True) -> _Forward:
    x = _encode(model, np.atleast_2d(x))
    base = x[..., -1:] if model.anchored else np.full(x.shape[:-1] + (1,), model.mean)
    z = (x - base) / model.std
    w = z.shape[-1]
    emb = z[..., None] * model.w_e[0] + model.b_e[0] + positional_encoding(w, model.d_model)
    p = model.params
    caches, contexts = [], []
    for h in range(p.head_count):
        _, ctx, cache = attention_forward(emb, p.w_q[h], p.w_k[h], p.w_v[h], causal=causal)
        caches.append(cache)
        contexts.append(ctx)
    concat = np.concatenate(contexts, axis=-1)
    out = (concat @ p.w_o)[..., 0] + model.b_o[0, 0]
    return _Forward(z, emb, caches, concat, out, base)


def predict_values(model: Ssan2Model, x: np.ndarray) -> np.ndarray:
    """Next-value predictions (dBm) for a batch of windows, shape (B, W) -> (B,)."""
    f = _forward(model, x)
    return _decode(model, f.out[..., -1] * model.std + f.base[..., 0])


def predict_all_positions(model: Ssan2Model, x: np.ndarray, *, causal: bool = True) -> np.ndarray:
    """Output at every position (dBm); position r only sees slots up to r when causal."""
    f = _forward(model, x, causal=causal)
    return _decode(model, f.out * model.std + f.base)


def predict_power(model: Ssan2Model, seq: PowerSequence | np.ndarray) -> float:
    """Predicted power one stride after the sequence's anchor slot."""
    values = seq.values if isinstance(seq, PowerSequence) else np.asarray(seq)
    if values.shape != (model.window,):
        raise ValueError(f"sequence length {values.shape} does not match model window {model.window}")
    return float(predict_values(model, values[None, :])[0])


def classify_region(pred: float, theta: float) -> str:
    return "inside" if pred >= theta else "outside"


@dataclass
class Ssan2Loss:
    total: float
    grads: dict[str, np.ndarray] = field(repr=False)


def ssan2_loss(model: Ssan2Model, x: np.ndarray, target: np.ndarray, *, all_positions: bool = False) -> Ssan2Loss:
    """Mean squared next-value error in normalized units.

    With ``all_positions`` every causal position is scored against the value
    that follows it (the window's own later entries, then ``target``).
    """
    f = _forward(model, x)
    t = (_encode(model, target) - f.base[:, 0]) / model.std
    b, w = f.out.shape
    d_out = np.zeros((b, w))
    if all_positions:
        nxt = np.concatenate([f.z[:, 1:], t[:, None]], axis=1)
        err = f.out - nxt
        loss = float(np.mean(err**2))
        d_out = 2.0 * err / err.size
    else:
        err = f.out[:, -1] - t
        loss = float(np.mean(err**2))
        d_out[:, -1] = 2.0 * err / b
    p = model.params
    dh = p.d_head
    d_wo = np.einsum("bwi,bw->i", f.concat, d_out)[:, None]
    d_bo = np.array([[d_out.sum()]])
    d_concat = d_out[..., None] * p.w_o[:, 0]
    d_emb = np.zeros_like(f.emb)
    g_q, g_k, g_v = (np.zeros_like(p.w_q) for _ in range(3))
    for h, cache in enumerate(f.caches):
        g = attention_backward(cache, p.w_q[h], p.w_k[h], p.w_v[h], d_context=d_concat[..., h * dh : (h + 1) * dh])
        d_emb += g.x
        g_q[h], g_k[h], g_v[h] = g.w_q, g.w_k, g.w_v
    grads = {
        "w_q": g_q,
        "w_k": g_k,
        "w_v": g_v,
        "w_o": d_wo,
        "w_e": np.einsum("bw,bwd->d", f.z, d_emb)[None, :],
        "b_e": d_emb.sum(axis=(0, 1))[None, :],
        "b_o": d_bo,
    }
    return Ssan2Loss(loss, grads)


def fit_normalization(model: Ssan2Model, x: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """``(mean, std)`` of the encoded corpus; anchored models use the RMS offset from each
    window's last value as scale and ignore the mean."""
    x = _encode(model, np.atleast_2d(x))
    target = _encode(model, np.ravel(target))
    if model.anchored:
        d = np.concatenate([np.ravel(x - x[:, -1:]), target - x[:, -1]])
        scale = float(np.sqrt(np.mean(d**2)))
        return 0.0, scale if scale > 0 else 1.0
    vals = np.concatenate([np.ravel(x), target])
    std = float(vals.std())
    return float(vals.mean()), std if std > 0 else 1.0


def train_ssan2(
    x: np.ndarray,
    target: np.ndarray,
    epochs: int = 500,
    *,
    heads: int = 3,
    d_model: int = 16,
    lr: float = 1e-2,
    lr_min: float | None = 1e-4,
    batch_size: int = 64,
    seed: int = 0,
    model: Ssan2Model | None = None,
    all_positions: bool = False,
    floor: float = -np.inf,
    anchored: bool = True,
    linear: bool = True,
) -> tuple[Ssan2Model, list[float]]:
    """Fit next-value prediction on windows ``x`` (n, W) and targets (n,), both dBm.

    ``lr_min`` enables cosine annealing of the step size from ``lr`` down to
    ``lr_min`` over the run; ``None`` keeps it fixed. ``floor`` (usually the
    power at the sensing edge) is stored on a fresh model and clamps inputs and
    targets, so slots where the node is out of range read as the edge value
    instead of the noise floor. ``anchored`` measures every window from its
    last value, so the network learns the change over one step. ``linear``
    trains on 10^(-P/10) instead of dBm.
    """
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("training set is empty")
    if model is None:
        model = Ssan2Model.init(window=x.shape[1], heads=heads, d_model=d_model, seed=seed)
        model.floor = float(floor)
        model.anchored = anchored
        model.linear = linear
        model.mean, model.std = fit_normalization(model, x, target)
    rng = np.random.default_rng(seed)
    opt = Adam(lr=lr)
    params = model.param_dict()
    history = []
    for epoch in range(epochs):
        if lr_min is not None and epochs > 1:
            opt.lr = lr_min + 0.5 * (lr - lr_min) * (1.0 + np.cos(np.pi * epoch / (epochs - 1)))
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            res = ssan2_loss(model, x[sel], target[sel], all_positions=all_positions)
            opt.step(params, res.grads)
            total += res.total * len(sel)
        history.append(total / len(x))
        log.debug("ssan2 epoch %d loss %.6g", epoch, history[-1])
    return model, history
