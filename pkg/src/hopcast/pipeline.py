"""Integrated two-phase prediction: CO continuation, power-based correction, metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netsim import NOISE_FLOOR_DBM, ObservationTrace
from .ssan1 import NoPeriodError, Ssan1Model, calculate_period, predict_co
from .ssan2 import Ssan2Model, predict_values


def correct_co(co_pred: int, rp_pred: float, theta: float) -> int:
    """Flip a predicted CO bit when the predicted power disagrees with it."""
    if co_pred and rp_pred < theta:
        return 0
    if not co_pred and rp_pred >= theta:
        return 1
    return int(co_pred)


def correct_matrix(co_pred: np.ndarray, rp_pred: np.ndarray, theta: float, mask: np.ndarray | None = None) -> np.ndarray:
    """Vectorized :func:`correct_co`; cells outside ``mask`` (or with NaN power) keep the raw bit."""
    co_pred = np.asarray(co_pred, dtype=np.uint8)
    rp_pred = np.asarray(rp_pred, dtype=np.float64)
    have = ~np.isnan(rp_pred)
    if mask is not None:
        have &= mask
    inside = np.zeros_like(have)
    inside[have] = rp_pred[have] >= theta
    out = co_pred.copy()
    out[have] = inside[have].astype(np.uint8)
    return out


@dataclass
class PredictionReport:
    co_truth: np.ndarray
    co_pred_raw: np.ndarray
    co_pred_corrected: np.ndarray
    n_bits: int
    n_fp: int
    n_fn: int
    n_fp_fixed: int
    n_fn_fixed: int
    n_broken: int
    mobility: str = ""
    bounded: bool = False
    period: int | None = None
    predictable: bool = True
    dataset: str = ""

    @property
    def n_correct_raw(self) -> int:
        return self.n_bits - self.n_fp - self.n_fn

    @property
    def accuracy_raw(self) -> float:
        return self.n_correct_raw / self.n_bits

    @property
    def fp_rate(self) -> float:
        return self.n_fp / self.n_bits

    @property
    def fn_rate(self) -> float:
        return self.n_fn / self.n_bits

    @property
    def fp_correction(self) -> float:
        """Share of FP bits flipped to correct; NaN when there were none."""
        return self.n_fp_fixed / self.n_fp if self.n_fp else math.nan

    @property
    def fn_correction(self) -> float:
        return self.n_fn_fixed / self.n_fn if self.n_fn else math.nan

    @property
    def correction_error(self) -> float:
        """Share of raw-correct bits that the correction made wrong."""
        return self.n_broken / self.n_correct_raw if self.n_correct_raw else 0.0

    @property
    def accuracy_corrected(self) -> float:
        return (self.n_correct_raw + self.n_fp_fixed + self.n_fn_fixed - self.n_broken) / self.n_bits


def evaluate(
    co_truth: np.ndarray,
    co_pred_raw: np.ndarray,
    co_pred_corrected: np.ndarray,
    *,
    mobility: str = "",
    bounded: bool = False,
    period: int | None = None,
) -> PredictionReport:
    truth = np.asarray(co_truth).astype(bool)
    raw = np.asarray(co_pred_raw).astype(bool)
    fixed = np.asarray(co_pred_corrected).astype(bool)
    if not truth.shape == raw.shape == fixed.shape:
        raise ValueError(f"shape mismatch: truth {truth.shape}, raw {raw.shape}, corrected {fixed.shape}")
    if truth.size == 0:
        raise ValueError("nothing to evaluate")
    fp = raw & ~truth
    fn = ~raw & truth
    ok_after = fixed == truth
    return PredictionReport(
        co_truth=truth.astype(np.uint8),
        co_pred_raw=raw.astype(np.uint8),
        co_pred_corrected=fixed.astype(np.uint8),
        n_bits=int(truth.size),
        n_fp=int(fp.sum()),
        n_fn=int(fn.sum()),
        n_fp_fixed=int((fp & ok_after).sum()),
        n_fn_fixed=int((fn & ok_after).sum()),
        n_broken=int(((raw == truth) & ~ok_after).sum()),
        mobility=mobility,
        bounded=bounded,
        period=period,
    )


def rolling_power_predictions(
    trace: ObservationTrace, m2: Ssan2Model, period: int, first: int, horizon: int
) -> np.ndarray:
    """Predicted power for slots ``first .. first + horizon - 1`` on every channel.

    The prediction for slot ``s`` uses the stride-``period`` history ending at
    ``s - period``, i.e. only slots already observed one period earlier. Cells
    without enough history are NaN.
    """
    w = m2.window
    slots = np.arange(first, first + horizon)
    out = np.full((horizon, trace.n_channels), np.nan)
    ends = slots - period
    ok = (ends - (w - 1) * period >= 0) & (ends < trace.ell)
    if not ok.any():
        return out
    idx = ends[ok][:, None] - period * np.arange(w - 1, -1, -1)[None, :]  # (k, W)
    seqs = trace.rp[idx]  # (k, W, U)
    k, _, u = seqs.shape
    flat = np.transpose(seqs, (0, 2, 1)).reshape(k * u, w)
    out[ok] = predict_values(m2, flat).reshape(k, u)
    return out


def sensing_period(m1: Ssan1Model, rp_window: np.ndarray, fallback: int) -> int:
    """Period read off the phase-1 attention over *sensed* occupancy (power above the noise floor).

    Transmitters between the interference and sensing radii show up here but
    not in CO, so this stays defined while a node approaches from outside.
    """
    sensed = (np.asarray(rp_window) > NOISE_FLOOR_DBM).astype(np.float64)
    try:
        return calculate_period(m1.attention(sensed), m1.high_weight_threshold).period
    except NoPeriodError:
        return fallback


def run_integrated(
    trace: ObservationTrace,
    m1: Ssan1Model,
    m2: Ssan2Model,
    *,
    end: int | None = None,
    mobility: str = "",
    bounded: bool = False,
    dataset: str = "",
) -> PredictionReport:
    """Predict the ``m1.horizon`` slots after ``end`` (default: the first full input window),
    correct them with phase-2 power predictions and score against the trace."""
    ell, horizon = m1.input_len, m1.horizon
    end = ell - 1 if end is None else end
    start = end - ell + 1
    if start < 0 or end + horizon >= trace.ell:
        raise ValueError(f"trace of {trace.ell} slots cannot hold input ending at {end} plus {horizon} slots")
    truth = trace.co[end + 1 : end + 1 + horizon]
    try:
        raw, est, _ = predict_co(m1, trace.co[start : end + 1])
    except NoPeriodError:
        rep = evaluate(truth, truth, truth, mobility=mobility, bounded=bounded)
        rep.predictable = False
        rep.dataset = dataset
        return rep
    stride = sensing_period(m1, trace.rp[start : end + 1], est.period)
    rp_pred = rolling_power_predictions(trace, m2, stride, end + 1, horizon)
    corrected = correct_matrix(raw, rp_pred, trace.theta)
    rep = evaluate(truth, raw, corrected, mobility=mobility, bounded=bounded, period=est.period)
    rep.dataset = dataset
    return rep


def window_ends(trace_len: int, input_len: int, horizon: int) -> list[int]:
    """Non-overlapping input windows whose horizon still fits in the trace."""
    return list(range(input_len - 1, trace_len - horizon, horizon))


@dataclass
class Aggregate:
    mobility: str
    bounded: bool
    reports: list[PredictionReport] = field(repr=False)

    @property
    def used(self) -> list[PredictionReport]:
        return [r for r in self.reports if r.predictable]

    @property
    def excluded(self) -> int:
        return len(self.reports) - len(self.used)

    def per_bit(self) -> dict[str, float]:
        """Ratios over the pooled bits of every predictable report."""
        return _ratios(self.used)

    def per_dataset(self) -> dict[str, float]:
        """Ratios pooled within each dataset, then averaged over datasets (n/a ratios skipped)."""
        groups: dict[str, list[PredictionReport]] = {}
        for r in self.used:
            groups.setdefault(r.dataset, []).append(r)
        per = [_ratios(g) for g in groups.values()]
        out = {}
        for key in METRIC_COLUMNS:
            vals = [m[key] for m in per if not math.isnan(m[key])]
            out[key] = float(np.mean(vals)) if vals else math.nan
        return out

    @property
    def datasets(self) -> int:
        return len({r.dataset for r in self.used})


def _ratios(reports: list[PredictionReport]) -> dict[str, float]:
    total = lambda name: sum(getattr(r, name) for r in reports)
    bits, fp, fn = total("n_bits"), total("n_fp"), total("n_fn")
    if bits == 0:
        return {k: math.nan for k in METRIC_COLUMNS}
    correct = bits - fp - fn
    fpf, fnf, broken = total("n_fp_fixed"), total("n_fn_fixed"), total("n_broken")
    return {
        "accuracy": correct / bits,
        "fp": fp / bits,
        "fn": fn / bits,
        "fp_correction": fpf / fp if fp else math.nan,
        "fn_correction": fnf / fn if fn else math.nan,
        "correction_error": broken / correct if correct else 0.0,
        "accuracy_corrected": (correct + fpf + fnf - broken) / bits,
    }


METRIC_COLUMNS = ("accuracy", "fp", "fn", "fp_correction", "fn_correction", "correction_error", "accuracy_corrected")
RESULT_HEADER = ("mobility", "bounded", "aggregation") + METRIC_COLUMNS + ("datasets", "windows", "excluded")


def write_results(path: str | Path, aggregates: list[Aggregate]) -> None:
    """One per-bit and one per-dataset row for every mobility configuration."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_HEADER)
        for agg in aggregates:
            for how, metrics in (("bit", agg.per_bit()), ("dataset", agg.per_dataset())):
                w.writerow([agg.mobility, int(agg.bounded), how]
                           + [_fmt(metrics[k]) for k in METRIC_COLUMNS]
                           + [agg.datasets, len(agg.used), agg.excluded])


def _fmt(v: float) -> str:
    return "n/a" if math.isnan(v) else f"{v:.6f}"

