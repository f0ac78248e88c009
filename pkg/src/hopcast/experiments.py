"""Experiment recipes: phase-1 period generalization, phase-2 region classification
and the integrated correction suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import (
    LabeledTrace,
    mobile_histories,
    phase1_samples,
    pick_observers,
    power_windows,
    sender_power,
    sliding_phase1_samples,
    static_traces,
)
from .netsim import ObservationTrace, SimConfig, interference_threshold, observe, received_power
from .pipeline import Aggregate, PredictionReport, run_integrated, window_ends
from .ssan1 import NoPeriodError, Ssan1Model, Ssan1Sample, predict_co, predict_standard, train_ssan1
from .ssan2 import Ssan2Model, predict_values, train_ssan2

log = logging.getLogger(__name__)

SEEN_PERIODS = (5, 7, 9)
UNSEEN_PERIODS = (3, 4, 6, 8)
MOBILITY_CONFIGS = tuple((m, b) for m in ("FM", "RWP", "SRWP") for b in (False, True))


# ---------------------------------------------------------------- phase 1


@dataclass
class Phase1Result:
    train: float
    seen: float
    unseen: float
    no_period: int  # windows where no period could be read off the attention map
    model: Ssan1Model = field(repr=False)


def phase1_accuracy(model: Ssan1Model, samples: list[Ssan1Sample], *, standard: bool = False) -> tuple[float, int]:
    """Per-bit accuracy; windows without a detectable period are scored as all-zero predictions."""
    hits = total = failures = 0
    for s in samples:
        if standard:
            y = predict_standard(model, s.x)
        else:
            try:
                y, _, _ = predict_co(model, s.x)
            except NoPeriodError:
                failures += 1
                y = np.zeros_like(s.y)
        hits += int(np.sum(y == s.y))
        total += s.y.size
    return hits / total, failures


def phase1_datasets(
    cfg: SimConfig, count: int = 200, input_len: int = 40, horizon: int = 40, seed: int = 0
) -> dict[str, list[Ssan1Sample]]:
    slots = input_len + horizon
    make = lambda periods, s: phase1_samples(static_traces(cfg, list(periods), count, slots, s), input_len, horizon)
    return {
        "train": make(SEEN_PERIODS, seed),
        "seen": make(SEEN_PERIODS, seed + 1),
        "unseen": make(UNSEEN_PERIODS, seed + 2),
    }


def phase1_experiment(
    data: dict[str, list[Ssan1Sample]],
    *,
    epochs: int = 100,
    lr: float = 1e-2,
    seed: int = 0,
    standard: bool = False,
) -> Phase1Result:
    """Train on ``data['train']`` and score all three splits.

    ``standard=True`` trains the plain self-attention comparator (no period
    gather, no alignment loss, no channel relabeling).
    """
    model, _ = train_ssan1(data["train"], epochs, lr=lr, seed=seed, standard=standard, augment=not standard,
                           align_weight=0.0 if standard else 1.0)
    accs, fails = {}, 0
    for split in ("train", "seen", "unseen"):
        accs[split], f = phase1_accuracy(model, data[split], standard=standard)
        fails += f
    return Phase1Result(accs["train"], accs["seen"], accs["unseen"], fails, model)


# ---------------------------------------------------------------- phase 2


@dataclass
class PowerRecord:
    """Power one observer receives from every other flow node over a run."""

    graph: int
    observer: int
    nodes: np.ndarray  # (k,) node ids
    power: np.ndarray  # (slots, k) dBm, noise floor when out of sensing range


def phase2_records(cfg: SimConfig, mobility: str, graphs: int, seed: int, *, slots: int = 160) -> list[PowerRecord]:
    """One randomly chosen observer per graph."""
    out = []
    for g, (history, rng, gseed) in enumerate(mobile_histories(cfg, mobility, graphs, slots, seed)):
        c = replace(cfg, seed=gseed)
        for obs in pick_observers(history, c, 1, rng):
            nodes, power = sender_power(history, obs, c)
            out.append(PowerRecord(g, obs, nodes, power))
    return out


@dataclass
class Phase2Data:
    x: np.ndarray
    target: np.ndarray
    inside: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


def phase2_data(records: list[PowerRecord], window: int, theta: float) -> Phase2Data:
    parts = [power_windows(r.power, window, theta) for r in records]
    if not parts:
        return Phase2Data(np.zeros((0, window)), np.zeros(0), np.zeros(0, dtype=bool))
    return Phase2Data(*(np.concatenate([p[k] for p in parts]) for k in range(3)))


@dataclass
class Phase2Result:
    mobility: str
    bounded: bool
    train: float
    test: float
    n_train: int
    n_test: int
    model: Ssan2Model = field(repr=False)


def region_accuracy(model: Ssan2Model, data: Phase2Data, theta: float) -> float:
    if len(data) == 0:
        return float("nan")
    return float(np.mean((predict_values(model, data.x) >= theta) == data.inside))


def phase2_experiment(
    cfg: SimConfig,
    mobility: str,
    *,
    graphs: int = 23,
    train_graphs: int = 3,
    window: int = 30,
    heads: int = 3,
    d_model: int = 16,
    epochs: int = 500,
    lr: float = 1e-2,
    seed: int = 0,
) -> Phase2Result:
    """The first ``train_graphs`` graphs train the model, the rest are held out."""
    records = phase2_records(cfg, mobility, graphs, seed)
    theta = interference_threshold(cfg)
    train = phase2_data([r for r in records if r.graph < train_graphs], window, theta)
    test = phase2_data([r for r in records if r.graph >= train_graphs], window, theta)
    if len(train) == 0:
        raise ValueError("no sensed transmitter in the training graphs")
    model, _ = train_ssan2(train.x, train.target, epochs, heads=heads, d_model=d_model, lr=lr, seed=seed,
                           floor=received_power(cfg.r_s))
    return Phase2Result(mobility, cfg.bounded, region_accuracy(model, train, theta), region_accuracy(model, test, theta),
                        len(train), len(test), model)


# ---------------------------------------------------------------- integrated


def integrated_datasets(
    cfg: SimConfig, mobility: str, graphs: int, observers: int, slots: int, seed: int
) -> list[LabeledTrace]:
    """``graphs`` random networks, ``observers`` sampled nodes each: one trace per node."""
    out = []
    for g, (history, rng, gseed) in enumerate(mobile_histories(cfg, mobility, graphs, slots, seed)):
        c = replace(cfg, seed=gseed)
        for obs in pick_observers(history, c, observers, rng):
            out.append(LabeledTrace(observe(history, obs, c), cfg.period, g, gseed, mobility, c))
    return out


def stride_power_samples(trace: ObservationTrace, period: int, window: int, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Every stride-``period`` window of every channel with the value one stride later.

    Windows where the channel never rises above ``floor`` carry no transmitter and are dropped.
    """
    rp = trace.rp
    xs, ts = [], []
    for end in range((window - 1) * period, trace.ell - period):
        idx = end - period * np.arange(window - 1, -1, -1)
        x = rp[idx].T  # (U, W)
        t = rp[end + period]
        keep = (x > floor).any(axis=1) | (t > floor)
        xs.append(x[keep])
        ts.append(t[keep])
    if not xs:
        return np.zeros((0, window)), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ts)


@dataclass
class IntegratedModels:
    m1: Ssan1Model
    m2: Ssan2Model


def train_integrated(
    traces: list[LabeledTrace],
    *,
    input_len: int = 40,
    horizon: int = 40,
    window: int = 10,
    heads: int = 4,
    d_model: int = 16,
    epochs1: int = 100,
    epochs2: int = 500,
    lr1: float = 1e-2,
    lr2: float = 1e-2,
    window_stride: int = 4,
    seed: int = 0,
) -> IntegratedModels:
    """Both phases learn from every training trace: phase 1 from sliding CO windows
    (every ``window_stride`` slots), phase 2 from stride-period power sequences."""
    if not traces:
        raise ValueError("no training traces")
    samples = [s for lt in traces
               for s in sliding_phase1_samples(lt.trace, lt.period, input_len, horizon, window_stride)]
    m1, _ = train_ssan1(samples, epochs1, lr=lr1, seed=seed)
    floor = received_power(traces[0].cfg.r_s)
    pairs = [stride_power_samples(lt.trace, lt.period, window, floor) for lt in traces]
    x = np.concatenate([p[0] for p in pairs])
    t = np.concatenate([p[1] for p in pairs])
    if len(x) == 0:
        raise ValueError("training traces have no sensed transmitter for the phase-2 model")
    m2, _ = train_ssan2(x, t, epochs2, heads=heads, d_model=d_model, lr=lr2, seed=seed, floor=floor)
    return IntegratedModels(m1, m2)


def evaluate_integrated(models: IntegratedModels, traces: list[LabeledTrace]) -> Aggregate:
    """Score every non-overlapping window of every trace."""
    if not traces:
        raise ValueError("no test traces")
    reports: list[PredictionReport] = []
    m1 = models.m1
    for lt in traces:
        for end in window_ends(lt.trace.ell, m1.input_len, m1.horizon):
            reports.append(run_integrated(lt.trace, m1, models.m2, end=end, mobility=lt.mobility,
                                          bounded=lt.cfg.bounded, dataset=f"g{lt.graph}_o{lt.trace.observer}"))
    return Aggregate(traces[0].mobility, traces[0].cfg.bounded, reports)


def integrated_experiment(
    cfg: SimConfig,
    mobility: str,
    *,
    graphs: int = 100,
    observers: int = 5,
    slots: int = 160,
    train_graphs: int = 2,
    seed: int = 0,
    **train_kw,
) -> tuple[Aggregate, IntegratedModels]:
    """Datasets of the first ``train_graphs`` graphs train the models, the rest are scored."""
    data = integrated_datasets(cfg, mobility, graphs, observers, slots, seed)
    train = [lt for lt in data if lt.graph < train_graphs]
    test = [lt for lt in data if lt.graph >= train_graphs]
    if not train or not test:
        raise ValueError(f"{graphs} graphs leave no room for {train_graphs} training graphs plus a test set")
    models = train_integrated(train, seed=seed, **train_kw)
    return evaluate_integrated(models, test), models
