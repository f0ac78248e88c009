"""Dataset construction for the phase-1, phase-2 and integrated experiments."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .netsim import (
    NOISE_FLOOR_DBM,
    NetworkHistory,
    ObservationTrace,
    SimConfig,
    generate_network,
    interference_threshold,
    interferers,
    node_power_series,
    observe,
    simulate,
)
from .ssan1 import Ssan1Sample


def pick_observers(
    history: NetworkHistory, cfg: SimConfig, count: int, rng: np.random.Generator
) -> list[int]:
    """Random flow nodes that hear at least one other transmitter at slot 0.

    Falls back to any flow node when too few qualify.
    """
    active = np.flatnonzero(history.network.active)
    busy = [int(i) for i in active if len(interferers(history, int(i), cfg)) > 0]
    pool = busy if len(busy) >= count else [int(i) for i in active]
    if len(pool) < count:
        pool = list(range(history.network.n_nodes))
    return [int(i) for i in rng.choice(pool, size=min(count, len(pool)), replace=False)]


@dataclass
class LabeledTrace:
    trace: ObservationTrace
    period: int
    graph: int
    seed: int
    mobility: str
    cfg: SimConfig


def static_traces(
    cfg: SimConfig,
    periods: list[int],
    count: int,
    slots: int,
    seed: int,
) -> list[LabeledTrace]:
    """``count`` static single-observer traces, periods cycled in equal shares."""
    out = []
    for k in range(count):
        period = periods[k % len(periods)]
        gseed = seed * 100_003 + k
        rng = np.random.default_rng(gseed)
        c = replace(cfg, period=period, seed=gseed)
        history = simulate(c, "static", slots, rng)
        (obs,) = pick_observers(history, c, 1, rng)
        out.append(LabeledTrace(observe(history, obs, c), period, k, gseed, "static", c))
    return out


def phase1_samples(traces: list[LabeledTrace], input_len: int, horizon: int) -> list[Ssan1Sample]:
    """First window of each trace: ``input_len`` observed slots, then ``horizon`` targets."""
    out = []
    for lt in traces:
        co = lt.trace.co
        if co.shape[0] < input_len + horizon:
            raise ValueError(f"trace has {co.shape[0]} slots, need {input_len + horizon}")
        out.append(Ssan1Sample(co[:input_len].copy(), co[input_len : input_len + horizon].copy(), lt.period))
    return out


def sliding_phase1_samples(
    trace: ObservationTrace, period: int, input_len: int, horizon: int, stride: int = 1
) -> list[Ssan1Sample]:
    co = trace.co
    last = co.shape[0] - input_len - horizon
    return [
        Ssan1Sample(co[s : s + input_len].copy(), co[s + input_len : s + input_len + horizon].copy(), period)
        for s in range(0, last + 1, stride)
    ]


def mobile_histories(
    cfg: SimConfig, model: str, graphs: int, slots: int, seed: int
) -> list[tuple[NetworkHistory, np.random.Generator, int]]:
    out = []
    for g in range(graphs):
        gseed = seed * 100_003 + g
        rng = np.random.default_rng(gseed)
        out.append((simulate(replace(cfg, seed=gseed), model, slots, rng), rng, gseed))
    return out


def power_windows(power: np.ndarray, window: int, theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stride-1 windows of a (slots, nodes) power matrix.

    A window ending at slot ``e`` is kept when its node is sensed at ``e``
    (power above the noise floor). Returns ``(x, target, inside)`` with the
    next-slot power as target and ``inside`` = next-slot power >= ``theta``,
    which is the same as being within the interference radius.
    """
    power = np.asarray(power, dtype=np.float64)
    slots = power.shape[0]
    xs, ts = [], []
    for j in range(power.shape[1]):
        col = power[:, j]
        for end in range(window - 1, slots - 1):
            if col[end] <= NOISE_FLOOR_DBM:
                continue
            xs.append(col[end - window + 1 : end + 1])
            ts.append(col[end + 1])
    if not xs:
        return np.zeros((0, window)), np.zeros(0), np.zeros(0, dtype=bool)
    t = np.array(ts)
    return np.array(xs), t, t >= theta


def sender_power(history: NetworkHistory, observer: int, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Power received by ``observer`` from every other flow node: ``(ids, (slots, k) dBm)``."""
    ids = np.array([j for j in np.flatnonzero(history.network.active) if j != observer], dtype=int)
    return ids, node_power_series(history, observer, cfg)[:, ids]


def per_node_windows(
    history: NetworkHistory,
    observer: int,
    cfg: SimConfig,
    window: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stride-1 power windows for every transmitter the observer currently senses."""
    _, power = sender_power(history, observer, cfg)
    return power_windows(power, window, interference_threshold(cfg))
