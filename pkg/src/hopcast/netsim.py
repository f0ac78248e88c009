"""Channel-hopping network simulator.

Places nodes uniformly in a square, routes long-lived flows over the
transmission unit-disk graph, moves nodes under one of the mobility models
and synthesizes per-observer channel occupancy (CO) and received power (RP)
traces.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

MAX_SPEED = 10.0  # m/s
TX_POWER_DBM = 0.0
PATH_LOSS_EXPONENT = 2.0
REFERENCE_DISTANCE = 1.0  # m
NOISE_FLOOR_DBM = -120.0

MOBILITY_MODELS = ("static", "FM", "RWP", "SRWP")


class GenerationError(RuntimeError):
    """Raised when a network cannot be generated (e.g. flows cannot be routed)."""


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = 100
    rho: float = 4.0
    r_t: float = 1000.0
    r_i: float = 1000.0
    r_s: float = 1100.0
    n_channels: int = 16
    period: int = 4
    epsilon: float = 0.1
    flows: int = 10
    bounded: bool = False
    slot_dt: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not (self.r_s >= self.r_i >= self.r_t > 0):
            raise ValueError(
                f"radii must satisfy r_s >= r_i >= r_t > 0, got "
                f"r_s={self.r_s} r_i={self.r_i} r_t={self.r_t}"
            )
        if self.n_channels < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.flows < 0:
            raise ValueError(f"flows must be >= 0, got {self.flows}")
        if self.slot_dt <= 0:
            raise ValueError(f"slot_dt must be positive, got {self.slot_dt}")

    @property
    def side(self) -> float:
        """Side of the square region whose area gives an expected degree of ``rho``."""
        return math.sqrt(self.n_nodes * math.pi * self.r_t**2 / self.rho)


@dataclass(frozen=True)
class ChannelHoppingSequence:
    seq: tuple[int, ...]

    def __post_init__(self):
        if len(self.seq) < 1:
            raise ValueError("a channel hopping sequence needs at least one slot")
        object.__setattr__(self, "seq", tuple(int(c) for c in self.seq))

    @property
    def period(self) -> int:
        return len(self.seq)

    def validate(self, n_channels: int) -> None:
        bad = [c for c in self.seq if not 0 <= c < n_channels]
        if bad:
            raise ValueError(f"channels {bad} outside [0, {n_channels})")


def channel_at(chs: ChannelHoppingSequence, t: int) -> int:
    """Channel used at slot ``t``: the sequence entry at ``t mod L``."""
    if t < 0:
        raise ValueError(f"slot must be non-negative, got {t}")
    return chs.seq[t % len(chs.seq)]


def random_chs(n_channels: int, period: int, rng: np.random.Generator) -> ChannelHoppingSequence:
    return ChannelHoppingSequence(tuple(rng.integers(0, n_channels, size=period)))


@dataclass(frozen=True)
class NodeState:
    id: int
    pos: tuple[float, float]
    vel: float
    dir: float
    waypoint: tuple[float, float] | None
    chs: ChannelHoppingSequence
    active: bool


@dataclass
class NetworkState:
    """All nodes of one network at one slot.

    Per-node quantities are stored column-wise; ``node(i)`` gives a
    :class:`NodeState` view.
    """

    pos: np.ndarray  # (N, 2) meters
    vel: np.ndarray  # (N,) m/s
    dir: np.ndarray  # (N,) radians
    waypoint: np.ndarray  # (N, 2), NaN where unset
    stopped: np.ndarray  # (N,) bool, parked at a boundary
    chs: list[ChannelHoppingSequence]
    active: np.ndarray  # (N,) bool
    routes: list[list[int]]
    side: float
    slot: int = 0
    _chs_table: np.ndarray = field(default=None, repr=False)
    _chs_len: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._chs_table is None:
            width = max(c.period for c in self.chs)
            table = np.zeros((len(self.chs), width), dtype=np.int64)
            for i, c in enumerate(self.chs):
                table[i, : c.period] = c.seq
            self._chs_table = table
            self._chs_len = np.array([c.period for c in self.chs], dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.chs)

    def node(self, i: int) -> NodeState:
        wp = None if np.isnan(self.waypoint[i, 0]) else tuple(map(float, self.waypoint[i]))
        return NodeState(
            id=i,
            pos=(float(self.pos[i, 0]), float(self.pos[i, 1])),
            vel=float(self.vel[i]),
            dir=float(self.dir[i]),
            waypoint=wp,
            chs=self.chs[i],
            active=bool(self.active[i]),
        )

    def channels_at(self, t: int) -> np.ndarray:
        """Channel of every node at slot ``t`` (vectorized ``channel_at``)."""
        idx = t % self._chs_len
        return self._chs_table[np.arange(self.n_nodes), idx]

    def copy(self) -> "NetworkState":
        return replace(
            self,
            pos=self.pos.copy(),
            vel=self.vel.copy(),
            dir=self.dir.copy(),
            waypoint=self.waypoint.copy(),
            stopped=self.stopped.copy(),
        )


def unit_disk_adjacency(pos: np.ndarray, radius: float) -> list[list[int]]:
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    adj = (dist <= radius) & ~np.eye(len(pos), dtype=bool)
    return [list(np.flatnonzero(row)) for row in adj]


def shortest_path(adjacency: list[list[int]], src: int, dst: int) -> list[int] | None:
    """Hop-count BFS; neighbours expanded in ascending id so ties go to the lowest id."""
    parent = {src: None}
    frontier = deque([src])
    while frontier:
        u = frontier.popleft()
        if u == dst:
            break
        for v in adjacency[u]:
            if v not in parent:
                parent[v] = u
                frontier.append(v)
    if dst not in parent:
        return None
    path = [dst]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def generate_network(
    cfg: SimConfig,
    rng: np.random.Generator,
    *,
    periods: list[int] | None = None,
    max_retries: int = 1000,
) -> NetworkState:
    """Place nodes, draw their hopping sequences and route ``cfg.flows`` flows.

    ``periods`` optionally gives a per-node CHS period (mixed-period regions);
    by default every node uses ``cfg.period``.
    """
    n = cfg.n_nodes
    side = cfg.side
    pos = rng.uniform(0.0, side, size=(n, 2))
    if periods is None:
        periods = [cfg.period] * n
    if len(periods) != n:
        raise ValueError(f"need {n} periods, got {len(periods)}")
    chs = [random_chs(cfg.n_channels, p, rng) for p in periods]

    adjacency = unit_disk_adjacency(pos, cfg.r_t)
    routes: list[list[int]] = []
    for _ in range(cfg.flows):
        for _attempt in range(max_retries):
            src, dst = rng.choice(n, size=2, replace=False)
            path = shortest_path(adjacency, int(src), int(dst))
            if path is not None:
                routes.append(path)
                break
        else:
            raise GenerationError(
                f"could not route a flow after {max_retries} source/destination draws"
            )
    active = np.zeros(n, dtype=bool)
    for path in routes:
        active[path] = True

    return NetworkState(
        pos=pos,
        vel=np.zeros(n),
        dir=np.zeros(n),
        waypoint=np.full((n, 2), np.nan),
        stopped=np.zeros(n, dtype=bool),
        chs=chs,
        active=active,
        routes=routes,
        side=side,
    )


def _heading(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = dst - src
    return np.mod(np.arctan2(d[..., 1], d[..., 0]), 2 * np.pi)


def init_mobility(
    state: NetworkState, model: str, cfg: SimConfig, rng: np.random.Generator
) -> NetworkState:
    """Draw initial speed, heading and waypoint for every node."""
    if model not in MOBILITY_MODELS:
        raise ValueError(f"unknown mobility model {model!r}; expected one of {MOBILITY_MODELS}")
    s = state.copy()
    n = s.n_nodes
    if model == "static":
        s.vel[:] = 0.0
        return s
    if model == "FM":
        s.vel = rng.uniform(0.0, MAX_SPEED, size=n)
        s.dir = rng.uniform(0.0, 2 * np.pi, size=n)
        return s
    # RWP and SRWP start identically: a uniform destination and a uniform speed.
    s.waypoint = rng.uniform(0.0, s.side, size=(n, 2))
    s.dir = _heading(s.pos, s.waypoint)
    s.vel = rng.uniform(0.0, MAX_SPEED, size=n)
    return s


def _next_waypoint(
    s: NetworkState, i: int, model: str, cfg: SimConfig, rng: np.random.Generator
) -> None:
    if model == "RWP":
        s.waypoint[i] = rng.uniform(0.0, s.side, size=2)
        s.dir[i] = _heading(s.pos[i], s.waypoint[i])
        s.vel[i] = rng.uniform(0.0, MAX_SPEED)
        return
    # SRWP: heading and speed drawn around the previous leg's values.
    spread = 2 * np.pi * cfg.epsilon
    heading = float(np.mod(s.dir[i] + rng.uniform(-spread, spread), 2 * np.pi))
    lo = max(0.0, (1 - cfg.epsilon) * s.vel[i])
    hi = min(MAX_SPEED, (1 + cfg.epsilon) * s.vel[i])
    s.vel[i] = rng.uniform(lo, hi)
    leg = rng.uniform(0.0, s.side)
    s.dir[i] = heading
    s.waypoint[i] = s.pos[i] + leg * np.array([math.cos(heading), math.sin(heading)])


def step_mobility(
    state: NetworkState, model: str, cfg: SimConfig, rng: np.random.Generator
) -> NetworkState:
    """Advance every node by one slot and return the new state."""
    if model not in MOBILITY_MODELS:
        raise ValueError(f"unknown mobility model {model!r}; expected one of {MOBILITY_MODELS}")
    s = state.copy()
    s.slot = state.slot + 1
    if model == "static":
        return s
    step = s.vel * cfg.slot_dt
    unit = np.stack([np.cos(s.dir), np.sin(s.dir)], axis=1)
    target = s.pos + step[:, None] * unit

    arrived = np.zeros(s.n_nodes, dtype=bool)
    if model in ("RWP", "SRWP"):
        remaining = np.hypot(*(s.waypoint - s.pos).T)
        arrived = (step >= remaining) & (step > 0) & ~s.stopped
        target[arrived] = s.waypoint[arrived]
    moving = ~s.stopped
    new_pos = np.where(moving[:, None], target, s.pos)

    if cfg.bounded:
        delta = new_pos - s.pos
        frac = np.ones(s.n_nodes)
        for axis in range(2):
            d = delta[:, axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                hi = np.where(d > 0, (s.side - s.pos[:, axis]) / d, np.inf)
                lo = np.where(d < 0, -s.pos[:, axis] / d, np.inf)
            frac = np.minimum(frac, np.minimum(hi, lo))
        frac = np.clip(frac, 0.0, 1.0)
        new_pos = s.pos + frac[:, None] * delta
        new_pos = np.clip(new_pos, 0.0, s.side)
        on_edge = (
            (new_pos[:, 0] <= 0.0)
            | (new_pos[:, 0] >= s.side)
            | (new_pos[:, 1] <= 0.0)
            | (new_pos[:, 1] >= s.side)
        )
        hit = moving & (step > 0) & on_edge
        arrived &= ~hit
        s.stopped |= hit
        s.vel[hit] = 0.0

    s.pos = new_pos
    for i in np.flatnonzero(arrived):
        _next_waypoint(s, int(i), model, cfg, rng)
    return s


@dataclass
class NetworkHistory:
    """Positions of every node over a run plus the time-invariant network facts."""

    network: NetworkState  # state at slot 0
    positions: np.ndarray  # (slots, N, 2)
    velocities: np.ndarray  # (slots, N)
    model: str

    @property
    def slots(self) -> int:
        return self.positions.shape[0]


def simulate(
    cfg: SimConfig,
    model: str,
    slots: int,
    rng: np.random.Generator | None = None,
    *,
    network: NetworkState | None = None,
) -> NetworkHistory:
    """Generate (or take) a network and run the mobility model for ``slots`` slots."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if network is None:
        network = generate_network(cfg, rng)
    state = init_mobility(network, model, cfg, rng)
    start = state
    positions = np.empty((slots, state.n_nodes, 2))
    velocities = np.empty((slots, state.n_nodes))
    for t in range(slots):
        positions[t] = state.pos
        velocities[t] = state.vel
        if t + 1 < slots:
            state = step_mobility(state, model, cfg, rng)
    return NetworkHistory(network=start, positions=positions, velocities=velocities, model=model)


def received_power(dist, cfg: SimConfig | None = None):
    """Log-distance received power in dBm; works on scalars and arrays."""
    d = np.maximum(np.asarray(dist, dtype=float), REFERENCE_DISTANCE)
    p = TX_POWER_DBM - 10.0 * PATH_LOSS_EXPONENT * np.log10(d / REFERENCE_DISTANCE)
    return float(p) if np.ndim(p) == 0 else p


def interference_threshold(cfg: SimConfig) -> float:
    """Minimum power received from a transmitter inside the interference region."""
    return received_power(cfg.r_i)


@dataclass(frozen=True)
class ObservationTrace:
    observer: int
    co: np.ndarray  # (ell, U) uint8
    rp: np.ndarray  # (ell, U) dBm
    theta: float

    def __post_init__(self):
        if self.co.shape != self.rp.shape:
            raise ValueError(f"co {self.co.shape} and rp {self.rp.shape} shapes differ")

    @property
    def ell(self) -> int:
        return self.co.shape[0]

    @property
    def n_channels(self) -> int:
        return self.co.shape[1]

    def window(self, start: int, stop: int) -> "ObservationTrace":
        return ObservationTrace(self.observer, self.co[start:stop], self.rp[start:stop], self.theta)


def transmitter_distances(history: NetworkHistory, observer: int) -> np.ndarray:
    """(slots, N) distances from the observer to every node; inf for non-transmitters."""
    net = history.network
    if not 0 <= observer < net.n_nodes:
        raise ValueError(f"observer {observer} not in network of {net.n_nodes} nodes")
    diff = history.positions - history.positions[:, observer : observer + 1, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    silent = ~net.active.copy()
    silent[observer] = True
    dist[:, silent] = np.inf
    return dist


def observe(history: NetworkHistory, observer: int, cfg: SimConfig) -> ObservationTrace:
    """Ground-truth CO and RP seen by ``observer`` at every slot of ``history``."""
    net = history.network
    dist = transmitter_distances(history, observer)
    slots, n = dist.shape
    u = cfg.n_channels
    co = np.zeros((slots, u), dtype=np.uint8)
    nearest = np.full((slots, u), np.inf)
    rows = np.arange(slots)[:, None].repeat(n, axis=1)
    chans = np.stack([net.channels_at(t) for t in range(slots)])
    inside_i = dist <= cfg.r_i
    np.maximum.at(co, (rows[inside_i], chans[inside_i]), 1)
    inside_s = dist <= cfg.r_s
    np.minimum.at(nearest, (rows[inside_s], chans[inside_s]), dist[inside_s])
    rp = np.full((slots, u), NOISE_FLOOR_DBM)
    sensed = np.isfinite(nearest)
    rp[sensed] = received_power(nearest[sensed])
    return ObservationTrace(observer=observer, co=co, rp=rp, theta=interference_threshold(cfg))


def node_power_series(history: NetworkHistory, observer: int, cfg: SimConfig) -> np.ndarray:
    """(slots, N) power received from each transmitter; noise floor outside the sensing radius."""
    dist = transmitter_distances(history, observer)
    out = np.full(dist.shape, NOISE_FLOOR_DBM)
    sensed = dist <= cfg.r_s
    out[sensed] = received_power(dist[sensed])
    return out


def interferers(history: NetworkHistory, observer: int, cfg: SimConfig, slot: int = 0) -> np.ndarray:
    """Ids of transmitters inside the observer's interference region at ``slot``."""
    dist = transmitter_distances(history, observer)[slot]
    return np.flatnonzero(dist <= cfg.r_i)
