import numpy as np
import pytest

from hopcast.netsim import ChannelHoppingSequence, NetworkHistory, NetworkState

# Lines collected by the acceptance suite, echoed in the terminal summary so they
# survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def hand_history(positions, sequences, active=None, model="static") -> NetworkHistory:
    """History with fixed per-slot positions ``(slots, N, 2)`` and explicit hopping sequences."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim == 2:
        positions = positions[None]
    n = positions.shape[1]
    active = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    net = NetworkState(
        pos=positions[0].copy(),
        vel=np.zeros(n),
        dir=np.zeros(n),
        waypoint=np.full((n, 2), np.nan),
        stopped=np.zeros(n, dtype=bool),
        chs=[ChannelHoppingSequence(tuple(s)) for s in sequences],
        active=active,
        routes=[],
        side=10_000.0,
    )
    return NetworkHistory(net, positions, np.zeros(positions.shape[:2]), model)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
