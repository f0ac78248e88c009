import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import hand_history
from hopcast.netsim import (
    MAX_SPEED,
    NOISE_FLOOR_DBM,
    ChannelHoppingSequence,
    GenerationError,
    SimConfig,
    channel_at,
    generate_network,
    init_mobility,
    interference_threshold,
    observe,
    received_power,
    shortest_path,
    simulate,
    step_mobility,
    unit_disk_adjacency,
)


def test_channel_at_examples():
    assert channel_at(ChannelHoppingSequence((1, 3, 2)), 4) == 3
    assert channel_at(ChannelHoppingSequence((2, 1, 4)), 5) == 4
    assert all(channel_at(ChannelHoppingSequence((0,)), t) == 0 for t in range(10))
    with pytest.raises(ValueError):
        channel_at(ChannelHoppingSequence((0,)), -1)


def test_hopping_sequence_validation():
    with pytest.raises(ValueError):
        ChannelHoppingSequence(())
    with pytest.raises(ValueError):
        ChannelHoppingSequence((0, 16)).validate(16)


@pytest.mark.parametrize("dist,expected", [(1.0, 0.0), (1000.0, -60.0), (1100.0, -20 * math.log10(1100))])
def test_received_power_examples(dist, expected):
    assert received_power(dist) == pytest.approx(expected, abs=1e-12)


def test_received_power_edge_and_monotone():
    assert received_power(1100.0) == pytest.approx(-60.83, abs=5e-3)
    assert received_power(0.0) == 0.0
    d = np.linspace(0, 5000, 200)
    assert np.all(np.diff(received_power(d)) <= 0)
    assert interference_threshold(SimConfig()) == pytest.approx(-60.0)


@pytest.mark.parametrize(
    "kw",
    [dict(n_nodes=1), dict(r_s=900.0), dict(r_t=0.0), dict(n_channels=0), dict(period=0), dict(epsilon=1.5),
     dict(rho=0.0), dict(flows=-1), dict(slot_dt=0.0)],
)
def test_config_rejects_invalid(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_region_side_matches_density():
    cfg = SimConfig(n_nodes=100, rho=4.0)
    assert cfg.side**2 == pytest.approx(100 * math.pi * 1000.0**2 / 4.0)


def test_generate_network_shape():
    cfg = SimConfig(n_nodes=100, flows=10)
    net = generate_network(cfg, np.random.default_rng(0))
    assert net.n_nodes == 100 and len(net.routes) == 10
    assert all(c.period == cfg.period for c in net.chs)
    for route in net.routes:
        assert net.active[route].all()
        for a, b in zip(route, route[1:]):
            assert np.hypot(*(net.pos[a] - net.pos[b])) <= cfg.r_t


def test_two_node_network():
    cfg = SimConfig(n_nodes=2, rho=100.0, flows=1)  # side well below r_t
    net = generate_network(cfg, np.random.default_rng(3))
    assert net.routes[0] in ([0, 1], [1, 0])
    assert net.active.all()


def test_unroutable_flows_fail_explicitly():
    cfg = SimConfig(n_nodes=3, rho=0.001, flows=1)  # nodes far apart
    with pytest.raises(GenerationError):
        generate_network(cfg, np.random.default_rng(0), max_retries=5)


def test_mean_degree_near_rho():
    cfg = SimConfig(n_nodes=100, rho=4.0)
    degrees = []
    for s in range(50):
        net = generate_network(replace(cfg, seed=s), np.random.default_rng(s))
        degrees.append(np.mean([len(a) for a in unit_disk_adjacency(net.pos, cfg.r_t)]))
    assert 3.5 <= np.mean(degrees) <= 4.5


def test_shortest_path_prefers_lowest_id_on_ties():
    adj = [[1, 2], [0, 3], [0, 3], [1, 2]]
    assert shortest_path(adj, 0, 3) == [0, 1, 3]
    assert shortest_path([[1], [0], []], 0, 2) is None


def _single_node_state(cfg, vel, direction, pos=(500.0, 500.0)):
    net = generate_network(replace(cfg, n_nodes=2, rho=100.0, flows=1), np.random.default_rng(0))
    s = init_mobility(net, "FM", cfg, np.random.default_rng(0))
    s.pos[:] = pos
    s.vel[:] = vel
    s.dir[:] = direction
    return s


def test_fm_uniform_motion():
    cfg = SimConfig(n_nodes=2, rho=100.0, flows=1)
    s = _single_node_state(cfg, 10.0, 0.0)
    nxt = step_mobility(s, "FM", cfg, np.random.default_rng(0))
    assert np.allclose(nxt.pos[:, 0] - s.pos[:, 0], 10.0)
    assert np.allclose(nxt.pos[:, 1], s.pos[:, 1])


def test_bounded_node_stops_at_boundary():
    cfg = SimConfig(n_nodes=2, rho=100.0, flows=1, bounded=True)
    s = _single_node_state(cfg, 10.0, 0.0)
    s.pos[:, 0] = s.side - 3.0
    rng = np.random.default_rng(0)
    s = step_mobility(s, "FM", cfg, rng)
    assert np.allclose(s.pos[:, 0], s.side) and np.all(s.vel == 0) and s.stopped.all()
    parked = s.pos.copy()
    for _ in range(5):
        s = step_mobility(s, "FM", cfg, rng)
    assert np.array_equal(s.pos, parked) and np.all(s.vel == 0)


def test_srwp_next_speed_interval():
    cfg = SimConfig(n_nodes=2, rho=100.0, flows=1, epsilon=0.1)
    rng = np.random.default_rng(7)
    for _ in range(200):
        net = generate_network(cfg, rng)
        s = init_mobility(net, "SRWP", cfg, rng)
        s.vel[:] = 5.0
        s.dir[:] = 1.0
        s.waypoint[:] = s.pos + np.array([math.cos(1.0), math.sin(1.0)]) * 2.0  # reached this slot
        nxt = step_mobility(s, "SRWP", cfg, rng)
        assert np.all((nxt.vel >= 4.5) & (nxt.vel <= 5.5))
        turn = np.angle(np.exp(1j * (nxt.dir - 1.0)))
        assert np.all(np.abs(turn) <= 2 * math.pi * 0.1 + 1e-12)


def test_rwp_redraws_at_waypoint():
    cfg = SimConfig(n_nodes=2, rho=100.0, flows=1)
    rng = np.random.default_rng(2)
    s = init_mobility(generate_network(cfg, rng), "RWP", cfg, rng)
    s.vel[:] = 10.0
    s.waypoint[:] = s.pos + np.array([3.0, 4.0])
    s.dir[:] = math.atan2(4.0, 3.0)
    nxt = step_mobility(s, "RWP", cfg, rng)
    assert np.allclose(nxt.pos, s.waypoint)
    assert np.all((nxt.vel >= 0) & (nxt.vel <= MAX_SPEED))
    assert not np.allclose(nxt.waypoint, s.waypoint)


def test_unknown_mobility_model():
    cfg = SimConfig()
    net = generate_network(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        init_mobility(net, "levy", cfg, np.random.default_rng(0))


def test_two_transmitter_scenario_repeats_every_period():
    # two interferers inside r_I on length-3 sequences, observer at the origin
    pos = [[0, 0], [300, 0], [0, 600]]
    hist = hand_history(np.repeat(np.array([pos], float), 12, axis=0), [(0,), (1, 3, 2), (2, 1, 4)])
    tr = observe(hist, 0, SimConfig(n_nodes=3))
    assert np.array_equal(tr.co[3:], tr.co[:-3])
    assert tr.co[0, 1] and tr.co[0, 2] and tr.co[1, 3] and tr.co[1, 1] and tr.co[2, 2] and tr.co[2, 4]


def test_nothing_in_range_is_silent():
    hist = hand_history(np.array([[[0, 0], [5000, 0]]], float).repeat(4, axis=0), [(0,), (1,)])
    tr = observe(hist, 0, SimConfig(n_nodes=2))
    assert not tr.co.any()
    assert np.all(tr.rp == NOISE_FLOOR_DBM)


def test_transmitter_exactly_on_interference_edge():
    hist = hand_history(np.array([[[0, 0], [1000, 0]]], float), [(0,), (5,)])
    tr = observe(hist, 0, SimConfig(n_nodes=2))
    assert tr.co[0, 5] == 1
    assert tr.rp[0, 5] == pytest.approx(-60.0) == tr.theta


def test_sensed_but_not_interfering():
    hist = hand_history(np.array([[[0, 0], [1050, 0]]], float), [(0,), (5,)])
    tr = observe(hist, 0, SimConfig(n_nodes=2))
    assert tr.co[0, 5] == 0
    assert tr.theta > tr.rp[0, 5] > NOISE_FLOOR_DBM


def test_nearest_same_channel_transmitter_sets_power():
    hist = hand_history(np.array([[[0, 0], [800, 0], [100, 0]]], float), [(0,), (5,), (5,)])
    tr = observe(hist, 0, SimConfig(n_nodes=3))
    assert tr.rp[0, 5] == pytest.approx(received_power(100.0))


def test_observer_and_idle_nodes_are_ignored():
    hist = hand_history(np.array([[[0, 0], [10, 0]]], float), [(3,), (5,)], active=[True, False])
    tr = observe(hist, 0, SimConfig(n_nodes=2))
    assert not tr.co.any()


def test_simulate_is_deterministic():
    cfg = SimConfig(seed=9)
    a = simulate(cfg, "SRWP", 30)
    b = simulate(cfg, "SRWP", 30)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
