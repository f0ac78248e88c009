import numpy as np
import pytest

from hopcast.netsim import NOISE_FLOOR_DBM, ObservationTrace, received_power
from hopcast.nnkernel import load_checkpoint, save_checkpoint
from hopcast.ssan1 import PeriodEstimate
from hopcast.ssan2 import (
    InsufficientHistoryError,
    PowerSequence,
    Ssan2Model,
    classify_region,
    extract_sequences,
    predict_all_positions,
    predict_power,
    predict_values,
    train_ssan2,
)

EDGE = received_power(1100.0)


def straight_line_windows(n: int, window: int, seed: int = 0):
    """Power seen from nodes crossing past the observer on straight lines at up to 10 m/s."""
    rng = np.random.default_rng(seed)
    xs, ts = [], []
    for _ in range(n):
        start = rng.uniform(-1100, 1100, size=2)
        heading = rng.uniform(0, 2 * np.pi)
        speed = rng.choice([0.0, rng.uniform(0, 10)])
        steps = np.arange(window + 1)[:, None] * speed * np.array([np.cos(heading), np.sin(heading)])
        d = np.hypot(*(start + steps).T)
        p = np.where(d <= 1100, received_power(d), NOISE_FLOOR_DBM)
        xs.append(p[:-1])
        ts.append(p[-1])
    return np.array(xs), np.array(ts)


@pytest.fixture(scope="module")
def trained():
    x, t = straight_line_windows(300, 8)
    model, hist = train_ssan2(x, t, 150, heads=2, d_model=8, floor=EDGE, seed=0)
    return model, hist


def trace_with(rp: np.ndarray) -> ObservationTrace:
    return ObservationTrace(0, (rp >= -60.0).astype(np.uint8), rp, -60.0)


def test_extract_sequences_stride_and_skip():
    rp = np.full((40, 3), NOISE_FLOOR_DBM)
    rp[:, 1] = -50.0 - np.arange(40) * 0.1
    seqs = extract_sequences(trace_with(rp), PeriodEstimate(4, 0, 1.0), 10)
    assert [s.channel for s in seqs] == [1]
    assert np.array_equal(seqs[0].values, rp[3:40:4, 1])
    assert (seqs[0].stride, seqs[0].anchor_slot) == (4, 39)


def test_extract_sequences_standalone_configuration():
    rp = np.full((30, 2), -55.0)
    seqs = extract_sequences(trace_with(rp), 1, 30)
    assert len(seqs) == 2 and all(len(s.values) == 30 for s in seqs)


def test_extract_sequences_needs_history():
    with pytest.raises(InsufficientHistoryError):
        extract_sequences(trace_with(np.full((20, 2), -55.0)), 4, 10)


def test_power_sequence_validation():
    with pytest.raises(ValueError):
        PowerSequence(np.zeros(3), 0, 0, 0)
    with pytest.raises(ValueError):
        Ssan2Model.init(window=1)


def test_zero_init_outputs_zero(rng):
    m = Ssan2Model.init(window=10, heads=4, d_model=16)
    assert np.all(predict_values(m, rng.uniform(-120, 0, size=(5, 10))) == 0.0)


def test_classify_region_boundary():
    assert classify_region(-60.0, -60.0) == "inside"
    assert classify_region(NOISE_FLOOR_DBM, -60.0) == "outside"


def test_concat_width():
    m = Ssan2Model.init(window=10, heads=3, d_model=16)
    assert m.params.w_o.shape[0] == 3 * m.params.d_head


def test_mask_blocks_future_positions(rng):
    m = Ssan2Model.init(window=8, heads=2, d_model=8, seed=1)
    m.params.w_o[:] = rng.normal(size=m.params.w_o.shape)
    m.mean, m.std = -50.0, 5.0
    x = rng.uniform(-60, -40, size=(3, 8))
    causal = predict_all_positions(m, x)
    open_ = predict_all_positions(m, x, causal=False)
    # the last position sees every slot either way; earlier ones lose their future
    assert np.all(np.abs(causal[:, :-1] - open_[:, :-1]) > 1e-9)
    assert np.allclose(causal[:, -1], open_[:, -1])
    # under the mask, earlier outputs ignore later inputs
    y = x.copy()
    y[:, 5:] += 3.0
    assert np.array_equal(predict_all_positions(m, y)[:, :5], causal[:, :5])


@pytest.mark.parametrize("seed", range(4))
def test_loss_decreases_over_first_epochs(seed):
    # one full batch per epoch at the optimizer's default step size
    x, t = straight_line_windows(10, 8, seed=seed)
    _, hist = train_ssan2(x, t, 10, heads=2, d_model=8, floor=EDGE, seed=0, lr=1e-3)
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_trained_model_tracks_constant_power(trained):
    model, _ = trained
    for level in (-45.0, -58.0, -60.5):
        assert predict_power(model, np.full(8, level)) == pytest.approx(level, abs=0.5)


def test_trained_model_classifies_held_out_windows(trained):
    model, _ = trained
    x, t = straight_line_windows(300, 8, seed=99)
    pred = predict_values(model, x)
    assert np.mean((pred >= -60.0) == (t >= -60.0)) >= 0.95


def test_prediction_ignores_anchor_slot(trained):
    model, _ = trained
    vals = np.linspace(-58, -61, 8)
    a = predict_power(model, PowerSequence(vals, 1, 0, 7))
    b = predict_power(model, PowerSequence(vals, 1, 3, 7000))
    assert a == b


def test_predict_power_checks_length(trained):
    with pytest.raises(ValueError):
        predict_power(trained[0], np.zeros(5))


def test_training_is_deterministic():
    x, t = straight_line_windows(20, 6, seed=5)
    a, ha = train_ssan2(x, t, 3, heads=2, d_model=4, seed=7)
    b, hb = train_ssan2(x, t, 3, heads=2, d_model=4, seed=7)
    assert ha == hb
    assert all(np.array_equal(a.param_dict()[k], b.param_dict()[k]) for k in a.param_dict())


def test_empty_training_set():
    with pytest.raises(ValueError):
        train_ssan2(np.zeros((0, 5)), np.zeros(0), 1)


@pytest.mark.parametrize("anchored,linear", [(False, False), (True, True)])
def test_checkpoint_round_trip(tmp_path, anchored, linear):
    x, t = straight_line_windows(20, 6, seed=5)
    m, _ = train_ssan2(x, t, 2, heads=2, d_model=4, floor=EDGE, anchored=anchored, linear=linear)
    save_checkpoint(tmp_path / "m2", 2, m.to_matrices())
    back = Ssan2Model.from_matrices(load_checkpoint(tmp_path / "m2")[1])
    assert (back.window, back.heads, back.d_model, back.anchored, back.linear) == (6, 2, 4, anchored, linear)
    assert (back.mean, back.std, back.floor) == (m.mean, m.std, m.floor)
    assert np.array_equal(predict_values(m, x), predict_values(back, x))
