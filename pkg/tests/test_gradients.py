"""Analytic gradients against central finite differences for both architectures."""

import numpy as np
import pytest

from hopcast.nnkernel import AttentionParams, attention_backward, attention_forward
from hopcast.ssan1 import ssan1_loss
from hopcast.ssan2 import Ssan2Model, fit_normalization, ssan2_loss

H = 1e-5
TOL = 1e-4


def numeric_grad(f, arr: np.ndarray) -> np.ndarray:
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + H
        up = f()
        arr[i] = old - H
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * H)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def ssan1_instance(seed: int):
    rng = np.random.default_rng(seed)
    u, ell, horizon, b = 5, 8, 4, 3
    periods = rng.integers(2, 5, size=b)
    seqs = [rng.integers(0, u, size=p) for p in periods]
    x = np.zeros((b, ell, u))
    y = np.zeros((b, horizon, u))
    for k, s in enumerate(seqs):
        for t in range(ell + horizon):
            (x if t < ell else y)[k, t if t < ell else t - ell, s[t % len(s)]] = 1.0
    params = AttentionParams.init(rng, u, u, u, heads=1)
    return params, x, y, periods


def ssan2_instance(seed: int, anchored: bool, linear: bool):
    rng = np.random.default_rng(seed)
    model = Ssan2Model.init(window=6, heads=2, d_model=4, seed=seed)
    model.params.w_o[:] = rng.normal(0, 0.5, size=model.params.w_o.shape)
    model.b_o[:] = rng.normal()
    model.b_e[:] = rng.normal(0, 0.3, size=model.b_e.shape)
    model.anchored, model.linear, model.floor = anchored, linear, -61.0
    x = rng.uniform(-60.5, -40.0, size=(4, 6))
    t = rng.uniform(-60.5, -40.0, size=4)
    model.mean, model.std = fit_normalization(model, x, t)
    return model, x, t


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("standard", [False, True])
def test_ssan1_gradients(seed, standard):
    params, x, y, periods = ssan1_instance(seed)
    res = ssan1_loss(params, x, y, periods, standard=standard)
    for name, arr in params.as_dict().items():
        num = numeric_grad(lambda: ssan1_loss(params, x, y, periods, standard=standard).total, arr)
        assert rel_error(res.grads[name], num) < TOL, name


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("all_positions", [False, True])
def test_ssan2_gradients(seed, all_positions):
    model, x, t = ssan2_instance(seed, anchored=seed % 2 == 0, linear=seed % 3 == 0)
    res = ssan2_loss(model, x, t, all_positions=all_positions)
    for name, arr in model.param_dict().items():
        num = numeric_grad(lambda: ssan2_loss(model, x, t, all_positions=all_positions).total, arr)
        assert rel_error(res.grads[name], num) < TOL, name


def test_zero_upstream_gives_zero_gradients(rng):
    x = rng.normal(size=(2, 5, 3))
    p = AttentionParams.init(rng, 3, 3, 3)
    _, ctx, cache = attention_forward(x, p.w_q[0], p.w_k[0], p.w_v[0])
    g = attention_backward(cache, p.w_q[0], p.w_k[0], p.w_v[0], d_context=np.zeros_like(ctx))
    for arr in (g.w_q, g.w_k, g.w_v, g.x):
        assert not arr.any()


def test_masked_scores_get_exactly_zero_gradient(rng):
    x = rng.normal(size=(6, 4))
    p = AttentionParams.init(rng, 4, 4, 4)
    _, ctx, cache = attention_forward(x, p.w_q[0], p.w_k[0], p.w_v[0])
    g = attention_backward(cache, p.w_q[0], p.w_k[0], p.w_v[0], d_context=rng.normal(size=ctx.shape),
                           d_scores_extra=rng.normal(size=(6, 6)))
    assert np.all(g.scores[np.triu_indices(6, k=1)] == 0.0)
