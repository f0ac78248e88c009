"""Acceptance criteria, one PASS/FAIL line each.

Runs with the rest of the suite (lines appear under "acceptance criteria" in the
terminal summary) or on its own: ``python3 tests/test_acceptance.py``.
Set HOPCAST_FULL_SUITE=1 to score the integrated pipeline on 100 graphs per
mobility configuration instead of the 10-graph smoke scale.
"""

import logging
import math
import os
import sys

import numpy as np
import pytest

import conftest
import test_gradients as tg
import test_properties
from hopcast.experiments import MOBILITY_CONFIGS, integrated_experiment, phase1_datasets, phase1_experiment, phase2_experiment
from hopcast.netsim import SimConfig
from hopcast.ssan1 import NoPeriodError, brute_force_period, calculate_period, ssan1_loss
from hopcast.ssan2 import ssan2_loss

log = logging.getLogger("hopcast.acceptance")

FULL = os.environ.get("HOPCAST_FULL_SUITE") == "1"
INTEGRATED_GRAPHS = 100 if FULL else 10
# smoke scale gets a 2 percentage point allowance on every integrated threshold
ALLOWANCE = 0.0 if FULL else 0.02

PHASE1_MIN = 0.985
ORACLE_MIN = 0.99
ORACLE_WINDOWS = 600
ABLATION_GAP = 0.15
PHASE2_TEST_MIN = 0.93
RAW_RANGE = (0.88, 0.96)
CORRECTED_MIN = 0.985
CORRECTION_ERROR_MAX = 0.01
CORRECTION_RATIO_MIN = 0.85
GRAD_TOL = 1e-4


def record(n: int, ok: bool, text: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def phase1():
    data = phase1_datasets(SimConfig(n_nodes=100), count=200, seed=0)
    return data, phase1_experiment(data, epochs=100)


def test_c1_phase1_accuracy(phase1):
    _, r = phase1
    ok = r.seen >= PHASE1_MIN and r.unseen >= PHASE1_MIN
    record(1, ok, f"phase-1 per-bit accuracy seen={r.seen:.4%} unseen={r.unseen:.4%} "
                  f"(train={r.train:.4%}, no-period windows={r.no_period}; need >= {PHASE1_MIN:.1%})")
    assert ok


def periodic_window(rng, ell=40, max_period=20, n_channels=16):
    period = int(rng.integers(1, max_period + 1))
    co = np.zeros((ell, n_channels))
    for _ in range(int(rng.integers(1, 6))):
        seq = rng.integers(0, n_channels, size=period)
        co[np.arange(ell), seq[np.arange(ell) % period]] = 1.0
    return co


def test_c2_period_oracle(phase1):
    model = phase1[1].model
    rng = np.random.default_rng(2024)
    hits = 0
    for i in range(ORACLE_WINDOWS):
        co = periodic_window(rng)
        want = brute_force_period(co)
        try:
            got = calculate_period(model.attention(co)).period
        except NoPeriodError:
            got = None
        if got == want:
            hits += 1
        else:
            log.warning("period mismatch on window %d: oracle=%s detected=%s\n%s", i, want, got, co.astype(int))
    rate = hits / ORACLE_WINDOWS
    ok = rate >= ORACLE_MIN
    record(2, ok, f"calculate_period matches the brute-force oracle on {hits}/{ORACLE_WINDOWS} windows "
                  f"({rate:.2%}; need >= {ORACLE_MIN:.0%})")
    assert ok


def test_c3_ablation_gap(phase1):
    data, r = phase1
    std = phase1_experiment(data, epochs=100, standard=True)
    gap = r.unseen - std.unseen
    ok = gap >= ABLATION_GAP
    record(3, ok, f"standard attention unseen={std.unseen:.4%} vs {r.unseen:.4%}, gap {100 * gap:.2f} pp "
                  f"(seen {std.seen:.4%}; need >= {100 * ABLATION_GAP:.0f} pp)")
    assert ok


def test_c4_phase2_classification():
    parts, ok = [], True
    for mobility, bounded in MOBILITY_CONFIGS:
        r = phase2_experiment(SimConfig(n_nodes=100, slot_dt=1.0, bounded=bounded), mobility)
        good = r.test >= PHASE2_TEST_MIN and r.train == 1.0
        ok &= good
        parts.append(f"{mobility}/{'b' if bounded else 'u'} train={r.train:.4%} test={r.test:.4%}")
    record(4, ok, "; ".join(parts) + f" (need train 100%, test >= {PHASE2_TEST_MIN:.0%})")
    assert ok


@pytest.fixture(scope="module")
def integrated():
    out = {}
    for mobility, bounded in MOBILITY_CONFIGS:
        cfg = SimConfig(n_nodes=200, slot_dt=4.0, bounded=bounded)
        agg, _ = integrated_experiment(cfg, mobility, graphs=INTEGRATED_GRAPHS, observers=5, seed=0)
        out[(mobility, bounded)] = agg
    return out


def _label(key):
    return f"{key[0]}/{'b' if key[1] else 'u'}"


def test_c5_integrated_raw_accuracy(integrated):
    parts, ok = [], True
    for key, agg in integrated.items():
        bit = agg.per_bit()
        in_range = RAW_RANGE[0] <= bit["accuracy"] <= RAW_RANGE[1]
        exact = all(r.n_correct_raw + r.n_fp + r.n_fn == r.n_bits for r in agg.reports)
        closes = abs(bit["accuracy"] + bit["fp"] + bit["fn"] - 1.0) <= 1e-12
        ok &= in_range and exact and closes and agg.excluded == 0
        parts.append(f"{_label(key)} raw={bit['accuracy']:.4%} fp={bit['fp']:.4%} fn={bit['fn']:.4%}"
                     f"{'' if agg.excluded == 0 else f' excluded={agg.excluded}'}")
    record(5, ok, f"{INTEGRATED_GRAPHS} graphs; " + "; ".join(parts)
           + f" (need raw in [{RAW_RANGE[0]:.0%}, {RAW_RANGE[1]:.0%}], acc + fp + fn = 1)")
    assert ok


def test_c6_integrated_corrected(integrated):
    parts, ok, strict = [], True, True
    for key, agg in integrated.items():
        bit, ds = agg.per_bit(), agg.per_dataset()

        def meets(m, slack):
            return (m["accuracy_corrected"] >= CORRECTED_MIN - slack
                    and m["correction_error"] <= CORRECTION_ERROR_MAX + slack
                    and all(math.isnan(m[k]) or m[k] >= CORRECTION_RATIO_MIN - slack
                            for k in ("fp_correction", "fn_correction")))

        ok &= meets(bit, ALLOWANCE)
        strict &= meets(bit, 0.0)
        parts.append(f"{_label(key)} corrected={bit['accuracy_corrected']:.4%} "
                     f"fp_corr={bit['fp_correction']:.2%} fn_corr={bit['fn_correction']:.2%} "
                     f"corr_err={bit['correction_error']:.3%} (per dataset: corrected="
                     f"{ds['accuracy_corrected']:.4%} fp_corr={ds['fp_correction']:.2%} "
                     f"fn_corr={ds['fn_correction']:.2%})")
    scale = "full" if FULL else f"smoke, +/-{100 * ALLOWANCE:.0f} pp allowance"
    record(6, ok, f"{INTEGRATED_GRAPHS} graphs ({scale}; strict thresholds "
                  f"{'met' if strict else 'missed'}); " + "; ".join(parts)
           + f" (need corrected >= {CORRECTED_MIN:.1%}, corr_err <= {CORRECTION_ERROR_MAX:.0%}, "
             f"fp/fn correction >= {CORRECTION_RATIO_MIN:.0%})")
    assert ok


def test_c7_gradients():
    worst = {"ssan1": 0.0, "ssan2": 0.0}
    for seed in range(10):
        for standard in (False, True):
            params, x, y, periods = tg.ssan1_instance(seed)
            res = ssan1_loss(params, x, y, periods, standard=standard)
            for name, arr in params.as_dict().items():
                num = tg.numeric_grad(lambda: ssan1_loss(params, x, y, periods, standard=standard).total, arr)
                worst["ssan1"] = max(worst["ssan1"], tg.rel_error(res.grads[name], num))
        for all_positions in (False, True):
            model, x, t = tg.ssan2_instance(seed, anchored=seed % 2 == 0, linear=seed % 3 == 0)
            res = ssan2_loss(model, x, t, all_positions=all_positions)
            for name, arr in model.param_dict().items():
                num = tg.numeric_grad(lambda: ssan2_loss(model, x, t, all_positions=all_positions).total, arr)
                worst["ssan2"] = max(worst["ssan2"], tg.rel_error(res.grads[name], num))
    ok = max(worst.values()) < GRAD_TOL
    record(7, ok, f"worst relative gradient error over 10 instances: ssan1={worst['ssan1']:.2e} "
                  f"ssan2={worst['ssan2']:.2e} (need < {GRAD_TOL:.0e})")
    assert ok


def test_c8_property_suite():
    names = [n for n in dir(test_properties) if n.startswith("test_")]
    failed = []
    for name in names:
        try:
            getattr(test_properties, name)()
        except Exception as exc:  # any violation counts
            failed.append(f"{name}: {type(exc).__name__}")
    ok = not failed
    record(8, ok, f"{len(names) - len(failed)}/{len(names)} property checks hold"
                  + ("" if ok else " (violations: " + ", ".join(failed) + ")"))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s", "-p", "no:cacheprovider"]))
