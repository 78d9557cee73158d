import math

import numpy as np
import pytest

from ostbc.codes import builtin, encode
from ostbc.sim import (
    BLOCK_SIZE, CSV_COLUMNS, SimConfig, draw_channel, noise_variance, records_to_csv, run_monte_carlo,
    transmit,
)


def test_noise_variance():
    assert noise_variance(math.inf, 2) == 0.0
    assert noise_variance(0.0, 2) == pytest.approx(10.0)
    assert noise_variance(10.0, 1) == pytest.approx(0.2)


def test_channel_statistics():
    H = draw_channel(np.random.default_rng(0), 200, 100)
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, rel=0.02)


def test_transmit_noiseless_and_stream_alignment():
    spec = builtin("G2")
    H = np.eye(2)
    s = np.array([1 + 1j, -1 + 3j])
    r0, r1 = np.random.default_rng(5), np.random.default_rng(5)
    assert np.array_equal(transmit(spec, H, s, 0.0, r0), encode(spec, s) @ H)
    transmit(spec, H, s, 1.0, r1)
    assert r0.random() == r1.random()


@pytest.mark.parametrize("kwargs", [
    {"trials": 0}, {"M": 0}, {"crosscheck_fraction": 1.5}, {"decoder": "sphere"},
    {"snr_db": (float("nan"),)}, {"snr_db": (-math.inf,)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_ser_decreases_and_noiseless_is_error_free():
    cfg = SimConfig(code="G2", trials=5000, snr_db=(0, 10, 20, math.inf))
    recs = run_monte_carlo(cfg)
    sers = [r.ser for r in recs]
    assert sers[0] > sers[1] > sers[2] > 0
    assert sers[3] == 0.0
    assert all(r.trials == 5000 for r in recs)


def test_deterministic_and_worker_independent():
    base = dict(code="H3", M=2, L=2, snr_db=(5, 15), trials=2 * BLOCK_SIZE + 17, seed=9)
    a = records_to_csv(SimConfig(**base), run_monte_carlo(SimConfig(**base)))
    b = records_to_csv(SimConfig(**base), run_monte_carlo(SimConfig(**base, workers=3)))
    strip = lambda t: t.split("\n", 1)[1]  # noqa: E731  header echoes worker-free config
    assert a == records_to_csv(SimConfig(**base), run_monte_carlo(SimConfig(**base)))
    assert strip(a) == strip(b)


def test_seed_changes_results():
    a = run_monte_carlo(SimConfig(trials=3000, snr_db=(5,), seed=1))
    b = run_monte_carlo(SimConfig(trials=3000, snr_db=(5,), seed=2))
    assert a[0].symbol_errors != b[0].symbol_errors


def test_decoders_give_identical_counts():
    base = dict(code="G4", L=4, snr_db=(12,), trials=1500, seed=3)
    a = run_monte_carlo(SimConfig(**base, decoder="lattice"))[0]
    b = run_monte_carlo(SimConfig(**base, decoder="trace"))[0]
    assert a.symbol_errors == b.symbol_errors and a.component_errors == b.component_errors


@pytest.mark.parametrize("code, M, L", [("G2", 1, 2), ("H3", 1, 2), ("G3", 2, 2), ("G4", 1, 4)])
def test_crosscheck_has_no_disagreement(code, M, L):
    rec = run_monte_carlo(SimConfig(code=code, M=M, L=L, snr_db=(6,), trials=400, crosscheck_fraction=0.25))[0]
    assert rec.crosschecks > 50
    assert rec.disagreements == 0 and rec.first_disagreement is None


def test_csv_layout():
    cfg = SimConfig(trials=10, snr_db=(10, math.inf))
    lines = records_to_csv(cfg, run_monte_carlo(cfg)).splitlines()
    assert lines[0].startswith("# code=G2") and "snr_def=Es/N0" in lines[0]
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert lines[3].startswith("inf,10,0,0,")
