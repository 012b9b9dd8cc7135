import math

import numpy as np
import pandas as pd
import pytest

from coding.params import SystemConfig
from simulation.harness import (
    CSV_COLUMNS,
    param_sweep_frame,
    run_alpha_sweep,
    run_bler_sweep,
    run_param_sweep,
    run_trial,
    se_table,
    wilson_interval,
)
from utils.errors import ConfigError
from utils.utils import store_dataframe

Z95 = 1.959963984540054
SMALL = SystemConfig(n=128, m=32, k_b=1, l=2, k_s=1, seed=5)


def _wilson_reference(errors, trials):
    p = errors / trials
    centre = (errors + Z95**2 / 2) / (trials + Z95**2)
    half = Z95 * math.sqrt(trials) / (trials + Z95**2) * math.sqrt(p * (1 - p) + Z95**2 / (4 * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


@pytest.mark.parametrize("errors,trials", [(0, 10), (1, 100), (50, 100)])
def test_wilson_interval_closed_form(errors, trials):
    low, high = wilson_interval(errors, trials)
    ref_low, ref_high = _wilson_reference(errors, trials)
    assert low == pytest.approx(ref_low, abs=1e-12)
    assert high == pytest.approx(ref_high, abs=1e-12)
    assert low <= errors / trials <= high


def test_wilson_interval_without_errors():
    low, high = wilson_interval(0, 10)
    assert low == pytest.approx(0.0, abs=1e-15)
    assert high == pytest.approx(Z95**2 / (10 + Z95**2))


def test_wilson_interval_edges_are_exact():
    for trials in range(1, 20001, 7):
        assert wilson_interval(0, trials)[0] == 0.0
        assert wilson_interval(trials, trials)[1] == 1.0


def test_run_trial_is_reproducible():
    first = run_trial(SMALL, None, 2.0, 9, 0, 3)
    second = run_trial(SMALL, None, 2.0, 9, 0, 3)
    assert first == second


def test_sweep_is_deterministic():
    first = run_bler_sweep(SMALL, [0.0, 4.0], 60, master_seed=7).to_frame()
    second = run_bler_sweep(SMALL, [0.0, 4.0], 60, master_seed=7).to_frame()
    pd.testing.assert_frame_equal(first, second)


def test_sweep_does_not_depend_on_threads():
    single = run_bler_sweep(SMALL, [0.0, 4.0], 60, master_seed=8, threads=1).to_frame()
    pooled = run_bler_sweep(SMALL, [0.0, 4.0], 60, master_seed=8, threads=3).to_frame()
    pd.testing.assert_frame_equal(single, pooled)


def test_fresh_codebooks_are_deterministic():
    first = run_bler_sweep(SMALL, [2.0], 40, master_seed=9, fresh_codebook=True).to_frame()
    second = run_bler_sweep(SMALL, [2.0], 40, master_seed=9, fresh_codebook=True, threads=2).to_frame()
    pd.testing.assert_frame_equal(first, second)


def test_error_accounting():
    result = run_bler_sweep(SMALL, [-4.0, 0.0], 80, master_seed=10)
    assert len(result) == 2
    for point in result:
        assert point.trials == 80
        assert point.errors == point.failure_invalid_support + point.failure_singular + point.failure_wrong_bits
        assert point.bler == point.errors / point.trials
        low, high = point.interval
        assert low <= point.bler <= high
    assert result[0].errors > 0


def test_frame_layout():
    frame = run_bler_sweep(SMALL, [1.0], 20, master_seed=11).to_frame()
    assert list(frame.columns) == CSV_COLUMNS
    assert frame.loc[0, "axis"] == "snr"
    assert frame.loc[0, "value"] == 1.0
    assert frame.loc[0, "trials"] == 20


def test_sweep_csv_text_and_file(tmp_path):
    result = run_bler_sweep(SMALL, [1.0], 20, master_seed=11)
    text = result.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    path = result.to_csv(tmp_path / "sweep" / "bler.csv")
    assert path.read_text() == text


def test_stored_csv_uses_six_significant_digits(tmp_path):
    frame = pd.DataFrame({"bler": [1 / 3], "trials": [3]})
    path = store_dataframe(frame, tmp_path / "out" / "table.csv")
    assert path.read_text() == "bler,trials\n0.333333,3\n"


def test_noiseless_sweep_has_no_errors():
    cfg = SystemConfig(n=256, m=64, k_b=1, l=2, k_s=1, seed=12)
    result = run_bler_sweep(cfg, [200.0], 1000, master_seed=12)
    assert result[0].errors == 0
    assert result[0].bler == 0.0
    assert result[0].interval[0] == 0.0


def test_invalid_configuration_is_rejected_before_trials():
    with pytest.raises(ConfigError, match="N mod L"):
        run_bler_sweep(SystemConfig(n=10, m=8, k_b=1, l=3, k_s=1), [0.0], 10)
    with pytest.raises(ValueError):
        run_bler_sweep(SMALL, [0.0], 0)


def test_alpha_sweep():
    result = run_alpha_sweep(SMALL, [0.3, 0.64], 2.0, 40, master_seed=13)
    frame = result.to_frame()
    assert frame["axis"].tolist() == ["alpha", "alpha"]
    assert frame["value"].tolist() == [0.3, 0.64]
    assert result.best().bler == min(point.bler for point in result)
    again = run_alpha_sweep(SMALL, [0.3, 0.64], 2.0, 40, master_seed=13).to_frame()
    pd.testing.assert_frame_equal(frame, again)


def test_alpha_sweep_rejects_alpha_outside_unit_interval():
    with pytest.raises(ConfigError, match="alpha"):
        run_alpha_sweep(SMALL, [0.5, 1.0], 2.0, 10)


def test_param_sweep():
    cfg = SystemConfig(n=120, m=32, k_b=1, l=2, k_s=1, seed=14)
    results = run_param_sweep(cfg, [(2, 1), (3, 2)], [0.0, 3.0], 30, master_seed=14)
    assert list(results) == [(2, 1), (3, 2)]
    assert [point.value for point in results[(3, 2)]] == ["(3,2)", "(3,2)"]
    frame = param_sweep_frame(results)
    assert len(frame) == 4
    assert set(frame["axis"]) == {"(L,K_s)"}
    again = param_sweep_frame(run_param_sweep(cfg, [(2, 1), (3, 2)], [0.0, 3.0], 30, master_seed=14))
    pd.testing.assert_frame_equal(frame, again)


def test_param_sweep_rejects_invalid_pair():
    cfg = SystemConfig(n=120, m=32, k_b=1, l=2, k_s=1)
    with pytest.raises(ConfigError):
        run_param_sweep(cfg, [(2, 1), (7, 1)], [0.0], 10)


def test_se_table_gains():
    table = se_table(138, 5.0)
    assert len(table) == 10
    qpsk = table[table["mod_order"] == 4]
    qam16 = table[table["mod_order"] == 16]
    assert (qpsk["ratio"] >= 1.12 - 1e-9).all()
    assert (np.round((qam16["ratio"] - 1.0) * 100) >= 14).all()
    row = qam16[(qam16["k_b"] == 1) & (qam16["l"] == 5) & (qam16["k_s"] == 1)].iloc[0]
    assert row["ratio"] == pytest.approx(2.0, abs=0.02)
    assert (row["b_dmsvc"], row["b_ssc"]) == (38, 57)
    pd.testing.assert_frame_equal(table, se_table(138, 5.0))


def test_se_table_rejects_oversized_pattern():
    with pytest.raises(ConfigError):
        se_table(8, 5.0, [(2, 3, 1)])


def _calibrated_snr(cfg, target, seed, start=-6.0, stop=30.0, step=1.0, trials=1000):
    """Lowest SNR on a 1 dB grid where the BLER drops to ``target`` or below."""
    snr = start
    while snr <= stop:
        if run_bler_sweep(cfg, [snr], trials, master_seed=seed, threads=4)[0].bler <= target:
            return snr
        snr += step
    pytest.fail(f"BLER never dropped below {target} up to {stop} dB")


@pytest.mark.slow
def test_bler_decreases_with_snr():
    cfg = SystemConfig(n=256, m=64, k_b=1, l=2, k_s=1, seed=20)
    result = run_bler_sweep(cfg, [-2.0, 0.0, 2.0, 4.0], 10000, master_seed=20, threads=4)
    for lower, higher in zip(result.points, result.points[1:]):
        assert higher.bler <= lower.bler or higher.interval[0] <= lower.interval[1]


@pytest.mark.slow
def test_power_split_optimum_is_interior():
    cfg = SystemConfig(n=510, m=96, k_b=1, l=3, k_s=1, alpha=0.64, channel="rayleigh-iid", seed=21)
    snr = _calibrated_snr(cfg, 2e-2, seed=21)
    result = run_alpha_sweep(cfg, [0.2, 0.64, 0.9], snr, 20000, master_seed=22, threads=4)
    low_alpha, optimum, high_alpha = result.points
    assert optimum.interval[1] < low_alpha.interval[0]
    assert optimum.interval[1] < high_alpha.interval[0]


@pytest.mark.slow
def test_two_stage_beats_full_vector_baselines():
    base = SystemConfig(n=262, m=80, k_b=1, l=2, k_s=1, alpha=0.64, seed=23)
    snr = _calibrated_snr(base, 1.5e-2, seed=23)
    points = {
        decoder: run_bler_sweep(base.replace(decoder=decoder), [snr], 20000, master_seed=24, threads=4)[0]
        for decoder in ("two-stage", "mmp", "omp")
    }
    assert points["two-stage"].bler < points["mmp"].bler
    assert points["two-stage"].interval[1] < points["omp"].interval[0]
    assert points["mmp"].interval[0] <= points["omp"].interval[1]


@pytest.mark.slow
def test_longer_blocks_and_more_singles_cost_reliability():
    cfg = SystemConfig(n=2100, m=80, k_b=1, l=2, k_s=1, seed=25)
    snr = _calibrated_snr(cfg, 3e-2, seed=25)
    results = run_param_sweep(cfg, [(2, 1), (3, 2)], [snr], 20000, master_seed=26, threads=4)
    assert results[(3, 2)][0].bler >= results[(2, 1)][0].bler
