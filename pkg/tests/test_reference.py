import json
import math

import numpy as np
import pytest

from src.device.circuit import DeviceLine, DisorderSpec, line_impedance, plasma_frequency, resonator_pole_frequency
from src.device.reference import (
    CalibrationTargets,
    calibrate_reference_cell,
    load_targets,
    reference_cell,
    reference_targets,
)
from src.errors import ConfigurationError, DomainError
from src.gain.fwm import PumpSettings, mismatch_terms, pump_current_amplitude
from src.gain.profile import contiguous_band_above, gain_gap_window, gain_profile
from src.network.stopband import sample_ensemble, stopband_width
from src.power.compression import compression_result, gain_vs_input_power
from src.power.intermod import imd_sweep, ip3_from_two_tone

STOPBAND_FREQS = np.arange(6.6e9, 7.2e9 + 1.0, 0.5e6)


def test_targets_reject_bad_values():
    with pytest.raises(DomainError, match="line_impedance"):
        CalibrationTargets(line_impedance=0.0)
    with pytest.raises(DomainError, match="match_detuning"):
        CalibrationTargets(match_detuning=7.0e9)
    with pytest.raises(DomainError, match=">= 1"):
        CalibrationTargets(cell_count=0)


def test_targets_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigurationError, match="Unknown calibration target keys"):
        CalibrationTargets.from_dict({"line_impedance": 58.5, "gain": 20.0})


def test_load_targets(tmp_path):
    path = tmp_path / "device.json"
    path.write_text(json.dumps({"targets": {"line_impedance": 50.0, "cell_count": 128}}), encoding="utf-8")
    t = load_targets(path)
    assert t.line_impedance == 50.0
    assert t.cell_count == 128
    assert t.pump_frequency == 6.688e9
    assert CalibrationTargets.from_dict(t.to_dict()) == t


@pytest.mark.parametrize("content, match", [("", "empty"), ("{not json", "Invalid JSON")])
def test_load_targets_bad_files(tmp_path, content, match):
    path = tmp_path / "device.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError, match=match):
        load_targets(path)


def test_load_targets_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_targets(tmp_path / "absent.json")


def test_shipped_targets_match_defaults():
    assert reference_targets() == CalibrationTargets()


@pytest.mark.slow
def test_reference_cell_meets_targets():
    t = CalibrationTargets()
    cell = reference_cell()

    assert line_impedance(cell) == pytest.approx(58.5, rel=1e-12)
    assert resonator_pole_frequency(cell.resonator) == pytest.approx(6.888e9, rel=1e-9)
    assert plasma_frequency(cell.junctions) == pytest.approx(50e9, rel=1e-9)
    assert cell.resonator.c_res / cell.resonator.c_coupling == pytest.approx(1.0, rel=1e-12)
    assert cell.junctions.count_per_cell == 8

    pump = PumpSettings(frequency=t.pump_frequency, input_power=t.pump_power_dbm)
    i_pump = pump_current_amplitude(pump, t.line_impedance)
    terms = mismatch_terms(cell, pump, 2.0 * math.pi * (t.pump_frequency - t.match_detuning), i_pump)
    assert terms.kappa * t.cell_count == pytest.approx(math.acosh(10.0), rel=1e-6)
    assert abs(terms.total) * t.cell_count < 1e-4


@pytest.mark.slow
def test_calibration_follows_the_stopband_offset():
    cell = calibrate_reference_cell(CalibrationTargets(stopband_offset=300e6))
    assert resonator_pole_frequency(cell.resonator) == pytest.approx(6.988e9, rel=1e-9)


@pytest.mark.slow
def test_reference_gain_band():
    t = CalibrationTargets()
    pump = PumpSettings(frequency=t.pump_frequency, input_power=t.pump_power_dbm)
    freqs = np.arange(3.0e9, 10.4e9 + 1.0, 20.0e6)
    curve = gain_profile(reference_cell(), t.cell_count, pump, freqs)

    matched = np.argmin(np.abs(freqs - (t.pump_frequency - t.match_detuning)))
    assert curve.gain_db[matched] == pytest.approx(20.0, abs=0.05)

    window = gain_gap_window(curve)
    assert window is not None
    assert window[0] < t.pump_frequency < window[1]
    assert 0.3e9 <= window[1] - window[0] <= 1.2e9
    assert curve.stopband_flag.any()
    assert contiguous_band_above(curve, 10.0, exclude=window) >= 3.0e9


@pytest.mark.slow
def test_reference_stopband_with_disorder():
    t = CalibrationTargets()
    lines = sample_ensemble(reference_cell(), t.cell_count, DisorderSpec(sigma_rel=0.002, seed=2024), 100)
    res = stopband_width(lines, STOPBAND_FREQS, workers=-1)
    assert res.found
    assert 30e6 <= res.width_hz <= 56e6

    clean = stopband_width([DeviceLine.uniform(reference_cell(), t.cell_count)], STOPBAND_FREQS)
    assert clean.found
    assert clean.width_hz < res.width_hz


@pytest.mark.slow
def test_reference_stopband_widens_with_disorder():
    t = CalibrationTargets()
    widths = []
    for sigma in (0.0, 0.001, 0.002, 0.004):
        lines = sample_ensemble(reference_cell(), t.cell_count, DisorderSpec(sigma_rel=sigma, seed=7), 40)
        widths.append(stopband_width(lines, STOPBAND_FREQS, workers=-1).width_hz)
    assert None not in widths
    assert widths == sorted(widths)
    assert widths[-1] > widths[0]


@pytest.mark.slow
def test_reference_power_handling_at_5_ghz():
    t = CalibrationTargets()
    pump = PumpSettings(frequency=t.pump_frequency, input_power=t.pump_power_dbm)
    curve = gain_vs_input_power(reference_cell(), t.cell_count, pump, 5.0e9, np.arange(-140.0, -79.0, 1.0), workers=-1)
    p_1db = compression_result(curve).p_1db
    assert p_1db is not None
    assert -105.0 <= p_1db <= -95.0

    df = imd_sweep(reference_cell(), t.cell_count, pump, 5.0e9, 5.0e6, np.arange(-140.0, -129.0, 1.0), workers=-1)
    ip3 = ip3_from_two_tone(df["pin_dbm"], df["p_fund_dbm"], df["p_imd3_dbm"])
    assert ip3 - p_1db == pytest.approx(10.0, abs=4.0)
