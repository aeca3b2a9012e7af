import math

import numpy as np
import pytest

from src.device.circuit import resonator_pole_frequency
from src.gain.fwm import PumpSettings
from src.gain.profile import (
    GAIN_COLUMNS,
    GainCurve,
    contiguous_band_above,
    flagged_window,
    gain_gap_window,
    gain_profile,
)

PUMP = PumpSettings(6.688e9, -73.0)


def _curve(freqs, gain_db, flags=None):
    freqs = np.asarray(freqs, dtype=float)
    flags = np.zeros(freqs.size, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
    return GainCurve(freqs, np.asarray(gain_db, dtype=float), np.zeros(freqs.size), PUMP, flags)


def test_profile_columns_and_lower_bound(toy_cell):
    curve = gain_profile(toy_cell, 64, PUMP, np.linspace(4e9, 6.5e9, 11))
    df = curve.frame()
    assert list(df.columns) == GAIN_COLUMNS
    assert (df["gain_db"] >= -1e-9).all()
    np.testing.assert_allclose(curve.idler_freqs, 2 * PUMP.frequency - curve.signal_freqs)


def test_unreachable_points_are_gaps(toy_cell):
    pole = resonator_pole_frequency(toy_cell.resonator)
    freqs = [5e9, pole + 10e6, pole, 2 * PUMP.frequency + 1e9]
    curve = gain_profile(toy_cell, 32, PUMP, freqs)
    assert math.isfinite(curve.gain_db[0]) and not curve.stopband_flag[0]
    assert curve.stopband_flag[1]
    assert math.isnan(curve.gain_db[2])
    assert math.isnan(curve.gain_db[3])
    assert curve.gaps.tolist() == [False, False, True, True]


def test_profile_is_symmetric_about_the_pump_without_dispersion_features(bare_cell):
    pump = PumpSettings(4.0e9, -73.0)
    curve = gain_profile(bare_cell, 64, pump, [3.5e9, 4.5e9])
    assert curve.gain_db[0] == pytest.approx(curve.gain_db[1], rel=1e-6)


def test_flagged_window():
    f = np.arange(6.0e9, 7.0e9, 0.1e9)
    flags = np.zeros(f.size, dtype=bool)
    assert flagged_window(_curve(f, np.zeros(f.size), flags)) is None
    flags[3:5] = True
    assert flagged_window(_curve(f, np.zeros(f.size), flags)) == pytest.approx((6.3e9, 6.4e9))


def test_gap_window_walks_out_from_the_pump():
    f = np.arange(6.288e9, 7.1e9, 0.1e9)
    g = np.full(f.size, 15.0)
    g[3:6] = 5.0
    window = gain_gap_window(_curve(f, g))
    assert window == pytest.approx((f[2], f[6]))


def test_gap_window_that_never_recovers():
    f = np.linspace(6.0e9, 7.0e9, 11)
    g = np.full(f.size, 15.0)
    g[5:] = 0.0
    assert gain_gap_window(_curve(f, g)) is None


def test_contiguous_band_bridges_the_excluded_window():
    f = np.arange(11, dtype=float)
    g = np.full(11, 20.0)
    g[5] = 0.0
    curve = _curve(f, g)
    assert contiguous_band_above(curve) == pytest.approx(4.0)
    assert contiguous_band_above(curve, exclude=(4.0, 6.0)) == pytest.approx(8.0)


def test_contiguous_band_ignores_flagged_points():
    f = np.arange(6, dtype=float)
    flags = [False, False, True, False, False, False]
    assert contiguous_band_above(_curve(f, np.full(6, 20.0), flags)) == pytest.approx(2.0)
    assert contiguous_band_above(_curve([1.0], [20.0])) == 0.0
