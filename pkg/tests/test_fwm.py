import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.device.circuit import resonator_pole_frequency
from src.errors import DomainError
from src.gain.fwm import (
    PumpSettings,
    analytic_gain,
    coupling_coefficient,
    flux_to_dbm,
    idler_omega,
    mismatch_terms,
    photon_flux,
    pump_current_amplitude,
)

kappas = st.floats(min_value=1e-4, max_value=0.05)
mismatches = st.floats(min_value=-0.2, max_value=0.2)
lengths = st.integers(min_value=1, max_value=2000)


def test_phase_matched_gain_is_cosh_squared():
    g_s, g_i = analytic_gain(0.01, 0.0, 100)
    assert g_s == pytest.approx(math.cosh(1.0) ** 2, rel=1e-12)
    assert g_i == pytest.approx(math.sinh(1.0) ** 2, rel=1e-12)


# kappa N stays below 8 so G_s - G_i is resolvable in double precision
@given(st.floats(min_value=1e-3, max_value=8.0), mismatches, lengths)
def test_signal_and_idler_gains_differ_by_one(kappa_n, dk, n):
    g_s, g_i = analytic_gain(kappa_n / n, dk, n)
    assert g_i >= 0.0
    assert g_s - g_i == pytest.approx(1.0, rel=1e-9)


@given(kappas, lengths)
def test_gain_is_continuous_where_exponent_vanishes(kappa, n):
    dk = 2.0 * kappa
    at = analytic_gain(kappa, dk, n)[1]
    assert at == pytest.approx((kappa * n) ** 2, rel=1e-9)
    for eps in (1e-9, -1e-9):
        assert analytic_gain(kappa, dk * (1 + eps), n)[1] == pytest.approx(at, rel=1e-4)


@given(kappas, st.floats(min_value=3.0, max_value=50.0), lengths)
def test_large_mismatch_bounds_idler_gain(kappa, ratio, n):
    dk = ratio * 2.0 * kappa
    g_i = analytic_gain(kappa, dk, n)[1]
    assert g_i <= kappa**2 / ((dk / 2.0) ** 2 - kappa**2) * (1 + 1e-9)


def test_gain_broadcasts_over_arrays():
    g_s, g_i = analytic_gain(0.01, np.array([0.0, 0.01, 0.05]), 100)
    assert g_s.shape == (3,)
    assert g_s[0] > g_s[1] > g_s[2]


def test_gain_rejects_empty_line():
    with pytest.raises(DomainError):
        analytic_gain(0.01, 0.0, 0)


def test_pump_current_at_minus_73_dbm():
    # sqrt(2 P / Z) with P = 50.1 pW and Z = 50 ohm
    i_p = pump_current_amplitude(PumpSettings(6.688e9, -73.0), 50.0)
    assert i_p == pytest.approx(1.416e-6, rel=1e-3)
    with pytest.raises(DomainError):
        pump_current_amplitude(PumpSettings(6.688e9, -73.0), 0.0)


@pytest.mark.parametrize("p_dbm", [-140.0, -100.0, -73.0, -20.0])
def test_photon_flux_inverts(p_dbm):
    assert flux_to_dbm(photon_flux(p_dbm, 6e9), 6e9) == pytest.approx(p_dbm, abs=1e-10)


def test_zero_flux_is_minus_infinity():
    assert flux_to_dbm(0.0, 6e9) == -math.inf
    assert photon_flux(-math.inf, 6e9) == 0.0


def test_pump_settings_validation():
    assert PumpSettings(6e9, -math.inf).is_off
    assert not PumpSettings(6e9, -80.0).is_off
    assert PumpSettings(6e9, -80.0).with_power(-70.0).input_power == -70.0
    for kwargs in ({"frequency": 0.0, "input_power": -70.0}, {"frequency": 6e9, "input_power": math.nan}):
        with pytest.raises(DomainError):
            PumpSettings(**kwargs)


def test_idler_must_stay_above_zero():
    pump = PumpSettings(5e9, -70.0)
    assert idler_omega(pump, 2 * math.pi * 4e9) == pytest.approx(2 * math.pi * 6e9)
    with pytest.raises(DomainError):
        idler_omega(pump, 2 * math.pi * 10e9)


def test_kerr_terms_scale_with_wavenumbers(toy_cell):
    pump = PumpSettings(6.0e9, -73.0)
    i_p = 1.0e-6
    t = mismatch_terms(toy_cell, pump, 2 * math.pi * 5.5e9, i_p)
    r2 = (i_p / toy_cell.junctions.critical_current) ** 2
    assert t.kappa == pytest.approx(coupling_coefficient(t.k_p, i_p, toy_cell.junctions.critical_current))
    assert t.kappa == pytest.approx(t.k_p * r2 / 8.0)
    assert t.kerr == pytest.approx(r2 * (t.k_s + t.k_i) / 2.0 - r2 * t.k_p / 4.0, rel=1e-12)
    assert t.total == pytest.approx(t.linear + t.kerr)
    assert not t.in_stopband


def test_idler_in_stopband_is_flagged(toy_cell):
    pump = PumpSettings(6.688e9, -73.0)
    f_i = resonator_pole_frequency(toy_cell.resonator) + 5e6
    f_s = 2 * pump.frequency - f_i
    assert mismatch_terms(toy_cell, pump, 2 * math.pi * f_s, 1e-6).in_stopband
