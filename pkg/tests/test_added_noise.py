import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.config import RAW_DIR
from src.errors import DomainError
from src.noise.added_noise import (
    ChainGains,
    NoiseSpectra,
    added_noise,
    average_excess_noise,
    noise_frame,
    photon_energy,
    quanta_to_psd_w_per_hz,
    read_noise_csv,
    snri,
    standard_quantum_limit,
    synthesize_chain_spectra,
)

FREQS = np.linspace(4e9, 8e9, 9)


@given(
    st.floats(min_value=1.0, max_value=1e4),
    st.floats(min_value=0.0, max_value=5.0),
    st.floats(min_value=0.5, max_value=50.0),
    st.floats(min_value=1e2, max_value=1e8),
)
def test_forward_model_inverts(g_twpa, n_add, n_sys, g_sys):
    spectra, gains = synthesize_chain_spectra(FREQS, g_twpa, n_add, n_sys, g_sys)
    np.testing.assert_allclose(added_noise(spectra, gains), n_add, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("g, expected", [(1.0, 0.0), (100.0, 0.495), (math.inf, 0.5)])
def test_standard_quantum_limit(g, expected):
    assert standard_quantum_limit(g) == pytest.approx(expected, abs=1e-12)


def test_standard_quantum_limit_rejects_attenuation():
    with pytest.raises(DomainError):
        standard_quantum_limit(0.5)
    with pytest.raises(DomainError):
        standard_quantum_limit(np.array([2.0, math.nan]))


def test_snri_of_a_quantum_limited_amplifier():
    # on/off = 1 + (G - 1) / n_sys when n_add sits at the quantum limit
    g = 100.0
    spectra, gains = synthesize_chain_spectra(FREQS, g, standard_quantum_limit(g), 15.0, 1e6)
    expected = 10 * math.log10(g / (1 + (g - 1) / 15.0))
    np.testing.assert_allclose(snri(spectra, gains), expected, rtol=1e-12)


def test_snri_needs_a_positive_floor():
    spectra = NoiseSpectra(FREQS, np.ones(9), np.zeros(9))
    with pytest.raises(DomainError):
        snri(spectra, ChainGains(np.ones(9), np.ones(9)))


def test_inverted_floors_are_kept_and_counted(caplog):
    spectra = NoiseSpectra(FREQS[:2], np.array([1.0, 3.0]), np.array([2.0, 2.0]))
    n = added_noise(spectra, ChainGains(np.ones(2), np.full(2, 10.0)))
    assert n[0] < 0
    assert "1 of 2" in caplog.text


def test_gains_must_be_positive():
    spectra = NoiseSpectra(FREQS[:1], np.ones(1), np.ones(1))
    with pytest.raises(DomainError):
        added_noise(spectra, ChainGains(np.zeros(1), np.ones(1)))


def test_average_excess_noise_band_and_exclusions():
    g = np.full(FREQS.size, 100.0)
    n = standard_quantum_limit(g) + 0.25
    n[0] = 50.0
    assert average_excess_noise(FREQS, n, g, band=(4.5e9, 8e9)) == pytest.approx(0.25)
    exclude = np.zeros(FREQS.size, dtype=bool)
    exclude[0] = True
    assert average_excess_noise(FREQS, n, g, exclude=exclude) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        average_excess_noise(FREQS, n, g, band=(1e9, 2e9))


def test_unit_conversion_uses_photon_energy():
    assert quanta_to_psd_w_per_hz(1.0, 6e9) == pytest.approx(photon_energy(6e9))
    assert photon_energy(6e9) == pytest.approx(3.9757e-24, rel=1e-4)


def test_reference_noise_floors_are_near_the_quantum_limit():
    spectra = read_noise_csv(RAW_DIR / "noise_floors.csv")
    df = noise_frame(spectra, ChainGains(np.full(spectra.freqs.size, 1e6), np.full(spectra.freqs.size, 1e2)))
    assert list(df.columns) == ["freq_hz", "g_twpa_db", "n_add", "sql", "excess", "snri_db"]
    assert spectra.freqs[0] == 3e9


def test_w_per_hz_files_are_converted(tmp_path):
    path = tmp_path / "floors.csv"
    e = photon_energy(6e9)
    path.write_text(f"! units=w_per_hz\nfreq_hz,psd_on,psd_off\n6e9,{4 * e:.17g},{2 * e:.17g}\n")
    spectra = read_noise_csv(path)
    assert spectra.psd_on[0] == pytest.approx(4.0)
    assert spectra.psd_off[0] == pytest.approx(2.0)


def test_noise_csv_needs_units(tmp_path):
    path = tmp_path / "floors.csv"
    path.write_text("freq_hz,psd_on,psd_off\n6e9,4,2\n")
    with pytest.raises(ValueError, match="units"):
        read_noise_csv(path)
    path.write_text("! units=quanta\nfreq_hz,psd_on\n6e9,4\n")
    with pytest.raises(KeyError, match="psd_off"):
        read_noise_csv(path)
