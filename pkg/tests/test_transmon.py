import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.config import RAW_DIR
from src.errors import DomainError
from src.noise.transmon import (
    QubitDataset,
    _model_jacobian,
    fit_attenuation_linear,
    fit_qubit_dataset,
    lineshape_jacobian,
    rabi_rate_squared,
    read_qubit_csv,
    synthesize_qubit_dataset,
    transmon_transmittance,
)

TWO_PI = 2 * math.pi
FREQS = 6.0e9 + np.arange(-4e6, 4e6 + 1.0, 0.2e6)
POWERS = np.arange(-100.0, -59.0, 2.0)
TRUTH = dict(f_q=6.0e9, gamma1=1.0e6, gamma2=0.6e6, attenuation_db=-66.0, background=0.8 * np.exp(0.3j), delay=20e-9)


@given(
    st.floats(min_value=-50.0, max_value=50.0),
    st.floats(min_value=0.0, max_value=1e3),
    st.floats(min_value=1e5, max_value=1e7),
    st.floats(min_value=0.0, max_value=1e7),
)
def test_transmittance_is_passive(u, s, g1, g_phi):
    g2 = g1 / 2.0 + g_phi
    t = transmon_transmittance(u * g2, math.sqrt(s * g1 * g2), g1, g2)
    assert abs(t) <= 1.0 + 1e-12


def test_radiatively_limited_qubit_reflects_fully_on_resonance():
    g1 = TWO_PI * 1e6
    assert abs(transmon_transmittance(0.0, 0.0, g1, g1 / 2.0)) < 1e-15


def test_strong_drive_makes_the_qubit_transparent():
    g1 = TWO_PI * 1e6
    assert abs(transmon_transmittance(0.0, 1e5 * g1, g1, g1) - 1.0) < 1e-6


def test_transmittance_rejects_non_positive_rates():
    with pytest.raises(DomainError):
        transmon_transmittance(0.0, 0.0, 0.0, 1.0)


def test_jacobian_matches_finite_differences():
    point = np.array([0.7e6, TWO_PI * 1e6, TWO_PI * 0.8e6, 3e12])  # delta, g1, g2, rabi_sq
    jac = lineshape_jacobian(point[0], point[3], point[1], point[2])

    def t(p):
        return transmon_transmittance(p[0], math.sqrt(p[3]), p[1], p[2])

    for i in range(4):
        h = 1e-6 * abs(point[i])
        up, down = point.copy(), point.copy()
        up[i] += h
        down[i] -= h
        numeric = (t(up) - t(down)) / (2 * h)
        assert jac[i] == pytest.approx(numeric, rel=1e-5, abs=1e-12 / abs(point[i]))


def test_fit_jacobian_matches_finite_differences():
    f = FREQS[::5]
    p = POWERS[::5]
    x = np.array([6.0003e9, 1.0e6, 0.1e6, -66.0, 0.8, 0.3, 20e-9])
    f_ref = float(np.mean(f))

    def model(v):
        f_q, g1, g_phi, att, amp, phase, delay = v
        m = transmon_transmittance(
            TWO_PI * (f - f_q)[:, None],
            np.sqrt(rabi_rate_squared(10.0 ** ((p + att - 30.0) / 10.0), f_q, TWO_PI * g1))[None, :],
            TWO_PI * g1,
            TWO_PI * (g1 / 2.0 + g_phi),
        )
        return (amp * np.exp(1j * phase) * np.exp(-1j * TWO_PI * (f - f_ref) * delay))[:, None] * m

    jac = _model_jacobian(f, p, *x, f_ref, 4.0)
    assert jac.shape == (7, f.size, p.size)
    for i in range(7):
        h = 10.0 if i == 0 else 1e-6 * abs(x[i])
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        numeric = (model(up) - model(down)) / (2 * h)
        np.testing.assert_allclose(jac[i], numeric, rtol=1e-4, atol=1e-6 * np.max(np.abs(numeric)))


def test_rabi_rate_scales_with_power_and_convention():
    a = rabi_rate_squared(1e-18, 6e9, 1e6)
    assert rabi_rate_squared(2e-18, 6e9, 1e6) == pytest.approx(2 * a)
    assert rabi_rate_squared(1e-18, 6e9, 1e6, convention=1.0) == pytest.approx(a / 4)


def test_noiseless_fit_recovers_the_truth():
    data = synthesize_qubit_dataset(FREQS, POWERS, **TRUTH)
    fit = fit_qubit_dataset(data, restarts=2)
    assert fit.omega_q == pytest.approx(TRUTH["f_q"], abs=1e3)
    assert fit.gamma1 == pytest.approx(TRUTH["gamma1"], rel=1e-3)
    assert fit.gamma2 == pytest.approx(TRUTH["gamma2"], rel=1e-3)
    assert fit.attenuation_db == pytest.approx(TRUTH["attenuation_db"], abs=1e-2)
    assert fit.delay == pytest.approx(TRUTH["delay"], rel=1e-3)
    assert fit.residual_rms < 1e-6


def test_noisy_fit_recovers_the_attenuation():
    data = synthesize_qubit_dataset(FREQS, POWERS, noise=0.01, seed=11, **TRUTH)
    fit = fit_qubit_dataset(data)
    assert fit.attenuation_db == pytest.approx(TRUTH["attenuation_db"], abs=0.2)
    assert fit.omega_q == pytest.approx(TRUTH["f_q"], abs=20e3)
    assert fit.gamma1 == pytest.approx(TRUTH["gamma1"], rel=0.05)
    assert 0 < fit.covariance["attenuation_db"] < 0.2
    assert fit.as_dict()["rabi_convention"] == 4.0


def test_convention_shifts_the_attenuation_by_its_ratio():
    data = synthesize_qubit_dataset(FREQS, POWERS, **TRUTH)
    fit = fit_qubit_dataset(data, power_to_rabi_convention=1.0, restarts=2)
    assert fit.attenuation_db == pytest.approx(TRUTH["attenuation_db"] + 10 * math.log10(4.0), abs=2e-2)


def test_fit_needs_enough_points():
    small = synthesize_qubit_dataset(FREQS[:4], POWERS, **TRUTH)
    with pytest.raises(DomainError):
        fit_qubit_dataset(small)


def test_narrow_power_span_warns(caplog):
    data = synthesize_qubit_dataset(FREQS, np.arange(-80.0, -69.0, 2.0), **TRUTH)
    fit_qubit_dataset(data, restarts=1)
    assert "power span" in caplog.text


def test_reference_qubit_files_load_as_grids():
    data = read_qubit_csv(RAW_DIR / "qubits" / "qubit_a.csv")
    assert data.t_complex.shape == (41, 21)
    assert data.power_span_db == pytest.approx(40.0)


def test_incomplete_grid_is_rejected(tmp_path):
    df = synthesize_qubit_dataset(FREQS[:5], POWERS[:3], **TRUTH).frame().iloc[:-1]
    path = tmp_path / "q.csv"
    df.to_csv(path, index=False)
    with pytest.raises(DomainError, match="complete"):
        read_qubit_csv(path)


def test_frame_round_trips_through_csv(tmp_path):
    data = synthesize_qubit_dataset(FREQS[:5], POWERS[:3], **TRUTH)
    path = tmp_path / "q.csv"
    data.frame().sample(frac=1.0, random_state=0).to_csv(path, index=False, float_format="%.17g")
    back = read_qubit_csv(path)
    np.testing.assert_allclose(back.t_complex, data.t_complex, rtol=1e-15)


def test_dataset_shape_is_checked():
    with pytest.raises(DomainError):
        QubitDataset(FREQS[:3], POWERS[:2], np.zeros((2, 3)))


def test_attenuation_line():
    model = fit_attenuation_linear([5e9, 6.2e9, 7.5e9], [-65.0, -66.2, -67.5])
    assert model.slope == pytest.approx(-1.0)
    assert model.intercept == pytest.approx(-60.0)
    assert model.rms_residual == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(model.predict([6e9]), [-66.0])
    with pytest.raises(DomainError):
        fit_attenuation_linear([5e9, 5e9], [-65.0, -65.0])


def _saturation_dbm(truth):
    # rabi_sq = G1 G2 at the qubit, referred back to the instrument
    p_qubit = TWO_PI * truth["gamma2"] * 1.054571817e-34 * TWO_PI * truth["f_q"] / 4.0
    return 10.0 * math.log10(p_qubit) + 30.0 - truth["attenuation_db"]


@pytest.mark.slow
def test_noisy_fits_over_seeded_truth_vectors():
    passed = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g1 = rng.uniform(0.6e6, 1.5e6)
        truth = dict(
            f_q=6.0e9 + rng.uniform(-0.5e6, 0.5e6),
            gamma1=g1,
            gamma2=g1 * rng.uniform(0.55, 0.9),
            attenuation_db=rng.uniform(-72.0, -62.0),
            background=rng.uniform(0.5, 1.0) * np.exp(1j * rng.uniform(-np.pi, np.pi)),
            delay=rng.uniform(0.0, 40e-9),
        )
        powers = _saturation_dbm(truth) + np.arange(-15.0, 15.1, 2.0)
        data = synthesize_qubit_dataset(FREQS, powers, noise=0.01, seed=seed, **truth)
        assert data.power_span_db == pytest.approx(30.0)
        fit = fit_qubit_dataset(data)
        passed += (
            abs(fit.attenuation_db - truth["attenuation_db"]) <= 0.1
            and abs(fit.gamma1 / truth["gamma1"] - 1.0) <= 0.02
            and abs(fit.gamma2 / truth["gamma2"] - 1.0) <= 0.02
        )
    assert passed >= 19
