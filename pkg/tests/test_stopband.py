import numpy as np
import pytest

from src.device.circuit import DeviceLine, DisorderSpec, resonator_pole_frequency
from src.errors import DomainError
from src.network.stopband import (
    EnsembleTransmission,
    ensemble_transmission,
    nominal_centre,
    sample_ensemble,
    stopband_from_ensemble,
    stopband_width,
)

FREQS = np.arange(6.5e9, 7.3e9 + 1.0, 1e6)


def test_uniform_line_has_a_stopband_around_the_pole(toy_cell):
    res = stopband_width([DeviceLine.uniform(toy_cell, 64)], FREQS)
    pole = resonator_pole_frequency(toy_cell.resonator)
    assert res.found
    assert res.f_low < pole < res.f_high
    assert res.width_hz > 5e6


def test_ensemble_is_reproducible_and_independent_of_size(toy_cell):
    spec = DisorderSpec(sigma_rel=0.02, seed=7)
    small = sample_ensemble(toy_cell, 16, spec, 3)
    large = sample_ensemble(toy_cell, 16, spec, 5)
    assert small == large[:3]
    assert small[0] != small[1]


def test_wider_disorder_gives_a_wider_stopband(toy_cell):
    widths = []
    for sigma in (0.002, 0.02):
        lines = sample_ensemble(toy_cell, 64, DisorderSpec(sigma_rel=sigma, seed=3), 12)
        widths.append(stopband_width(lines, FREQS).width_hz)
    assert None not in widths
    assert widths[1] > widths[0]


def test_no_stopband_on_a_grid_far_from_the_pole(toy_cell):
    res = stopband_width([DeviceLine.uniform(toy_cell, 32)], np.linspace(3e9, 5e9, 201))
    assert not res.found
    assert res.as_dict()["width_hz"] is None


def test_region_running_off_the_grid_is_not_a_stopband():
    f = np.linspace(1e9, 2e9, 11)
    power = np.ones((1, 11))
    power[0, :4] = 1e-3
    res = stopband_from_ensemble(EnsembleTransmission(f, power), centre_hz=1e9)
    assert not res.found


def test_crossings_are_interpolated():
    f = np.arange(10, dtype=float) + 1.0
    db = np.zeros(10)
    db[4:6] = -10.0
    res = stopband_from_ensemble(EnsembleTransmission(f, 10 ** (db / 10)[None, :]), threshold_db=-5.0)
    assert res.f_low == pytest.approx(4.5)
    assert res.f_high == pytest.approx(6.5)
    assert res.width_hz == pytest.approx(2.0)


def test_mean_is_taken_in_linear_power():
    ens = EnsembleTransmission(np.array([1.0]), np.array([[1.0], [0.0]]))
    assert ens.mean_power[0] == 0.5
    assert ens.n_lines == 2


def test_argument_validation(toy_cell):
    line = DeviceLine.uniform(toy_cell, 4)
    with pytest.raises(DomainError):
        stopband_width([line], FREQS, threshold_db=3.0)
    with pytest.raises(DomainError):
        ensemble_transmission([], FREQS)
    with pytest.raises(DomainError):
        sample_ensemble(toy_cell, 4, DisorderSpec(sigma_rel=0.01), 0)


def test_nominal_centre_of_uniform_line(toy_cell):
    assert nominal_centre(DeviceLine.uniform(toy_cell, 3)) == pytest.approx(resonator_pole_frequency(toy_cell.resonator))
