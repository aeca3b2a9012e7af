"""
Degenerate-pump four-wave mixing along the TWPA line.

Wavenumbers are per cell (rad/cell) and come from the linear Bloch model.
The pump-induced Kerr shifts follow the quartic expansion of the junction
inductance, L(I) ~ L_J (1 + I^2 / (2 I_c^2)):

    alpha_p = k_p (I_p/I_c)^2 / 8        pump self-phase
    alpha_x = k_x (I_p/I_c)^2 / 4        cross-phase on signal / idler
    kappa   = k_p (I_p/I_c)^2 / 8        conversion coupling
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.config import STOPBAND_IMAG_K
from src.device.circuit import CONSTANTS, UnitCellParams
from src.errors import DomainError
from src.network.abcd import bloch_wavenumber
from src.utils.units import dbm_to_watts


@dataclass(frozen=True)
class PumpSettings:
    frequency: float  # Hz
    input_power: float  # dBm at the device input; -inf means pump off

    def __post_init__(self) -> None:
        if not (self.frequency > 0) or not math.isfinite(self.frequency):
            raise DomainError(f"pump frequency must be a finite positive number, got {self.frequency!r}")
        if math.isnan(self.input_power) or self.input_power == math.inf:
            raise DomainError(f"pump input_power must be a finite dBm value or -inf, got {self.input_power!r}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def watts(self) -> float:
        return float(dbm_to_watts(self.input_power))

    @property
    def is_off(self) -> bool:
        return self.watts == 0.0

    def with_power(self, input_power: float) -> "PumpSettings":
        return PumpSettings(frequency=self.frequency, input_power=input_power)


def photon_flux(power_dbm: float, frequency: float) -> float:
    """Photons per second carried by a tone of power_dbm at frequency (Hz)."""
    return float(dbm_to_watts(power_dbm)) / (CONSTANTS.reduced_planck * 2.0 * math.pi * frequency)


def flux_to_dbm(flux: float, frequency: float) -> float:
    watts = flux * CONSTANTS.reduced_planck * 2.0 * math.pi * frequency
    if watts <= 0:
        return -math.inf
    return 10.0 * math.log10(watts) + 30.0


def pump_current_amplitude(pump: PumpSettings, z_line: float) -> float:
    """I_p = sqrt(2 P / Z), peak current of the pump tone in ampere."""
    if not z_line > 0:
        raise DomainError(f"z_line must be > 0, got {z_line!r}")
    return math.sqrt(2.0 * pump.watts / z_line)


def wavenumber_parts(cell: UnitCellParams, omega: float) -> Tuple[float, float]:
    k = bloch_wavenumber(cell, omega).k_per_cell
    return float(k.real), float(k.imag)


def coupling_coefficient(k_pump: float, i_pump: float, critical_current: float) -> float:
    """kappa = k_p (I_p/I_c)^2 / 8, rad per cell."""
    return k_pump * (i_pump / critical_current) ** 2 / 8.0


@dataclass(frozen=True)
class MismatchTerms:
    k_p: float
    k_s: float
    k_i: float
    im_k_s: float
    im_k_i: float
    alpha_p: float
    alpha_s: float
    alpha_i: float
    kappa: float

    @property
    def linear(self) -> float:
        return self.k_s + self.k_i - 2.0 * self.k_p

    @property
    def kerr(self) -> float:
        return 2.0 * self.alpha_s + 2.0 * self.alpha_i - 2.0 * self.alpha_p

    @property
    def total(self) -> float:
        return self.linear + self.kerr

    @property
    def in_stopband(self) -> bool:
        return self.im_k_s > STOPBAND_IMAG_K or self.im_k_i > STOPBAND_IMAG_K


def idler_omega(pump: PumpSettings, omega_s: float) -> float:
    omega_i = 2.0 * pump.omega - omega_s
    if not omega_i > 0:
        raise DomainError(
            f"idler frequency 2*f_p - f_s must be > 0 "
            f"(f_p={pump.frequency:.6g} Hz, f_s={omega_s / (2 * math.pi):.6g} Hz)"
        )
    return omega_i


def mismatch_terms(cell: UnitCellParams, pump: PumpSettings, omega_s: float, i_pump: float) -> MismatchTerms:
    omega_i = idler_omega(pump, omega_s)
    k_p, _ = wavenumber_parts(cell, pump.omega)
    k_s, im_s = wavenumber_parts(cell, omega_s)
    k_i, im_i = wavenumber_parts(cell, omega_i)

    r2 = (i_pump / cell.junctions.critical_current) ** 2
    return MismatchTerms(
        k_p=k_p,
        k_s=k_s,
        k_i=k_i,
        im_k_s=im_s,
        im_k_i=im_i,
        alpha_p=k_p * r2 / 8.0,
        alpha_s=k_s * r2 / 4.0,
        alpha_i=k_i * r2 / 4.0,
        kappa=coupling_coefficient(k_p, i_pump, cell.junctions.critical_current),
    )


def phase_mismatch(cell: UnitCellParams, pump: PumpSettings, omega_s: float, i_pump: float) -> float:
    """Total mismatch k_s + k_i - 2 k_p plus the Kerr shifts, rad per cell."""
    return mismatch_terms(cell, pump, omega_s, i_pump).total


# ---------------------------------------------------------------------------
# Closed-form undepleted gain
# ---------------------------------------------------------------------------

def _sinhc_sq(x2):
    """(sinh(x)/x)^2 with x^2 = x2 allowed negative (then sin(|x|)/|x|)."""
    x2 = np.asarray(x2, dtype=float)
    shape = x2.shape
    x2 = np.atleast_1d(x2)
    out = np.empty_like(x2)
    small = np.abs(x2) < 1e-8
    pos = (x2 > 0) & ~small
    neg = (x2 < 0) & ~small

    xp = np.sqrt(x2[pos])
    out[pos] = (np.sinh(xp) / xp) ** 2
    xn = np.sqrt(-x2[neg])
    out[neg] = (np.sin(xn) / xn) ** 2
    xs = x2[small]
    out[small] = 1.0 + xs / 3.0 + 2.0 * xs**2 / 45.0
    return out.reshape(shape)


def analytic_gain(kappa, delta_k, n_cells):
    """
    Undepleted-pump signal and idler power gains (G_s, G_i).

    Written as G_i = (kappa N)^2 sinhc^2(g N), G_s = 1 + G_i, which equals the
    cosh^2 / sinh^2 form and stays continuous across g = 0.
    Scalars in, floats out; arrays broadcast.
    """
    if np.any(np.asarray(n_cells) < 1):
        raise DomainError(f"n_cells must be >= 1, got {n_cells!r}")
    kappa = np.asarray(kappa, dtype=float)
    delta_k = np.asarray(delta_k, dtype=float)
    n = np.asarray(n_cells, dtype=float)

    g2 = kappa**2 - (delta_k / 2.0) ** 2
    g_i = (kappa * n) ** 2 * _sinhc_sq(g2 * n**2)
    g_s = 1.0 + g_i
    if g_s.ndim == 0:
        return float(g_s), float(g_i)
    return g_s, g_i
