"""
Linear (small-signal, unpumped) network model of the TWPA line.

Each cell is a symmetric T-section Z/2 - Y - Z/2 so that a == d and the Bloch
wavenumber follows from cos(k) = (a + d) / 2. Scalar helpers work at one
angular frequency; the *_grid helpers evaluate a whole frequency grid at once
with batched 2x2 products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from skrf.network import a2s, s2a

from src.config import DEFAULT_Z_REF
from src.device.circuit import (
    DeviceLine,
    UnitCellParams,
    josephson_inductance,
    plasma_frequency,
    resonator_pole_frequency,
)
from src.errors import ConversionError, DomainError, SingularityError

# |denominator| below this counts as sitting on a pole
POLE_EPS = 1e-13

SPECTRUM_COLUMNS = [
    "freq_hz",
    "s11_re", "s11_im",
    "s21_re", "s21_im",
    "s12_re", "s12_im",
    "s22_re", "s22_im",
]


@dataclass(frozen=True)
class TwoPortABCD:
    a: complex
    b: complex  # ohm
    c: complex  # siemens
    d: complex

    @classmethod
    def identity(cls) -> "TwoPortABCD":
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "TwoPortABCD":
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def determinant(self) -> complex:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "TwoPortABCD") -> "TwoPortABCD":
        return TwoPortABCD.from_matrix(self.matrix @ other.matrix)


@dataclass(frozen=True)
class SMatrix:
    s11: complex
    s12: complex
    s21: complex
    s22: complex
    z_ref: float = DEFAULT_Z_REF

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]], dtype=complex)


@dataclass(frozen=True)
class DispersionPoint:
    omega: float  # rad/s
    k_per_cell: complex  # rad/cell


# ---------------------------------------------------------------------------
# Element immittances
# ---------------------------------------------------------------------------

def series_impedance(cell: UnitCellParams, omega):
    """n * j w L_J / (1 - w^2 L_J C_J) + R_series. Works on scalars or arrays."""
    j = cell.junctions
    l_j = josephson_inductance(j.critical_current)
    den = 1.0 - omega**2 * l_j * j.self_capacitance
    return j.count_per_cell * 1j * omega * l_j / den + cell.series_resistance


def shunt_admittance(cell: UnitCellParams, omega):
    """
    j w c_ground plus the resonator branch: c_coupling in series with the
    l_res || c_res tank, written as j w Cc (1 - w^2 L C) / (1 - w^2 L (C + Cc))
    so that it stays finite at the bare tank pole.
    """
    r = cell.resonator
    y = 1j * omega * cell.c_ground
    if r.c_coupling == 0:
        return y
    num = 1.0 - omega**2 * r.l_res * r.c_res
    den = 1.0 - omega**2 * r.l_res * (r.c_res + r.c_coupling)
    return y + 1j * omega * r.c_coupling * num / den


def _check_poles(cell: UnitCellParams, omega: float) -> None:
    j = cell.junctions
    l_j = josephson_inductance(j.critical_current)
    if abs(1.0 - omega**2 * l_j * j.self_capacitance) < POLE_EPS:
        raise SingularityError(plasma_frequency(j), "junction plasma")
    r = cell.resonator
    if r.c_coupling > 0 and abs(1.0 - omega**2 * r.l_res * (r.c_res + r.c_coupling)) < POLE_EPS:
        raise SingularityError(resonator_pole_frequency(r), "resonator branch")


def _pole_mask(cell: UnitCellParams, omegas: np.ndarray) -> np.ndarray:
    j = cell.junctions
    l_j = josephson_inductance(j.critical_current)
    bad = np.abs(1.0 - omegas**2 * l_j * j.self_capacitance) < POLE_EPS
    r = cell.resonator
    if r.c_coupling > 0:
        bad |= np.abs(1.0 - omegas**2 * r.l_res * (r.c_res + r.c_coupling)) < POLE_EPS
    return bad


def _t_section(z, y) -> np.ndarray:
    zy = z * y
    a = 1.0 + zy / 2.0
    b = z * (1.0 + zy / 4.0)
    z_arr = np.broadcast_arrays(a, b, y)
    out = np.empty(np.shape(z_arr[0]) + (2, 2), dtype=complex)
    out[..., 0, 0] = z_arr[0]
    out[..., 0, 1] = z_arr[1]
    out[..., 1, 0] = z_arr[2]
    out[..., 1, 1] = z_arr[0]
    return out


# ---------------------------------------------------------------------------
# Single-frequency operations
# ---------------------------------------------------------------------------

def cell_abcd(cell: UnitCellParams, omega: float) -> TwoPortABCD:
    if not omega > 0:
        raise DomainError(f"omega must be > 0, got {omega!r}")
    _check_poles(cell, omega)
    return TwoPortABCD.from_matrix(_t_section(series_impedance(cell, omega), shunt_admittance(cell, omega)))


def cascade(line: DeviceLine, omega: float) -> TwoPortABCD:
    """Ordered product of the per-cell ABCD matrices, input side first."""
    if line.cell_count < 1:
        raise DomainError("cascade needs a non-empty line")

    if line.is_uniform:
        try:
            m = cell_abcd(line.cells[0], omega).matrix
        except SingularityError as exc:
            raise exc.at_cell(0) from exc
        return TwoPortABCD.from_matrix(np.linalg.matrix_power(m, line.cell_count))

    total = np.eye(2, dtype=complex)
    for idx, cell in enumerate(line.cells):
        try:
            m = cell_abcd(cell, omega).matrix
        except SingularityError as exc:
            raise exc.at_cell(idx) from exc
        total = total @ m
    return TwoPortABCD.from_matrix(total)


def abcd_to_s(m: TwoPortABCD, z_ref: float = DEFAULT_Z_REF) -> SMatrix:
    if not z_ref > 0:
        raise DomainError(f"z_ref must be > 0, got {z_ref!r}")
    if abs(m.a + m.b / z_ref + m.c * z_ref + m.d) == 0:
        raise ConversionError("ABCD->S denominator vanishes")
    s = abcd_to_s_grid(m.matrix, z_ref)
    return SMatrix(complex(s[0, 0]), complex(s[0, 1]), complex(s[1, 0]), complex(s[1, 1]), z_ref=z_ref)


def s_to_abcd(s: SMatrix) -> TwoPortABCD:
    if s.s21 == 0:
        raise ConversionError("S->ABCD needs s21 != 0")
    return TwoPortABCD.from_matrix(s_to_abcd_grid(s.matrix, s.z_ref))


def _bloch_k(half_trace):
    k = np.arccos(np.asarray(half_trace, dtype=complex))
    return np.real(k) + 1j * np.abs(np.imag(k))


def bloch_wavenumber(cell: UnitCellParams, omega: float) -> DispersionPoint:
    """
    cos(k) = (a + d)/2 for one cell; principal branch, Re(k) in [0, pi], Im(k) >= 0.
    """
    m = cell_abcd(cell, omega)
    k = complex(_bloch_k((m.a + m.d) / 2.0))
    return DispersionPoint(omega=omega, k_per_cell=k)


def bloch_impedance(cell: UnitCellParams, omega: float) -> complex:
    """sqrt(b / c) of the symmetric cell, root with non-negative real part."""
    m = cell_abcd(cell, omega)
    z = np.sqrt(complex(m.b / m.c))
    return complex(z if z.real >= 0 else -z)


def transmission_line_abcd(z0: float, theta) -> np.ndarray:
    """Lossless line section of impedance z0 and electrical length theta (rad); scalar or array."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.cos(theta)
    out[..., 0, 1] = 1j * z0 * np.sin(theta)
    out[..., 1, 0] = 1j * np.sin(theta) / z0
    out[..., 1, 1] = np.cos(theta)
    return out


# ---------------------------------------------------------------------------
# Frequency-grid operations
# ---------------------------------------------------------------------------

def cell_abcd_grid(cell: UnitCellParams, omegas: np.ndarray):
    """(n_f, 2, 2) ABCD stack plus a boolean mask of frequencies on a pole."""
    omegas = np.asarray(omegas, dtype=float)
    bad = _pole_mask(cell, omegas)
    safe = np.where(bad, 1.0, omegas)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = _t_section(series_impedance(cell, safe), shunt_admittance(cell, safe))
    m[bad] = np.eye(2)
    return m, bad


def cascade_grid(line: DeviceLine, omegas: np.ndarray):
    omegas = np.asarray(omegas, dtype=float)
    if line.is_uniform:
        m, bad = cell_abcd_grid(line.cells[0], omegas)
        return np.linalg.matrix_power(m, line.cell_count), bad

    total = np.broadcast_to(np.eye(2, dtype=complex), omegas.shape + (2, 2)).copy()
    bad = np.zeros(omegas.shape, dtype=bool)
    for cell in line.cells:
        m, cell_bad = cell_abcd_grid(cell, omegas)
        total = total @ m
        bad |= cell_bad
    return total, bad


def abcd_to_s_grid(m: np.ndarray, z_ref: float = DEFAULT_Z_REF) -> np.ndarray:
    """Batched ABCD -> S over the leading axes; rows that blow up come back NaN/inf."""
    m = np.asarray(m, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        s = a2s(m.reshape(-1, 2, 2), z_ref)
    return s.reshape(m.shape)


def s_to_abcd_grid(s: np.ndarray, z_ref: float = DEFAULT_Z_REF) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if np.any(s[..., 1, 0] == 0):
        raise ConversionError("S->ABCD needs s21 != 0 at every frequency")
    with np.errstate(invalid="ignore", over="ignore"):
        m = s2a(s.reshape(-1, 2, 2), z_ref)
    return m.reshape(s.shape)


@dataclass(frozen=True)
class TransmissionSpectrum:
    freqs: np.ndarray  # Hz
    s: np.ndarray  # (n_f, 2, 2), NaN where gap
    gaps: np.ndarray  # bool, frequency sat on an element pole
    z_ref: float

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    def smatrices(self) -> List[Optional[SMatrix]]:
        out: List[Optional[SMatrix]] = []
        for i, gap in enumerate(self.gaps):
            if gap:
                out.append(None)
                continue
            m = self.s[i]
            out.append(SMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1], self.z_ref))
        return out

    def frame(self) -> pd.DataFrame:
        s = self.s
        return pd.DataFrame(
            {
                "freq_hz": self.freqs,
                "s11_re": s[:, 0, 0].real, "s11_im": s[:, 0, 0].imag,
                "s21_re": s[:, 1, 0].real, "s21_im": s[:, 1, 0].imag,
                "s12_re": s[:, 0, 1].real, "s12_im": s[:, 0, 1].imag,
                "s22_re": s[:, 1, 1].real, "s22_im": s[:, 1, 1].imag,
            },
            columns=SPECTRUM_COLUMNS,
        )


def check_grid(freqs: Sequence[float]) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise DomainError("frequency grid must be a non-empty 1-D sequence")
    if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
        raise DomainError("frequency grid must be strictly increasing")
    if freqs[0] <= 0:
        raise DomainError("frequencies must be > 0")
    return freqs


def transmission_spectrum(line: DeviceLine, freqs: Sequence[float], z_ref: float = DEFAULT_Z_REF) -> TransmissionSpectrum:
    """Cascade + ABCD->S at each frequency; points on an element pole are gaps (NaN), not failures."""
    freqs = check_grid(freqs)
    if not z_ref > 0:
        raise DomainError(f"z_ref must be > 0, got {z_ref!r}")
    m, bad = cascade_grid(line, 2.0 * math.pi * freqs)
    s = abcd_to_s_grid(m, z_ref)
    s[bad] = np.nan
    return TransmissionSpectrum(freqs=freqs, s=s, gaps=bad, z_ref=z_ref)


def dispersion_frame(cell: UnitCellParams, freqs: Sequence[float]) -> pd.DataFrame:
    freqs = check_grid(freqs)
    m, bad = cell_abcd_grid(cell, 2.0 * math.pi * freqs)
    k = _bloch_k((m[:, 0, 0] + m[:, 1, 1]) / 2.0)
    k[bad] = np.nan
    return pd.DataFrame({"freq_hz": freqs, "k_re": k.real, "k_im": k.imag})


def power_db(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.abs(x) ** 2)


def ripple_db(s21: np.ndarray) -> float:
    """Peak-to-peak |s21| in dB over the finite points."""
    db = power_db(s21)
    db = db[np.isfinite(db)]
    return float(db.max() - db.min()) if db.size else 0.0
