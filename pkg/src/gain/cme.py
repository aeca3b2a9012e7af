"""
Coupled-mode integration of four-wave mixing along the line.

Amplitudes are normalized to the input pump photon flux, so |a_p(0)|^2 = 1 and
the absolute flux of any mode is |a|^2 * flux_scale. Position x is in cells.
Carrier convention e^{+ikx}: the signal and idler equations carry
e^{-i dk x}, the pump equation e^{+i dk x}, with dk = k_s + k_i - 2 k_p.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from src.config import DEFAULT_ATOL, DEFAULT_RTOL
from src.device.circuit import UnitCellParams, line_impedance
from src.errors import DomainError, IntegrationError
from src.gain.fwm import (
    MismatchTerms,
    PumpSettings,
    mismatch_terms,
    photon_flux,
    pump_current_amplitude,
)

logger = logging.getLogger(__name__)

INTEGRATION_METHOD = "DOP853"


@dataclass(frozen=True)
class MixingState:
    a_p: complex
    a_s: complex
    a_i: complex
    x: float  # cells
    flux_scale: float = 1.0  # photons/s for |a|^2 = 1

    @property
    def flux_p(self) -> float:
        return abs(self.a_p) ** 2 * self.flux_scale

    @property
    def flux_s(self) -> float:
        return abs(self.a_s) ** 2 * self.flux_scale

    @property
    def flux_i(self) -> float:
        return abs(self.a_i) ** 2 * self.flux_scale


@dataclass(frozen=True)
class ThreeModeCoefficients:
    kappa: float  # conversion coupling, rad/cell
    delta_k_lin: float  # k_s + k_i - 2 k_p
    phi_p: float = 0.0  # pump self-phase per unit |a_p|^2
    phi_s: float = 0.0  # cross-phase on the signal per unit |a_p|^2
    phi_i: float = 0.0
    gamma_p: float = 0.0  # small-mode Kerr rates, used only when depleted
    gamma_s: float = 0.0
    gamma_i: float = 0.0

    @property
    def total_mismatch(self) -> float:
        return self.delta_k_lin + self.phi_s + self.phi_i - 2.0 * self.phi_p

    @classmethod
    def from_terms(cls, terms: MismatchTerms) -> "ThreeModeCoefficients":
        return cls(
            kappa=terms.kappa,
            delta_k_lin=terms.linear,
            phi_p=terms.alpha_p,
            phi_s=2.0 * terms.alpha_s,
            phi_i=2.0 * terms.alpha_i,
            gamma_p=terms.alpha_p,
            gamma_s=terms.alpha_s / 2.0,
            gamma_i=terms.alpha_i / 2.0,
        )


@dataclass(frozen=True)
class ThreeModeSolution:
    x: np.ndarray
    a_p: np.ndarray
    a_s: np.ndarray
    a_i: np.ndarray
    flux_scale: float = 1.0

    @property
    def final(self) -> MixingState:
        return MixingState(
            a_p=complex(self.a_p[-1]),
            a_s=complex(self.a_s[-1]),
            a_i=complex(self.a_i[-1]),
            x=float(self.x[-1]),
            flux_scale=self.flux_scale,
        )

    @property
    def signal_gain(self) -> float:
        return abs(self.a_s[-1]) ** 2 / abs(self.a_s[0]) ** 2


def _undepleted_rhs(c: ThreeModeCoefficients):
    # pump follows a_p(x) = a_p0 exp(i phi_p |a_p0|^2 x) and is not integrated
    def rhs(x, y, a_p0):
        a_s, a_i = y
        p0 = abs(a_p0) ** 2
        a_p = a_p0 * np.exp(1j * c.phi_p * p0 * x)
        drive = 1j * c.kappa * a_p**2 * np.exp(-1j * c.delta_k_lin * x)
        return [
            1j * c.phi_s * p0 * a_s + drive * np.conj(a_i),
            1j * c.phi_i * p0 * a_i + drive * np.conj(a_s),
        ]
    return rhs


def _depleted_rhs(c: ThreeModeCoefficients):
    def rhs(x, y):
        a_p, a_s, a_i = y
        pp, ps, pi = abs(a_p) ** 2, abs(a_s) ** 2, abs(a_i) ** 2
        fwd = np.exp(-1j * c.delta_k_lin * x)
        return [
            1j * (c.phi_p * pp + 4.0 * c.gamma_p * (ps + pi)) * a_p
            + 2j * c.kappa * a_s * a_i * np.conj(a_p) * np.conj(fwd),
            1j * (c.phi_s * pp + c.gamma_s * ps + 4.0 * c.gamma_s * pi) * a_s
            + 1j * c.kappa * a_p**2 * np.conj(a_i) * fwd,
            1j * (c.phi_i * pp + c.gamma_i * pi + 4.0 * c.gamma_i * ps) * a_i
            + 1j * c.kappa * a_p**2 * np.conj(a_s) * fwd,
        ]
    return rhs


def _integrate(fun, y0, n_cells: int, rtol: float, atol: float, args=()):
    sol = solve_ivp(
        fun,
        (0.0, float(n_cells)),
        np.asarray(y0, dtype=complex),
        method=INTEGRATION_METHOD,
        rtol=rtol,
        atol=atol,
        args=args,
    )
    if not sol.success:
        raise IntegrationError(f"{INTEGRATION_METHOD} failed at x={sol.t[-1]:.6g} cells: {sol.message}")
    return sol


def solve_three_mode(
    coeffs: ThreeModeCoefficients,
    n_cells: int,
    a_s0: complex = 1.0 + 0j,
    a_i0: complex = 0j,
    a_p0: complex = 1.0 + 0j,
    depleted: bool = False,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    flux_scale: float = 1.0,
) -> ThreeModeSolution:
    if n_cells < 1:
        raise DomainError(f"n_cells must be >= 1, got {n_cells}")

    if depleted:
        sol = _integrate(_depleted_rhs(coeffs), [a_p0, a_s0, a_i0], n_cells, rtol, atol)
        a_p, a_s, a_i = sol.y
    else:
        sol = _integrate(_undepleted_rhs(coeffs), [a_s0, a_i0], n_cells, rtol, atol, args=(complex(a_p0),))
        a_s, a_i = sol.y
        a_p = a_p0 * np.exp(1j * coeffs.phi_p * abs(a_p0) ** 2 * sol.t)

    return ThreeModeSolution(x=sol.t, a_p=np.asarray(a_p), a_s=a_s, a_i=a_i, flux_scale=flux_scale)


def integrate_cme(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    omega_s: float,
    depleted: bool = False,
    signal_power: Optional[float] = None,
    z_line: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> MixingState:
    """
    Output state of the three-mode system for one signal frequency.

    signal_power (dBm) sets a_s(0) relative to the pump; without it the signal
    starts at unit amplitude, which is only meaningful undepleted (the
    equations are then linear in the signal).
    """
    if depleted and signal_power is None:
        raise DomainError("depleted integration needs signal_power (dBm)")

    z = line_impedance(cell) if z_line is None else z_line
    i_pump = pump_current_amplitude(pump, z)
    coeffs = ThreeModeCoefficients.from_terms(mismatch_terms(cell, pump, omega_s, i_pump))

    flux_p = photon_flux(pump.input_power, pump.frequency)
    if signal_power is None:
        a_p0, a_s0, scale = 1.0 + 0j, 1.0 + 0j, (flux_p if flux_p > 0 else 1.0)
    else:
        flux_s = photon_flux(signal_power, omega_s / (2.0 * math.pi))
        if flux_p > 0:
            a_p0, a_s0, scale = 1.0 + 0j, complex(math.sqrt(flux_s / flux_p)), flux_p
        else:
            a_p0, a_s0, scale = 0j, 1.0 + 0j, flux_s

    sol = solve_three_mode(
        coeffs, n_cells, a_s0=a_s0, a_p0=a_p0, depleted=depleted, rtol=rtol, atol=atol, flux_scale=scale
    )
    return sol.final


# ---------------------------------------------------------------------------
# Arbitrary mode sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixingMode:
    label: str
    frequency: float  # Hz
    k: float  # Re of the Bloch wavenumber, rad/cell


class MultiModeSystem:
    """
    Energy-conserving four-wave mixing among an explicit set of modes.

    Every ordered triple (a, b, c) with f_a + f_b - f_c = f_m feeds mode m with
    i g a_a a_b conj(a_c) exp(-i (k_m + k_c - k_a - k_b) x), where
    g = nonlinearity * (k_a k_b k_c k_m)^(1/4). Triples that only reshuffle
    the same pair ({a, b} == {c, m}) are Kerr terms and are handled as
    self-phase gamma_m |a_m|^2 plus cross-phase 4 gamma_m |a_j|^2,
    gamma_m = nonlinearity * k_m.

    For pump/signal/idler this reduces to the depleted three-mode equations
    (up to the geometric-mean coupling).
    """

    def __init__(self, modes: Sequence[MixingMode], nonlinearity: float, freq_tol: Optional[float] = None):
        if len(modes) < 1:
            raise DomainError("MultiModeSystem needs at least one mode")
        labels = [m.label for m in modes]
        if len(set(labels)) != len(labels):
            raise DomainError(f"mode labels must be unique, got {labels}")

        self.modes: Tuple[MixingMode, ...] = tuple(modes)
        self.nonlinearity = float(nonlinearity)
        freqs = np.array([m.frequency for m in modes], dtype=float)
        self.freqs = freqs
        self.k = np.array([m.k for m in modes], dtype=float)
        tol = 1e-9 * float(freqs.max()) if freq_tol is None else freq_tol
        if np.any(np.abs(np.subtract.outer(freqs, freqs))[~np.eye(len(modes), dtype=bool)] <= tol):
            raise DomainError("mode frequencies must be distinct")

        src_a: List[int] = []
        src_b: List[int] = []
        src_c: List[int] = []
        dst: List[int] = []
        n = len(modes)
        for a, b, c in itertools.product(range(n), repeat=3):
            target = freqs[a] + freqs[b] - freqs[c]
            hits = np.flatnonzero(np.abs(freqs - target) <= tol)
            for m in hits:
                if sorted((a, b)) == sorted((c, int(m))):
                    continue
                src_a.append(a)
                src_b.append(b)
                src_c.append(c)
                dst.append(int(m))

        self._a = np.array(src_a, dtype=int)
        self._b = np.array(src_b, dtype=int)
        self._c = np.array(src_c, dtype=int)
        self._m = np.array(dst, dtype=int)
        k = self.k
        self._dk = k[self._m] + k[self._c] - k[self._a] - k[self._b]
        self._g = self.nonlinearity * np.abs(k[self._a] * k[self._b] * k[self._c] * k[self._m]) ** 0.25
        self._gamma = self.nonlinearity * k
        logger.debug("mode set of %d modes, %d mixing terms", n, len(dst))

    @property
    def labels(self) -> List[str]:
        return [m.label for m in self.modes]

    @property
    def n_terms(self) -> int:
        return int(self._m.size)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"Mode '{label}' not in system. Available modes: {self.labels}") from None

    def rhs(self, x: float, a: np.ndarray) -> np.ndarray:
        power = np.abs(a) ** 2
        total = power.sum()
        out = 1j * self._gamma * (power + 4.0 * (total - power)) * a
        if self._m.size:
            terms = 1j * self._g * a[self._a] * a[self._b] * np.conj(a[self._c]) * np.exp(-1j * self._dk * x)
            np.add.at(out, self._m, terms)
        return out

    def integrate(
        self,
        a0: Sequence[complex],
        n_cells: int,
        rtol: float = DEFAULT_RTOL,
        atol: float = DEFAULT_ATOL,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(x, amplitudes) with amplitudes shaped (n_modes, n_points)."""
        a0 = np.asarray(a0, dtype=complex)
        if a0.shape != (len(self.modes),):
            raise DomainError(f"expected {len(self.modes)} initial amplitudes, got shape {a0.shape}")
        sol = _integrate(self.rhs, a0, n_cells, rtol, atol)
        return sol.t, sol.y

    @staticmethod
    def photon_number(a: np.ndarray) -> np.ndarray:
        """Sum of |a|^2 over modes (axis 0)."""
        return np.sum(np.abs(a) ** 2, axis=0)

    def energy_flux(self, a: np.ndarray) -> np.ndarray:
        """Sum of f_m |a_m|^2 over modes, in Hz times normalized flux."""
        a = np.asarray(a)
        if a.ndim == 1:
            a = a[:, None]
        return np.sum(self.freqs[:, None] * np.abs(a) ** 2, axis=0)

    def as_dict(self, a: np.ndarray) -> Dict[str, complex]:
        return {m.label: complex(v) for m, v in zip(self.modes, a)}
