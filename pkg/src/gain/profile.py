"""Small-signal gain profiles over a signal grid and the band metrics read off them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.config import DEFAULT_ATOL, DEFAULT_RTOL, STOPBAND_IMAG_K
from src.device.circuit import UnitCellParams, line_impedance
from src.errors import DomainError, IntegrationError, SingularityError
from src.gain.cme import ThreeModeCoefficients, solve_three_mode
from src.gain.fwm import PumpSettings, wavenumber_parts, mismatch_terms, pump_current_amplitude

logger = logging.getLogger(__name__)

GAIN_COLUMNS = ["freq_hz", "gain_db", "phase_rad", "stopband_flag"]


@dataclass(frozen=True)
class GainCurve:
    signal_freqs: np.ndarray  # Hz
    gain_db: np.ndarray  # NaN where the point failed
    phase: np.ndarray  # rad, arg(a_s(N) / a_s(0))
    pump: PumpSettings
    stopband_flag: np.ndarray  # bool

    @property
    def idler_freqs(self) -> np.ndarray:
        return 2.0 * self.pump.frequency - self.signal_freqs

    @property
    def gaps(self) -> np.ndarray:
        return ~np.isfinite(self.gain_db)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "freq_hz": self.signal_freqs,
                "gain_db": self.gain_db,
                "phase_rad": self.phase,
                "stopband_flag": self.stopband_flag.astype(int),
            },
            columns=GAIN_COLUMNS,
        )


def _profile_point(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    f_s: float,
    i_pump: float,
    rtol: float,
    atol: float,
) -> Tuple[float, float, bool]:
    omega_s = 2.0 * math.pi * f_s
    try:
        terms = mismatch_terms(cell, pump, omega_s, i_pump)
    except (DomainError, SingularityError) as exc:
        logger.debug("gain point %.6g Hz skipped: %s", f_s, exc)
        return math.nan, math.nan, False

    coeffs = ThreeModeCoefficients.from_terms(terms)
    try:
        sol = solve_three_mode(coeffs, n_cells, a_s0=1.0 + 0j, depleted=False, rtol=rtol, atol=atol)
    except IntegrationError as exc:
        logger.warning("gain point %.6g Hz failed: %s", f_s, exc)
        return math.nan, math.nan, terms.in_stopband

    a_s = sol.final.a_s
    return 10.0 * math.log10(abs(a_s) ** 2), float(np.angle(a_s)), terms.in_stopband


def gain_profile(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    signal_freqs: Sequence[float],
    z_line: Optional[float] = None,
    workers: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GainCurve:
    """
    Small-signal (undepleted) gain at each signal frequency.

    Points whose signal or idler sits in the stopband are computed with Re(k)
    and flagged. Points that cannot be evaluated (idler at or below 0 Hz,
    element pole, integrator failure) come back as NaN gaps.
    """
    freqs = np.asarray(signal_freqs, dtype=float)
    z = line_impedance(cell) if z_line is None else z_line
    i_pump = pump_current_amplitude(pump, z)

    _, im_kp = wavenumber_parts(cell, pump.omega)
    if im_kp > STOPBAND_IMAG_K:
        logger.warning("pump at %.6g Hz sits in the stopband (Im k = %.3g)", pump.frequency, im_kp)

    rows = Parallel(n_jobs=workers)(
        delayed(_profile_point)(cell, n_cells, pump, float(f), i_pump, rtol, atol) for f in freqs
    )
    return GainCurve(
        signal_freqs=freqs,
        gain_db=np.array([r[0] for r in rows], dtype=float),
        phase=np.array([r[1] for r in rows], dtype=float),
        pump=pump,
        stopband_flag=np.array([r[2] for r in rows], dtype=bool),
    )


def flagged_window(curve: GainCurve) -> Optional[Tuple[float, float]]:
    """(lowest, highest) flagged signal frequency, or None when nothing is flagged."""
    f = curve.signal_freqs[curve.stopband_flag]
    if f.size == 0:
        return None
    return float(f.min()), float(f.max())


def gain_gap_window(curve: GainCurve, threshold_db: float = 10.0) -> Optional[Tuple[float, float]]:
    """
    Window around the pump where the gain is lost: walk outward from the grid
    point nearest the pump while points are flagged, failed, or below
    threshold_db. Returns the first usable frequency on each side, or None if
    one side never recovers on this grid.
    """
    f = curve.signal_freqs
    if f.size == 0:
        return None
    lost = curve.stopband_flag | curve.gaps | (np.nan_to_num(curve.gain_db, nan=-np.inf) < threshold_db)
    centre = int(np.argmin(np.abs(f - curve.pump.frequency)))

    lo = centre
    while lo >= 0 and lost[lo]:
        lo -= 1
    hi = centre
    while hi < f.size and lost[hi]:
        hi += 1
    if lo < 0 or hi >= f.size:
        return None
    return float(f[lo]), float(f[hi])


def contiguous_band_above(
    curve: GainCurve,
    threshold_db: float = 10.0,
    exclude: Optional[Tuple[float, float]] = None,
) -> float:
    """
    Width (Hz) of the longest run of unflagged points with gain >= threshold_db.

    With exclude=(lo, hi) the points strictly inside that window bridge the run
    and the window width is not counted, so a band interrupted only by the
    excluded window around the pump is measured as one band.
    """
    f = curve.signal_freqs
    if f.size < 2:
        return 0.0
    ok = ~curve.stopband_flag & (np.nan_to_num(curve.gain_db, nan=-np.inf) >= threshold_db)
    inside = np.zeros_like(ok)
    if exclude is not None:
        inside = (f > exclude[0]) & (f < exclude[1])
    usable = ok | inside

    best = 0.0
    start = None
    for idx in range(f.size + 1):
        if idx < f.size and usable[idx]:
            if start is None:
                start = idx
            continue
        if start is not None:
            stop = idx - 1
            width = f[stop] - f[start]
            if exclude is not None and inside[start:stop + 1].any():
                width -= min(exclude[1], f[stop]) - max(exclude[0], f[start])
            best = max(best, float(width))
            start = None
    return best
