"""
Saturation of the amplifier: gain and output phase versus input power from
the depleted-pump solver, plus the 1 dB compression and phase-distortion
points read off those curves.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.config import (
    DEFAULT_ATOL,
    DEFAULT_G_SYS_DB,
    DEFAULT_PHASE_THRESHOLD_DEG,
    DEFAULT_RTOL,
    DEFAULT_SYSTEM_NOISE_QUANTA,
    MIN_PUMP_TO_SIGNAL_DB,
)
from src.device.circuit import UnitCellParams
from src.errors import DomainError, IntegrationError, SingularityError
from src.gain.cme import integrate_cme
from src.gain.fwm import PumpSettings, photon_flux
from src.noise.added_noise import snri, standard_quantum_limit, synthesize_chain_spectra
from src.utils.units import db_to_ratio

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["pin_dbm", "gain_db", "phase_deg"]
PUMP_SWEEP_COLUMNS = ["pump_dbm", "gain_db", "snri_db"]
MIN_INPUT_SPAN_DB = 40.0


@dataclass(frozen=True)
class PowerCurve:
    input_powers: np.ndarray  # dBm, ascending
    gain_db: np.ndarray  # NaN where the point failed
    phase_deg: np.ndarray  # arg(a_s(N) / a_s(0)), unwrapped along power
    signal_freq: float
    pump: PumpSettings

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"pin_dbm": self.input_powers, "gain_db": self.gain_db, "phase_deg": self.phase_deg},
            columns=CURVE_COLUMNS,
        )


@dataclass(frozen=True)
class CompressionResult:
    p_1db: Optional[float]  # dBm, None: not reached on the grid
    p_5deg: Optional[float]
    small_signal_gain_db: float
    signal_freq: float = math.nan

    def as_dict(self) -> dict:
        return {
            "freq_hz": self.signal_freq,
            "p_1db": self.p_1db,
            "p_5deg": self.p_5deg,
            "small_signal_gain": self.small_signal_gain_db,
        }


def _sorted_finite(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError(f"curve axes differ in shape: {x.shape} vs {y.shape}")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep]


def _first_crossing(x: np.ndarray, y: np.ndarray, level: float) -> Optional[float]:
    """First x where y rises through level, linear in (x, y)."""
    hits = np.flatnonzero(y >= level)
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(x[0])
    x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
    if y1 == y0:
        return float(x1)
    return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0))


def compression_point_1db(
    input_powers: Sequence[float],
    gain_db: Sequence[float],
    small_signal_gain_db: Optional[float] = None,
) -> Optional[float]:
    """
    Input power where the gain first drops 1 dB below the small-signal gain
    (the lowest-power point unless given). None when the curve never gets there.
    """
    p, g = _sorted_finite(input_powers, gain_db)
    if p.size < 2:
        raise DomainError("compression curve needs at least 2 finite points")
    g0 = float(g[0]) if small_signal_gain_db is None else float(small_signal_gain_db)
    return _first_crossing(p, g0 - g, 1.0)


def phase_distortion_point(
    input_powers: Sequence[float],
    phase_deg: Sequence[float],
    threshold_deg: float = DEFAULT_PHASE_THRESHOLD_DEG,
) -> Optional[float]:
    """Input power where |phase - phase(lowest power)| first reaches threshold_deg."""
    if not threshold_deg > 0:
        raise DomainError(f"threshold_deg must be > 0, got {threshold_deg!r}")
    p, ph = _sorted_finite(input_powers, phase_deg)
    if p.size < 2:
        raise DomainError("phase curve needs at least 2 finite points")
    return _first_crossing(p, np.abs(ph - ph[0]), threshold_deg)


def compression_result(curve: PowerCurve, threshold_deg: float = DEFAULT_PHASE_THRESHOLD_DEG) -> CompressionResult:
    p_1db = compression_point_1db(curve.input_powers, curve.gain_db)
    p_5deg = phase_distortion_point(curve.input_powers, curve.phase_deg, threshold_deg)
    for name, value in (("p_1db", p_1db), ("p_5deg", p_5deg)):
        if value is not None and value >= curve.pump.input_power:
            logger.warning("[WARN] %s = %.2f dBm is not below the pump (%.2f dBm)", name, value, curve.pump.input_power)
    finite = np.isfinite(curve.gain_db)
    g0 = float(curve.gain_db[finite][0]) if finite.any() else math.nan
    return CompressionResult(p_1db=p_1db, p_5deg=p_5deg, small_signal_gain_db=g0, signal_freq=curve.signal_freq)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _depleted_point(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    f_s: float,
    p_in: float,
    z_line: Optional[float],
    rtol: float,
    atol: float,
) -> Tuple[float, float]:
    omega_s = 2.0 * math.pi * f_s
    try:
        state = integrate_cme(
            cell, n_cells, pump, omega_s, depleted=True, signal_power=p_in, z_line=z_line, rtol=rtol, atol=atol
        )
    except (DomainError, SingularityError, IntegrationError) as exc:
        logger.warning("power point (f=%.6g Hz, P=%.2f dBm, pump %.2f dBm) failed: %s", f_s, p_in, pump.input_power, exc)
        return math.nan, math.nan

    # a_s(0) is real and positive, so the output phase is arg(a_s)
    gain = state.flux_s / photon_flux(p_in, f_s)
    return 10.0 * math.log10(gain), float(np.angle(state.a_s))


def gain_vs_input_power(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    signal_freq: float,
    signal_powers: Sequence[float],
    z_line: Optional[float] = None,
    workers: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PowerCurve:
    p = np.sort(np.asarray(signal_powers, dtype=float))
    if p.size < 2 or not np.all(np.isfinite(p)):
        raise DomainError("signal_powers needs at least 2 finite dBm values")
    span = float(p[-1] - p[0])
    if span < MIN_INPUT_SPAN_DB:
        raise DomainError(f"signal power grid spans {span:.1f} dB; need >= {MIN_INPUT_SPAN_DB:.0f} dB to reach saturation")

    rows = Parallel(n_jobs=workers)(
        delayed(_depleted_point)(cell, n_cells, pump, signal_freq, float(pi), z_line, rtol, atol) for pi in p
    )
    gain = np.array([r[0] for r in rows], dtype=float)
    phase = np.array([r[1] for r in rows], dtype=float)
    ok = np.isfinite(phase)
    if ok.any():
        phase[ok] = np.unwrap(phase[ok])
    return PowerCurve(input_powers=p, gain_db=gain, phase_deg=np.degrees(phase), signal_freq=float(signal_freq), pump=pump)


def pump_sweep(
    cell: UnitCellParams,
    n_cells: int,
    pump_freq: float,
    pump_powers: Sequence[float],
    signal_freq: float,
    signal_power: float,
    system_noise_quanta: float = DEFAULT_SYSTEM_NOISE_QUANTA,
    g_sys_db: float = DEFAULT_G_SYS_DB,
    z_line: Optional[float] = None,
    workers: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> pd.DataFrame:
    """
    Small-signal gain and SNRi versus pump power. SNRi assumes a
    quantum-limited TWPA (n_add = SQL(G)) in front of a chain with
    system_noise_quanta of input-referred noise.
    """
    powers = np.asarray(pump_powers, dtype=float)
    if powers.size == 0:
        raise DomainError("pump_powers is empty")
    finite = powers[np.isfinite(powers)]
    if finite.size and signal_power > float(finite.min()) - MIN_PUMP_TO_SIGNAL_DB:
        raise DomainError(
            f"signal_power {signal_power:.1f} dBm must sit >= {MIN_PUMP_TO_SIGNAL_DB:.0f} dB below every pump power "
            f"(lowest pump {finite.min():.1f} dBm)"
        )

    pumps = [PumpSettings(frequency=pump_freq, input_power=float(pp)) for pp in powers]
    rows = Parallel(n_jobs=workers)(
        delayed(_depleted_point)(cell, n_cells, pump, signal_freq, signal_power, z_line, rtol, atol) for pump in pumps
    )
    gain_db = np.array([r[0] for r in rows], dtype=float)

    g = db_to_ratio(gain_db)
    usable = np.isfinite(g) & (g >= 1.0)
    snri_db = np.full(g.shape, np.nan)
    if usable.any():
        g_u = g[usable]
        spectra, gains = synthesize_chain_spectra(
            np.full(g_u.shape, float(signal_freq)),
            g_u,
            standard_quantum_limit(g_u),
            system_noise_quanta,
            db_to_ratio(g_sys_db),
        )
        snri_db[usable] = snri(spectra, gains)
    if (~usable & np.isfinite(g)).any():
        logger.info("SNRi skipped at %d pump powers with gain below 0 dB", int((~usable & np.isfinite(g)).sum()))

    return pd.DataFrame({"pump_dbm": powers, "gain_db": gain_db, "snri_db": snri_db}, columns=PUMP_SWEEP_COLUMNS)


def optimal_pump_powers(sweep: pd.DataFrame) -> Dict[str, float]:
    """Pump powers where gain and SNRi peak."""
    out: Dict[str, float] = {}
    for col in ("gain_db", "snri_db"):
        s = sweep[col]
        out[col] = float(sweep.loc[s.idxmax(), "pump_dbm"]) if s.notna().any() else math.nan
    return out


def power_handling_summary(
    results: Sequence[CompressionResult],
    ip3: Optional[Dict[float, Optional[float]]] = None,
) -> List[dict]:
    """One record per signal frequency: p_1db, p_5deg, ip3 and small-signal gain."""
    ip3 = ip3 or {}
    out = []
    for r in sorted(results, key=lambda r: r.signal_freq):
        row = r.as_dict()
        row["ip3"] = ip3.get(r.signal_freq)
        out.append(row)
    return out


def band_average(values: Sequence[Optional[float]]) -> Optional[float]:
    """Mean of the reached points; None when none were reached."""
    v = [x for x in values if x is not None and math.isfinite(x)]
    return float(np.mean(v)) if v else None