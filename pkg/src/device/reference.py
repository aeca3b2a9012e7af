"""
Reference device: component values solved from the published device targets.

Only Z = 58.5 ohm, 256 cells of 8 junctions, the 6.688 GHz pump, ~20 dB peak gain
at -73 dBm and a narrow stopband just above the pump are known. The procedure:

  1. line: I_c fixes L_J; c_ground = L_cell / Z^2; C_J from the plasma-frequency
     target.
  2. resonator: the loaded pole 1/(2 pi sqrt(l_res (c_res + c_c))) sits at
     pump + stopband_offset; c_res = ratio * c_c; the pole strength
     c_eff = c_c^2 / (c_res + c_c) is solved so the total mismatch vanishes at
     f_pump - match_detuning.
  3. gain: I_c is solved so kappa * N = arccosh(sqrt(G_peak)), i.e. the
     phase-matched point reaches the peak-gain target.

Steps 2 and 3 depend on each other through k_p and are iterated to a fixed point.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from scipy.optimize import brentq

from src.config import SEEDS
from src.device.circuit import (
    DeviceLine,
    JunctionParams,
    ResonatorParams,
    UnitCellParams,
    josephson_inductance,
)
from src.errors import ConfigurationError, DomainError
from src.gain.fwm import PumpSettings, mismatch_terms, pump_current_amplitude

logger = logging.getLogger(__name__)

MAX_FIXED_POINT_ITERS = 30
FIXED_POINT_RTOL = 1e-10


@dataclass(frozen=True)
class CalibrationTargets:
    line_impedance: float = 58.5  # ohm
    cell_count: int = 256
    junctions_per_cell: int = 8
    pump_frequency: float = 6.688e9  # Hz
    pump_power_dbm: float = -73.0
    peak_gain_db: float = 20.0
    stopband_offset: float = 200e6  # Hz above the pump
    match_detuning: float = 1.0e9  # Hz below the pump where the mismatch is zeroed
    plasma_frequency: float = 50e9  # Hz
    tank_to_coupling_ratio: float = 1.0  # c_res / c_coupling

    def __post_init__(self) -> None:
        for name in ("line_impedance", "pump_frequency", "peak_gain_db", "stopband_offset",
                     "match_detuning", "plasma_frequency", "tank_to_coupling_ratio"):
            if not getattr(self, name) > 0:
                raise DomainError(f"calibration target {name} must be > 0, got {getattr(self, name)!r}")
        if self.cell_count < 1 or self.junctions_per_cell < 1:
            raise DomainError("cell_count and junctions_per_cell must be >= 1")
        if self.match_detuning >= self.pump_frequency:
            raise DomainError("match_detuning must be below the pump frequency")

    @property
    def stopband_centre(self) -> float:
        return self.pump_frequency + self.stopband_offset

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "CalibrationTargets":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigurationError(f"Unknown calibration target keys {unknown}. Allowed: {sorted(known)}")
        return cls(**doc)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_targets(path: Path) -> CalibrationTargets:
    if not path.exists():
        raise FileNotFoundError(f"Reference device JSON not found: {path}")

    text = path.read_text(encoding="utf-8-sig").strip()
    if not text:
        raise ValueError(f"{path} is empty. Expected a JSON object of calibration targets.")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON in {path}") from exc
    return CalibrationTargets.from_dict(doc.get("targets", doc))


def _build_cell(t: CalibrationTargets, ic: float, c_eff: float) -> UnitCellParams:
    l_j = josephson_inductance(ic)
    c_ground = t.junctions_per_cell * l_j / t.line_impedance**2
    c_j = 1.0 / ((2.0 * math.pi * t.plasma_frequency) ** 2 * l_j)

    c_c = c_eff * (1.0 + t.tank_to_coupling_ratio)
    c_res = t.tank_to_coupling_ratio * c_c
    omega_r = 2.0 * math.pi * t.stopband_centre
    l_res = 1.0 / (omega_r**2 * (c_res + c_c))

    return UnitCellParams(
        junctions=JunctionParams(critical_current=ic, self_capacitance=c_j, count_per_cell=t.junctions_per_cell),
        resonator=ResonatorParams(c_res=c_res, l_res=l_res, c_coupling=c_c),
        c_ground=c_ground,
    )


def _bracket_root(fn, lo: float, hi: float, grow: float, limit: int = 12) -> float:
    f_lo, f_hi = fn(lo), fn(hi)
    for _ in range(limit):
        if f_lo * f_hi < 0:
            return brentq(fn, lo, hi, xtol=lo * 1e-12, rtol=1e-12, maxiter=200)
        lo, hi = lo / grow, hi * grow
        f_lo, f_hi = fn(lo), fn(hi)
    raise ConfigurationError(f"calibration could not bracket a root in [{lo:.3g}, {hi:.3g}]")


def calibrate_reference_cell(targets: Optional[CalibrationTargets] = None) -> UnitCellParams:
    t = targets or CalibrationTargets()
    pump = PumpSettings(frequency=t.pump_frequency, input_power=t.pump_power_dbm)
    i_pump = pump_current_amplitude(pump, t.line_impedance)
    omega_match = 2.0 * math.pi * (t.pump_frequency - t.match_detuning)
    kappa_n = math.acosh(10.0 ** (t.peak_gain_db / 20.0))

    def mismatch_at(ic: float, c_eff: float) -> float:
        return mismatch_terms(_build_cell(t, ic, c_eff), pump, omega_match, i_pump).total

    def gain_residual(ic: float, c_eff: float) -> float:
        return mismatch_terms(_build_cell(t, ic, c_eff), pump, omega_match, i_pump).kappa * t.cell_count - kappa_n

    ic = 4.0 * i_pump
    c_eff = 1e-3 * _build_cell(t, ic, 1e-18).c_ground
    for it in range(MAX_FIXED_POINT_ITERS):
        ic_new = _bracket_root(lambda x: gain_residual(x, c_eff), 0.5 * ic, 2.0 * ic, grow=2.0)
        c_g = _build_cell(t, ic_new, 1e-18).c_ground
        c_eff = _bracket_root(lambda x: mismatch_at(ic_new, x), 1e-4 * c_g, 5e-2 * c_g, grow=2.0)
        converged = abs(ic_new - ic) <= FIXED_POINT_RTOL * ic
        ic = ic_new
        if converged:
            break
    else:
        logger.warning("reference calibration stopped after %d iterations without converging", MAX_FIXED_POINT_ITERS)

    cell = _build_cell(t, ic, c_eff)
    logger.info(
        "reference cell: I_c=%.4g A, c_ground=%.4g F, c_res=%.4g F, l_res=%.4g H, c_c=%.4g F (%d iterations)",
        ic, cell.c_ground, cell.resonator.c_res, cell.resonator.l_res, cell.resonator.c_coupling, it + 1,
    )
    return cell


@lru_cache(maxsize=4)
def reference_targets(targets_path: Optional[Path] = None) -> CalibrationTargets:
    path = targets_path or SEEDS.reference_device_json
    if not path.exists():
        logger.warning("%s not found, using built-in calibration targets", path)
        return CalibrationTargets()
    return load_targets(path)


@lru_cache(maxsize=4)
def reference_cell(targets_path: Optional[Path] = None) -> UnitCellParams:
    return calibrate_reference_cell(reference_targets(targets_path))


def reference_line(n_cells: Optional[int] = None, targets_path: Optional[Path] = None) -> DeviceLine:
    cell = reference_cell(targets_path)
    return DeviceLine.uniform(cell, n_cells or reference_targets(targets_path).cell_count)
