"""
Device model of one TWPA unit cell and of the cascaded line.

A cell holds `count_per_cell` Josephson junctions in series (each an L_J || C_J
element), a capacitance to ground, and a phase-matching resonator: a coupling
capacitor in series with a parallel l_res || c_res tank to ground.
All values are SI.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd
from scipy import constants as sc

from src.config import (
    DEFAULT_GAP_ENERGY_EV,
    JUNCTIONS_PER_CELL,
    MAX_DISORDER_REJECTIONS,
    MAX_DISORDER_SIGMA,
    NOMINAL_CELL_COUNT,
)
from src.errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    flux_quantum: float = sc.physical_constants["mag. flux quantum"][0]  # Wb
    reduced_planck: float = sc.hbar  # J s
    electron_charge: float = sc.e  # C
    boltzmann: float = sc.k  # J/K

    @property
    def reduced_flux_quantum(self) -> float:
        return self.flux_quantum / (2.0 * math.pi)


CONSTANTS = PhysicalConstants()


def _require_positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")


def _require_non_negative(name: str, value: float) -> None:
    if not (value >= 0) or not math.isfinite(value):
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class JunctionParams:
    critical_current: float  # A
    self_capacitance: float  # F
    count_per_cell: int = JUNCTIONS_PER_CELL

    def __post_init__(self) -> None:
        _require_positive("critical_current", self.critical_current)
        _require_non_negative("self_capacitance", self.self_capacitance)
        if int(self.count_per_cell) != self.count_per_cell or self.count_per_cell < 1:
            raise DomainError(f"count_per_cell must be a positive integer, got {self.count_per_cell!r}")


@dataclass(frozen=True)
class ResonatorParams:
    c_res: float  # F
    l_res: float  # H
    c_coupling: float  # F

    def __post_init__(self) -> None:
        _require_non_negative("c_res", self.c_res)
        _require_non_negative("l_res", self.l_res)
        _require_non_negative("c_coupling", self.c_coupling)


@dataclass(frozen=True)
class UnitCellParams:
    junctions: JunctionParams
    resonator: ResonatorParams
    c_ground: float  # F
    series_resistance: float = 0.0  # ohm per cell, optional loss for sensitivity studies

    def __post_init__(self) -> None:
        _require_positive("c_ground", self.c_ground)
        _require_non_negative("series_resistance", self.series_resistance)


@dataclass(frozen=True)
class DeviceLine:
    cells: Tuple[UnitCellParams, ...]
    cell_count: int

    def __post_init__(self) -> None:
        if self.cell_count < 1:
            raise DomainError(f"cell_count must be >= 1, got {self.cell_count}")
        if len(self.cells) != self.cell_count:
            raise DomainError(f"DeviceLine has {len(self.cells)} cells but cell_count={self.cell_count}")

    @classmethod
    def uniform(cls, cell: UnitCellParams, n_cells: int = NOMINAL_CELL_COUNT) -> "DeviceLine":
        return cls(cells=(cell,) * n_cells, cell_count=n_cells)

    @property
    def is_uniform(self) -> bool:
        first = self.cells[0]
        return all(c == first for c in self.cells)


class DisorderTarget(str, Enum):
    RESONATOR_C_RES = "resonator_c_res"
    JUNCTION_CRITICAL_CURRENT = "junction_critical_current"
    C_GROUND = "c_ground"


@dataclass(frozen=True)
class DisorderSpec:
    sigma_rel: float
    target: DisorderTarget = DisorderTarget.RESONATOR_C_RES
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.sigma_rel < MAX_DISORDER_SIGMA):
            raise DomainError(f"sigma_rel must lie in [0, {MAX_DISORDER_SIGMA}), got {self.sigma_rel!r}")
        object.__setattr__(self, "target", DisorderTarget(self.target))
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def josephson_inductance(critical_current: float) -> float:
    """L_J = Phi0 / (2 pi I_c), in henry."""
    _require_positive("critical_current", critical_current)
    return CONSTANTS.reduced_flux_quantum / critical_current


def ic_from_normal_resistance(r_n: float, gap_energy: float = DEFAULT_GAP_ENERGY_EV) -> float:
    """
    Zero-temperature Ambegaokar-Baratoff: I_c = pi * Delta / (2 e R_n).
    gap_energy is given in eV.
    """
    _require_positive("r_n", r_n)
    _require_positive("gap_energy", gap_energy)
    delta_joule = gap_energy * CONSTANTS.electron_charge
    return math.pi * delta_joule / (2.0 * CONSTANTS.electron_charge * r_n)


def normal_resistance_map(
    resistance_map: pd.DataFrame,
    gap_energy: float = DEFAULT_GAP_ENERGY_EV,
) -> pd.DataFrame:
    """
    Convert a room-temperature resistance map of junction test arrays into
    single-junction critical currents and inductances.

    Expects columns `array_resistance_ohm` and `junctions_in_array`
    (series arrays, so R_n per junction = R_array / n).
    """
    required = ["array_resistance_ohm", "junctions_in_array"]
    missing = [c for c in required if c not in resistance_map.columns]
    if missing:
        raise KeyError(f"Resistance map missing columns {missing}. Found: {list(resistance_map.columns)}")

    out = resistance_map.copy()
    r_array = out["array_resistance_ohm"].astype(float).to_numpy()
    n = out["junctions_in_array"].astype(int).to_numpy()
    if (r_array <= 0).any() or (n <= 0).any():
        raise DomainError("array_resistance_ohm and junctions_in_array must be positive")

    out["r_n_ohm"] = r_array / n
    delta_over_e = gap_energy  # Delta/e in volts
    out["critical_current_a"] = math.pi * delta_over_e / (2.0 * out["r_n_ohm"])
    out["josephson_inductance_h"] = CONSTANTS.reduced_flux_quantum / out["critical_current_a"]
    return out


def cell_inductance(cell: UnitCellParams) -> float:
    """Series inductance of one cell at low frequency (junctions only)."""
    j = cell.junctions
    return j.count_per_cell * josephson_inductance(j.critical_current)


def line_impedance(cell: UnitCellParams) -> float:
    """sqrt(L_cell / c_ground): low-frequency, resonator-detached characteristic impedance."""
    return math.sqrt(cell_inductance(cell) / cell.c_ground)


def plasma_frequency(junction: JunctionParams) -> float:
    """Junction plasma frequency 1/(2 pi sqrt(L_J C_J)) in Hz; inf when C_J = 0."""
    if junction.self_capacitance == 0:
        return math.inf
    l_j = josephson_inductance(junction.critical_current)
    return 1.0 / (2.0 * math.pi * math.sqrt(l_j * junction.self_capacitance))


def resonator_self_frequency(res: ResonatorParams) -> float:
    """Pole of the bare l_res || c_res tank (Hz)."""
    if res.l_res <= 0 or res.c_res <= 0:
        return math.inf
    return 1.0 / (2.0 * math.pi * math.sqrt(res.l_res * res.c_res))


def resonator_pole_frequency(res: ResonatorParams) -> float:
    """
    Pole of the shunt branch admittance (coupling capacitor + tank), which is
    where the stopband sits: 1/(2 pi sqrt(l_res (c_res + c_coupling))).
    """
    if res.l_res <= 0 or res.c_coupling <= 0:
        return math.inf
    return 1.0 / (2.0 * math.pi * math.sqrt(res.l_res * (res.c_res + res.c_coupling)))


# ---------------------------------------------------------------------------
# Disorder
# ---------------------------------------------------------------------------

def _target_value(cell: UnitCellParams, target: DisorderTarget) -> float:
    if target is DisorderTarget.RESONATOR_C_RES:
        return cell.resonator.c_res
    if target is DisorderTarget.JUNCTION_CRITICAL_CURRENT:
        return cell.junctions.critical_current
    return cell.c_ground


def _with_target_value(cell: UnitCellParams, target: DisorderTarget, value: float) -> UnitCellParams:
    if target is DisorderTarget.RESONATOR_C_RES:
        return replace(cell, resonator=replace(cell.resonator, c_res=value))
    if target is DisorderTarget.JUNCTION_CRITICAL_CURRENT:
        return replace(cell, junctions=replace(cell.junctions, critical_current=value))
    return replace(cell, c_ground=value)


def sample_disordered_line(nominal: UnitCellParams, n_cells: int, disorder: DisorderSpec) -> DeviceLine:
    """
    Draw a line whose target parameter is nominal * (1 + delta) per cell,
    delta ~ Normal(0, sigma_rel), independent per cell, reproducible per seed.

    The standard-normal draws do not depend on sigma_rel, so two lines sampled
    with the same seed and different sigma are scaled copies of each other.
    """
    if n_cells < 1:
        raise DomainError(f"n_cells must be >= 1, got {n_cells}")
    if disorder.sigma_rel == 0:
        return DeviceLine.uniform(nominal, n_cells)

    rng = np.random.default_rng(disorder.seed)
    base = _target_value(nominal, disorder.target)
    z = rng.standard_normal(n_cells)

    cells = []
    for idx in range(n_cells):
        value = base * (1.0 + disorder.sigma_rel * z[idx])
        rejections = 0
        while value <= 0:
            rejections += 1
            if rejections > MAX_DISORDER_REJECTIONS:
                raise DomainError(
                    f"Disorder sampling for cell {idx} rejected {MAX_DISORDER_REJECTIONS} non-positive "
                    f"draws (sigma_rel={disorder.sigma_rel})"
                )
            value = base * (1.0 + disorder.sigma_rel * rng.standard_normal())
        cells.append(_with_target_value(nominal, disorder.target, float(value)))

    return DeviceLine(cells=tuple(cells), cell_count=n_cells)


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------

def cell_from_dict(doc: Dict[str, Any]) -> UnitCellParams:
    j = doc["junctions"]
    r = doc["resonator"]
    return UnitCellParams(
        junctions=JunctionParams(
            critical_current=float(j["critical_current"]),
            self_capacitance=float(j["self_capacitance"]),
            count_per_cell=int(j.get("count_per_cell", JUNCTIONS_PER_CELL)),
        ),
        resonator=ResonatorParams(
            c_res=float(r["c_res"]),
            l_res=float(r["l_res"]),
            c_coupling=float(r["c_coupling"]),
        ),
        c_ground=float(doc["c_ground"]),
        series_resistance=float(doc.get("series_resistance", 0.0)),
    )


def cell_to_dict(cell: UnitCellParams) -> Dict[str, Any]:
    return asdict(cell)
