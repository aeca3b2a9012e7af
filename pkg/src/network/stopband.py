"""
Disorder Monte Carlo of the linear line and the stopband width read off the
ensemble-mean power transmission.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.config import DEFAULT_THRESHOLD_DB, DEFAULT_Z_REF
from src.device.circuit import (
    DeviceLine,
    DisorderSpec,
    UnitCellParams,
    resonator_pole_frequency,
    sample_disordered_line,
)
from src.errors import DomainError
from src.network.abcd import check_grid, transmission_spectrum
from src.utils.rng import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleTransmission:
    freqs: np.ndarray  # Hz
    power: np.ndarray  # (n_lines, n_f) |s21|^2, NaN on element poles

    @property
    def n_lines(self) -> int:
        return int(self.power.shape[0])

    @property
    def mean_power(self) -> np.ndarray:
        # a pole in any line marks the point as a gap in the mean
        return np.mean(self.power, axis=0)

    @property
    def mean_db(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return 10.0 * np.log10(self.mean_power)


@dataclass(frozen=True)
class StopbandResult:
    width_hz: Optional[float]  # None: no stopband found on this grid
    f_low: Optional[float]
    f_high: Optional[float]
    level_db: float  # absolute threshold level, dB
    passband_median_db: float
    centre_hz: float

    @property
    def found(self) -> bool:
        return self.width_hz is not None

    def as_dict(self) -> dict:
        return {
            "width_hz": self.width_hz,
            "f_low_hz": self.f_low,
            "f_high_hz": self.f_high,
            "level_db": self.level_db,
            "passband_median_db": self.passband_median_db,
            "centre_hz": self.centre_hz,
        }


def sample_ensemble(
    nominal: UnitCellParams,
    n_cells: int,
    disorder: DisorderSpec,
    ensemble_size: int,
) -> List[DeviceLine]:
    """
    ensemble_size independent lines; line i uses a seed split from
    disorder.seed with the label "line-<i>", so a line's draws do not depend on
    how many other lines are sampled or on sigma_rel.
    """
    if ensemble_size < 1:
        raise DomainError(f"ensemble_size must be >= 1, got {ensemble_size}")
    lines = []
    for i in range(ensemble_size):
        spec = DisorderSpec(sigma_rel=disorder.sigma_rel, target=disorder.target, seed=derive_seed(disorder.seed, f"line-{i}"))
        lines.append(sample_disordered_line(nominal, n_cells, spec))
    return lines


def _line_power(line: DeviceLine, freqs: np.ndarray, z_ref: float) -> np.ndarray:
    return np.abs(transmission_spectrum(line, freqs, z_ref).s21) ** 2


def ensemble_transmission(
    lines: Sequence[DeviceLine],
    freqs: Sequence[float],
    z_ref: float = DEFAULT_Z_REF,
    workers: int = 1,
) -> EnsembleTransmission:
    if len(lines) == 0:
        raise DomainError("ensemble needs at least one line")
    freqs = check_grid(freqs)
    rows = Parallel(n_jobs=workers)(delayed(_line_power)(line, freqs, z_ref) for line in lines)
    return EnsembleTransmission(freqs=freqs, power=np.vstack(rows))


def nominal_centre(line: DeviceLine) -> float:
    """Mean loaded resonator pole over the cells of one line (Hz)."""
    return float(np.mean([resonator_pole_frequency(c.resonator) for c in line.cells]))


def _crossing(f1: float, y1: float, f2: float, y2: float, level: float) -> float:
    if not (np.isfinite(y1) and np.isfinite(y2)) or y1 == y2:
        return f2 if not np.isfinite(y2) else f1
    return f1 + (level - y1) * (f2 - f1) / (y2 - y1)


def stopband_from_ensemble(
    ens: EnsembleTransmission,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    centre_hz: Optional[float] = None,
) -> StopbandResult:
    if not threshold_db < 0:
        raise DomainError(f"threshold_db must be < 0, got {threshold_db!r}")

    f = ens.freqs
    y = ens.mean_db
    finite = np.isfinite(y)
    if not finite.any():
        raise DomainError("ensemble transmission has no finite points")
    median = float(np.median(y[finite]))
    level = median + threshold_db
    centre = float(f[int(np.argmin(y))]) if centre_hz is None else float(centre_hz)

    # gaps sit on element poles, which lie inside the stopband
    below = ~finite | (y < level)
    idx = int(np.argmin(np.abs(f - centre)))
    if not below[idx]:
        logger.info("no stopband: transmission at %.6g Hz is above %.2f dB", f[idx], level)
        return StopbandResult(None, None, None, level, median, centre)

    lo = idx
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = idx
    while hi < f.size - 1 and below[hi + 1]:
        hi += 1
    if lo == 0 or hi == f.size - 1:
        logger.info("no stopband: sub-threshold region runs off the grid")
        return StopbandResult(None, None, None, level, median, centre)

    f_low = _crossing(f[lo - 1], y[lo - 1], f[lo], y[lo], level)
    f_high = _crossing(f[hi], y[hi], f[hi + 1], y[hi + 1], level)
    return StopbandResult(float(f_high - f_low), float(f_low), float(f_high), level, median, centre)


def stopband_width(
    lines: Sequence[DeviceLine],
    freqs: Sequence[float],
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    z_ref: float = DEFAULT_Z_REF,
    workers: int = 1,
) -> StopbandResult:
    """
    Width of the contiguous region around the resonator pole where the
    ensemble-mean |s21|^2 is below (passband median + threshold_db).
    """
    if not threshold_db < 0:
        raise DomainError(f"threshold_db must be < 0, got {threshold_db!r}")
    ens = ensemble_transmission(lines, freqs, z_ref=z_ref, workers=workers)
    return stopband_from_ensemble(ens, threshold_db, centre_hz=nominal_centre(lines[0]))
