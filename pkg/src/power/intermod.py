"""
Two-tone intermodulation through the multi-mode mixing engine.

The mode set holds the pump, both tones, their idlers (2 f_p - f) and the
odd-order products m f1 + n f2 with m + n = 1 and |m| + |n| <= max_order,
optionally with the products' own idlers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.linear_model import LinearRegression

from src.config import DEFAULT_ATOL, DEFAULT_IMD_ORDER, DEFAULT_RTOL, IP3_SLOPE_TOLERANCE, MAX_IMD_MODES, STOPBAND_IMAG_K
from src.device.circuit import UnitCellParams, line_impedance
from src.errors import ConfigurationError, DomainError, IntegrationError, RegimeError, SingularityError
from src.gain.cme import MixingMode, MultiModeSystem
from src.gain.fwm import PumpSettings, flux_to_dbm, photon_flux, pump_current_amplitude, wavenumber_parts

logger = logging.getLogger(__name__)

IMD_COLUMNS = ["pin_dbm", "p_fund_dbm", "p_imd3_dbm"]
ALLOWED_ORDERS = (3, 5, 7)
REGIME_DECADE_DB = 10.0


@dataclass(frozen=True)
class ToneSet:
    tones: Tuple[Tuple[float, float], ...]  # (frequency Hz, input power dBm)
    pump: PumpSettings

    def __post_init__(self) -> None:
        tones = tuple((float(f), float(p)) for f, p in self.tones)
        if len(tones) != 2:
            raise DomainError(f"two-tone analysis needs exactly 2 tones, got {len(tones)}")
        (f1, _), (f2, _) = tones
        if f1 == f2:
            raise DomainError(f"tone frequencies must be distinct, got {f1!r} twice")
        if any(f <= 0 for f, _ in tones):
            raise DomainError("tone frequencies must be > 0")
        object.__setattr__(self, "tones", tuple(sorted(tones)))

    @classmethod
    def symmetric(cls, pump: PumpSettings, centre: float, spacing: float, power_dbm: float) -> "ToneSet":
        return cls(tones=((centre - spacing / 2.0, power_dbm), (centre + spacing / 2.0, power_dbm)), pump=pump)

    @property
    def f1(self) -> float:
        return self.tones[0][0]

    @property
    def f2(self) -> float:
        return self.tones[1][0]


@dataclass(frozen=True)
class ImdProduct:
    label: str
    frequency: float  # Hz
    order: int  # |m| + |n|; 1 for the fundamentals
    m: int
    n: int
    output_power: float  # dBm


@dataclass(frozen=True)
class ImdSpectrum:
    products: List[ImdProduct] = field(default_factory=list)

    def by_label(self, label: str) -> ImdProduct:
        for p in self.products:
            if p.label == label:
                return p
        raise KeyError(f"Product '{label}' not in spectrum. Available: {[p.label for p in self.products]}")

    def of_order(self, order: int) -> List[ImdProduct]:
        return [p for p in self.products if p.order == order]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(p.label, p.frequency, p.order, p.m, p.n, p.output_power) for p in self.products],
            columns=["label", "freq_hz", "order", "m", "n", "p_out_dbm"],
        )


def product_coefficients(max_order: int) -> List[Tuple[int, int]]:
    """(m, n) with m + n = 1 and 3 <= |m| + |n| <= max_order, lower side first."""
    out = []
    for order in range(3, max_order + 1, 2):
        j = (order + 1) // 2
        out.append((j, 1 - j))  # below f1
        out.append((1 - j, j))  # above f2
    return out


def build_imd_modes(
    cell: UnitCellParams,
    tones: ToneSet,
    max_order: int = DEFAULT_IMD_ORDER,
    include_product_idlers: bool = False,
) -> Tuple[List[MixingMode], List[Tuple[str, int, int, int]]]:
    """
    Mode list plus (label, order, m, n) for each signal-side mode. Raises
    ConfigurationError when the set would exceed MAX_IMD_MODES.
    """
    if max_order not in ALLOWED_ORDERS:
        raise DomainError(f"max_order must be one of {ALLOWED_ORDERS}, got {max_order!r}")

    f_p = tones.pump.frequency
    f1, f2 = tones.f1, tones.f2
    entries: List[Tuple[str, float, int, int, int]] = [
        ("pump", f_p, 0, 0, 0),
        ("tone1", f1, 1, 1, 0),
        ("tone2", f2, 1, 0, 1),
        ("idler1", 2.0 * f_p - f1, 0, 0, 0),
        ("idler2", 2.0 * f_p - f2, 0, 0, 0),
    ]
    for m, n in product_coefficients(max_order):
        order = abs(m) + abs(n)
        f = m * f1 + n * f2
        label = f"imd{order}_{'lo' if m > 0 else 'hi'}"
        entries.append((label, f, order, m, n))
        if include_product_idlers:
            entries.append((f"{label}_idler", 2.0 * f_p - f, 0, 0, 0))

    if len(entries) > MAX_IMD_MODES:
        raise ConfigurationError(
            f"IMD mode set of {len(entries)} modes exceeds the limit of {MAX_IMD_MODES}; "
            f"lower max_order or drop product idlers"
        )

    modes = []
    for label, f, _, _, _ in entries:
        if f <= 0:
            raise DomainError(f"mode {label} lands at non-positive frequency {f:.6g} Hz")
        k_re, k_im = wavenumber_parts(cell, 2.0 * math.pi * f)
        if label.startswith("tone") and k_im > STOPBAND_IMAG_K:
            raise DomainError(f"{label} at {f:.6g} Hz sits in a stopband (Im k = {k_im:.3g} rad/cell)")
        modes.append(MixingMode(label=label, frequency=f, k=k_re))
    signal_side = [(label, order, m, n) for label, _, order, m, n in entries if order > 0]
    return modes, signal_side


def _nonlinearity(cell: UnitCellParams, pump: PumpSettings, z_line: Optional[float]) -> float:
    # per unit normalized flux; reduces to kappa = k_p (I_p/I_c)^2 / 8 for the pump
    z = line_impedance(cell) if z_line is None else z_line
    i_p = pump_current_amplitude(pump, z)
    return (i_p / cell.junctions.critical_current) ** 2 / 8.0


def two_tone_imd(
    cell: UnitCellParams,
    n_cells: int,
    tones: ToneSet,
    max_order: int = DEFAULT_IMD_ORDER,
    include_product_idlers: bool = False,
    z_line: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> ImdSpectrum:
    pump = tones.pump
    if pump.is_off:
        raise DomainError("two-tone analysis needs the pump on")

    modes, signal_side = build_imd_modes(cell, tones, max_order, include_product_idlers)
    system = MultiModeSystem(modes, _nonlinearity(cell, pump, z_line))

    flux_p = photon_flux(pump.input_power, pump.frequency)
    a0 = np.zeros(len(modes), dtype=complex)
    a0[system.index("pump")] = 1.0
    for i, (f, p) in enumerate(tones.tones, start=1):
        a0[system.index(f"tone{i}")] = math.sqrt(photon_flux(p, f) / flux_p)

    _, amps = system.integrate(a0, n_cells, rtol=rtol, atol=atol)
    out = amps[:, -1]

    products = []
    for label, order, m, n in signal_side:
        idx = system.index(label)
        f = system.freqs[idx]
        products.append(
            ImdProduct(
                label=label, frequency=float(f), order=order, m=m, n=n,
                output_power=flux_to_dbm(abs(out[idx]) ** 2 * flux_p, f),
            )
        )
    logger.debug(
        "two-tone IMD: %d modes, %d mixing terms, photon drift %.2e",
        len(modes), system.n_terms, abs(system.photon_number(out) - system.photon_number(a0)) / system.photon_number(a0),
    )
    return ImdSpectrum(products=products)


def _imd_point(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    centre: float,
    spacing: float,
    p_in: float,
    max_order: int,
    z_line: Optional[float],
    rtol: float,
    atol: float,
) -> Tuple[float, float, float]:
    try:
        spec = two_tone_imd(
            cell, n_cells, ToneSet.symmetric(pump, centre, spacing, p_in), max_order, z_line=z_line, rtol=rtol, atol=atol
        )
    except (DomainError, SingularityError, IntegrationError) as exc:
        logger.warning("IMD point at %.2f dBm failed: %s", p_in, exc)
        return math.nan, math.nan, math.nan
    return (
        spec.by_label("tone1").output_power,
        spec.by_label("imd3_lo").output_power,
        spec.by_label("imd3_hi").output_power,
    )


def imd_sweep(
    cell: UnitCellParams,
    n_cells: int,
    pump: PumpSettings,
    centre: float,
    spacing: float,
    input_powers: Sequence[float],
    max_order: int = DEFAULT_IMD_ORDER,
    z_line: Optional[float] = None,
    workers: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> pd.DataFrame:
    """
    Fundamental and lower IMD3 output power versus per-tone input power,
    two equal tones spaced symmetrically about centre.
    """
    p = np.sort(np.asarray(input_powers, dtype=float))
    if p.size == 0:
        raise DomainError("input_powers is empty")
    rows = Parallel(n_jobs=workers)(
        delayed(_imd_point)(cell, n_cells, pump, centre, spacing, float(pi), max_order, z_line, rtol, atol) for pi in p
    )
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    df = pd.DataFrame({"pin_dbm": p, "p_fund_dbm": arr[:, 0], "p_imd3_dbm": arr[:, 1]}, columns=IMD_COLUMNS)
    asym = np.nanmax(np.abs(arr[:, 1] - arr[:, 2])) if np.isfinite(arr[:, 1:]).any() else math.nan
    logger.info("IMD sweep: %d points, max upper/lower IMD3 asymmetry %.3f dB", p.size, asym)
    return df


def _fit_line(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    model = LinearRegression().fit(x.reshape(-1, 1), y)
    return float(model.coef_[0]), float(model.intercept_)


def _regime(pin: np.ndarray, y: np.ndarray, decade_db: float) -> Tuple[np.ndarray, np.ndarray]:
    keep = np.isfinite(pin) & np.isfinite(y)
    x, y = pin[keep], y[keep]
    if x.size == 0:
        return x, y
    window = x <= x.min() + decade_db
    return x[window], y[window]


def ip3_from_two_tone(
    pin_dbm: Sequence[float],
    p_fund_dbm: Sequence[float],
    p_imd3_dbm: Sequence[float],
    decade_db: float = REGIME_DECADE_DB,
    slope_tolerance: float = IP3_SLOPE_TOLERANCE,
) -> float:
    """
    Input-referred third-order intercept: slope-1 and slope-3 lines fitted on
    the lowest decade of input power, intersected.
    """
    pin = np.asarray(pin_dbm, dtype=float)
    fund = np.asarray(p_fund_dbm, dtype=float)
    imd3 = np.asarray(p_imd3_dbm, dtype=float)
    if not (pin.shape == fund.shape == imd3.shape):
        raise DomainError(f"curves differ in shape: {pin.shape}, {fund.shape}, {imd3.shape}")

    fits = {}
    for name, y, nominal in (("fundamental", fund, 1.0), ("imd3", imd3, 3.0)):
        x, yy = _regime(pin, y, decade_db)
        if x.size < 3:
            raise RegimeError(f"{name} curve has {x.size} points in its lowest {decade_db:.0f} dB; need >= 3")
        slope, intercept = _fit_line(x, yy)
        if abs(slope - nominal) > slope_tolerance * nominal:
            raise RegimeError(
                f"{name} slope {slope:.3f} dB/dB is more than {slope_tolerance:.0%} from {nominal:.0f}; "
                f"small-signal regime not identified"
            )
        fits[name] = (slope, intercept)

    (s1, b1), (s3, b3) = fits["fundamental"], fits["imd3"]
    ip3 = (b1 - b3) / (s3 - s1)
    logger.debug("IP3 fit: slopes %.4f / %.4f, IP3 = %.2f dBm", s1, s3, ip3)
    return float(ip3)


def imd3_slope(pin_dbm: Sequence[float], p_imd3_dbm: Sequence[float], decade_db: float = REGIME_DECADE_DB) -> float:
    x, y = _regime(np.asarray(pin_dbm, dtype=float), np.asarray(p_imd3_dbm, dtype=float), decade_db)
    if x.size < 2:
        raise RegimeError(f"need >= 2 finite points in the lowest {decade_db:.0f} dB, got {x.size}")
    return _fit_line(x, y)[0]


def signal_to_imd_margin(p_fund_dbm: Sequence[float], p_imd3_dbm: Sequence[float]) -> np.ndarray:
    """Fundamental minus IMD3 output power, dB."""
    return np.asarray(p_fund_dbm, dtype=float) - np.asarray(p_imd3_dbm, dtype=float)
