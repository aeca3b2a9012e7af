"""
Added noise of the TWPA referred to its input, from pump-on / pump-off noise
spectra and the gains of the chain:

    n_add = ((N_on - N_off) / G_sys + 1/2) / G_T - 1/2

All PSDs are in quanta (photons per second per hertz) unless a function says
otherwise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.device.circuit import CONSTANTS
from src.errors import DomainError
from src.utils.io import read_commented_csv
from src.utils.units import ratio_to_db

logger = logging.getLogger(__name__)

NOISE_COLUMNS = ["freq_hz", "psd_on", "psd_off"]
NOISE_UNITS = ("quanta", "w_per_hz")


@dataclass(frozen=True)
class NoiseSpectra:
    freqs: np.ndarray  # Hz
    psd_on: np.ndarray  # quanta
    psd_off: np.ndarray  # quanta

    def __post_init__(self) -> None:
        f = np.asarray(self.freqs, dtype=float)
        on = np.asarray(self.psd_on, dtype=float)
        off = np.asarray(self.psd_off, dtype=float)
        if not (f.shape == on.shape == off.shape):
            raise DomainError(f"freqs, psd_on and psd_off must share a shape, got {f.shape}, {on.shape}, {off.shape}")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "psd_on", on)
        object.__setattr__(self, "psd_off", off)

    @property
    def violations(self) -> np.ndarray:
        """Points where the pump-on floor sits below pump-off."""
        return self.psd_on < self.psd_off


@dataclass(frozen=True)
class ChainGains:
    g_sys: np.ndarray  # power ratio after the TWPA
    g_twpa: np.ndarray  # power ratio of the TWPA

    def __post_init__(self) -> None:
        object.__setattr__(self, "g_sys", np.asarray(self.g_sys, dtype=float))
        object.__setattr__(self, "g_twpa", np.asarray(self.g_twpa, dtype=float))


def _check_gains(gains: ChainGains) -> None:
    if np.any(gains.g_sys <= 0) or np.any(gains.g_twpa <= 0):
        raise DomainError("g_sys and g_twpa must be > 0 at every frequency")


def added_noise(spectra: NoiseSpectra, gains: ChainGains) -> np.ndarray:
    _check_gains(gains)
    n_bad = int(spectra.violations.sum())
    if n_bad:
        logger.warning("[WARN] psd_on < psd_off at %d of %d points", n_bad, spectra.freqs.size)
    delta = spectra.psd_on - spectra.psd_off
    return (delta / gains.g_sys + 0.5) / gains.g_twpa - 0.5


def standard_quantum_limit(g):
    """(G - 1) / (2 G) quanta; G = inf gives 1/2."""
    g_arr = np.asarray(g, dtype=float)
    if np.any(np.isnan(g_arr)) or np.any(g_arr < 1):
        raise DomainError(f"gain must be >= 1 for the quantum limit, got {g!r}")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(g_arr), 0.5, (g_arr - 1.0) / (2.0 * g_arr))
    return float(out) if out.ndim == 0 else out


def snri(spectra: NoiseSpectra, gains: ChainGains) -> np.ndarray:
    """Signal gain minus noise-floor rise, dB."""
    _check_gains(gains)
    if np.any(spectra.psd_off <= 0):
        raise DomainError("psd_off must be > 0 at every frequency for SNRi")
    return ratio_to_db(gains.g_twpa) - ratio_to_db(spectra.psd_on / spectra.psd_off)


def photon_energy(freqs) -> np.ndarray:
    return CONSTANTS.reduced_planck * 2.0 * math.pi * np.asarray(freqs, dtype=float)


def psd_w_per_hz_to_quanta(psd, freqs) -> np.ndarray:
    return np.asarray(psd, dtype=float) / photon_energy(freqs)


def quanta_to_psd_w_per_hz(psd, freqs) -> np.ndarray:
    return np.asarray(psd, dtype=float) * photon_energy(freqs)


def synthesize_chain_spectra(
    freqs,
    g_twpa,
    n_add,
    n_sys: float,
    g_sys,
) -> Tuple[NoiseSpectra, ChainGains]:
    """
    Forward chain model: N_off = G_sys n_sys,
    N_on = G_sys (G_T (n_add + 1/2) - 1/2) + N_off.
    """
    f = np.asarray(freqs, dtype=float)
    g_t = np.broadcast_to(np.asarray(g_twpa, dtype=float), f.shape)
    g_s = np.broadcast_to(np.asarray(g_sys, dtype=float), f.shape)
    n = np.broadcast_to(np.asarray(n_add, dtype=float), f.shape)
    if n_sys < 0:
        raise DomainError(f"n_sys must be >= 0, got {n_sys!r}")

    off = g_s * n_sys
    on = g_s * (g_t * (n + 0.5) - 0.5) + off
    return NoiseSpectra(freqs=f, psd_on=on, psd_off=off), ChainGains(g_sys=g_s.copy(), g_twpa=g_t.copy())


def average_excess_noise(
    freqs,
    n_add,
    g_twpa,
    band: Tuple[float, float] = (4e9, 8e9),
    exclude: Optional[np.ndarray] = None,
) -> float:
    """Mean of n_add - SQL(G_T) over the band, skipping excluded or non-finite points."""
    f = np.asarray(freqs, dtype=float)
    n = np.asarray(n_add, dtype=float)
    g = np.asarray(g_twpa, dtype=float)
    keep = (f >= band[0]) & (f <= band[1]) & np.isfinite(n) & np.isfinite(g) & (g >= 1)
    if exclude is not None:
        keep &= ~np.asarray(exclude, dtype=bool)
    if not keep.any():
        raise DomainError(f"no usable points in band [{band[0]:.6g}, {band[1]:.6g}] Hz")
    return float(np.mean(n[keep] - standard_quantum_limit(g[keep])))


def noise_frame(spectra: NoiseSpectra, gains: ChainGains) -> pd.DataFrame:
    n_add = added_noise(spectra, gains)
    g_t = np.broadcast_to(gains.g_twpa, spectra.freqs.shape)
    sql = np.where(g_t >= 1, (g_t - 1.0) / (2.0 * g_t), np.nan)
    return pd.DataFrame(
        {
            "freq_hz": spectra.freqs,
            "g_twpa_db": ratio_to_db(g_t),
            "n_add": n_add,
            "sql": sql,
            "excess": n_add - sql,
            "snri_db": snri(spectra, gains),
        }
    )


def read_noise_csv(path: Path) -> NoiseSpectra:
    """
    freq_hz,psd_on,psd_off with a "! units=quanta" or "! units=w_per_hz"
    comment line; W/Hz data is converted with hbar*omega per quantum.
    """
    df, comments = read_commented_csv(path)
    missing = [c for c in NOISE_COLUMNS if c not in df.columns]
    if missing:
        raise KeyError(f"Noise CSV missing columns {missing}. Found: {list(df.columns)}")

    units = None
    for line in comments:
        key, _, value = line.partition("=")
        if key.strip().lower() == "units":
            units = value.strip().lower()
    if units not in NOISE_UNITS:
        raise ValueError(f"{path} needs a '! units=' line with one of {list(NOISE_UNITS)}, got {units!r}")

    df = df.sort_values("freq_hz").reset_index(drop=True)
    freqs = df["freq_hz"].astype(float).to_numpy()
    on = df["psd_on"].astype(float).to_numpy()
    off = df["psd_off"].astype(float).to_numpy()
    if units == "w_per_hz":
        on = psd_w_per_hz_to_quanta(on, freqs)
        off = psd_w_per_hz_to_quanta(off, freqs)
    return NoiseSpectra(freqs=freqs, psd_on=on, psd_off=off)
