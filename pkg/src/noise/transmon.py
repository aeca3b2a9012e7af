"""
Waveguide-coupled transmon as an absolute power standard.

The qubit transmittance under a coherent drive of Rabi rate Omega is

    t = 1 - (G1 / (2 G2)) (1 - i d/G2) / (1 + (d/G2)^2 + Omega^2 / (G1 G2))

with d the detuning and G1, G2 the relaxation and dephasing rates (rad/s).
The drive is tied to the power at the qubit by Omega^2 = c G1 P / (hbar w_q),
and P_qubit = P_instrument * 10^(attenuation_db / 10), so a global fit over
frequency and power yields the line attenuation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import least_squares
from sklearn.linear_model import LinearRegression

from src.config import DEFAULT_RABI_CONVENTION, FIT_MAX_NFEV, FIT_RESTARTS
from src.device.circuit import CONSTANTS
from src.errors import DomainError, FitError
from src.utils.io import read_commented_csv
from src.utils.units import dbm_to_watts

logger = logging.getLogger(__name__)

QUBIT_COLUMNS = ["freq_hz", "power_dbm", "t_re", "t_im"]
FIT_PARAMS = ("f_q", "gamma1", "gamma_phi", "attenuation_db", "bg_amp", "bg_phase", "delay")

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Lineshape
# ---------------------------------------------------------------------------

def transmon_transmittance(delta, omega_rabi, gamma1, gamma2):
    """Complex transmittance; all rates in rad/s. Arrays broadcast."""
    if np.any(np.asarray(gamma1) <= 0) or np.any(np.asarray(gamma2) <= 0):
        raise DomainError("gamma1 and gamma2 must be > 0")
    return _lineshape(np.asarray(delta, dtype=float), np.asarray(omega_rabi, dtype=float) ** 2, gamma1, gamma2)


def _lineshape(delta, rabi_sq, gamma1, gamma2):
    u = delta / gamma2
    den = 1.0 + u**2 + rabi_sq / (gamma1 * gamma2)
    return 1.0 - (gamma1 / (2.0 * gamma2)) * (1.0 - 1j * u) / den


def lineshape_jacobian(delta, rabi_sq, gamma1, gamma2) -> np.ndarray:
    """
    Partial derivatives of the transmittance with respect to
    (delta, gamma1, gamma2, rabi_sq), stacked on the first axis.
    """
    delta = np.asarray(delta, dtype=float)
    rabi_sq = np.asarray(rabi_sq, dtype=float)
    u = delta / gamma2
    amp = gamma1 / (2.0 * gamma2)
    num = 1.0 - 1j * u
    den = 1.0 + u**2 + rabi_sq / (gamma1 * gamma2)

    def d_t(d_amp, d_num, d_den):
        return -(d_amp * num / den + amp * d_num / den - amp * num * d_den / den**2)

    zero = np.zeros_like(u)
    d_delta = d_t(zero, -1j / gamma2 + zero, 2.0 * u / gamma2)
    d_g1 = d_t(1.0 / (2.0 * gamma2) + zero, zero, -rabi_sq / (gamma1**2 * gamma2) + zero)
    d_g2 = d_t(
        -gamma1 / (2.0 * gamma2**2) + zero,
        1j * delta / gamma2**2,
        -2.0 * delta**2 / gamma2**3 - rabi_sq / (gamma1 * gamma2**2),
    )
    d_rabi = d_t(zero, zero, 1.0 / (gamma1 * gamma2) + zero)
    return np.stack(np.broadcast_arrays(d_delta, d_g1, d_g2, d_rabi))


def rabi_rate_squared(power_w, f_q: float, gamma1: float, convention: float = DEFAULT_RABI_CONVENTION):
    """Omega^2 = c G1 P / (hbar w_q), rad^2/s^2; gamma1 in rad/s."""
    return convention * gamma1 * np.asarray(power_w, dtype=float) / (CONSTANTS.reduced_planck * TWO_PI * f_q)


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QubitDataset:
    tone_freqs: np.ndarray  # Hz, (n_f,)
    tone_powers: np.ndarray  # dBm at the instrument, (n_p,)
    t_complex: np.ndarray  # (n_f, n_p)

    def __post_init__(self) -> None:
        f = np.asarray(self.tone_freqs, dtype=float)
        p = np.asarray(self.tone_powers, dtype=float)
        t = np.asarray(self.t_complex, dtype=complex)
        if t.shape != (f.size, p.size):
            raise DomainError(f"t_complex must have shape ({f.size}, {p.size}), got {t.shape}")
        object.__setattr__(self, "tone_freqs", f)
        object.__setattr__(self, "tone_powers", p)
        object.__setattr__(self, "t_complex", t)

    @property
    def power_span_db(self) -> float:
        return float(self.tone_powers.max() - self.tone_powers.min())

    def frame(self) -> pd.DataFrame:
        ff, pp = np.meshgrid(self.tone_freqs, self.tone_powers, indexing="ij")
        return pd.DataFrame(
            {
                "freq_hz": ff.ravel(),
                "power_dbm": pp.ravel(),
                "t_re": self.t_complex.real.ravel(),
                "t_im": self.t_complex.imag.ravel(),
            },
            columns=QUBIT_COLUMNS,
        )


def read_qubit_csv(path: Path) -> QubitDataset:
    df, _ = read_commented_csv(path)
    missing = [c for c in QUBIT_COLUMNS if c not in df.columns]
    if missing:
        raise KeyError(f"Qubit CSV missing columns {missing}. Found: {list(df.columns)}")

    freqs = np.sort(df["freq_hz"].astype(float).unique())
    powers = np.sort(df["power_dbm"].astype(float).unique())
    if len(df) != freqs.size * powers.size or df.duplicated(["freq_hz", "power_dbm"]).any():
        raise DomainError(
            f"{path} is not a complete (freq, power) grid: {len(df)} rows for "
            f"{freqs.size} frequencies x {powers.size} powers"
        )
    t = (df["t_re"].astype(float) + 1j * df["t_im"].astype(float)).to_numpy()
    grid = pd.Series(t, index=pd.MultiIndex.from_arrays([df["freq_hz"].astype(float), df["power_dbm"].astype(float)]))
    t_grid = grid.unstack().reindex(index=freqs, columns=powers).to_numpy()
    return QubitDataset(tone_freqs=freqs, tone_powers=powers, t_complex=t_grid)


def synthesize_qubit_dataset(
    tone_freqs: Sequence[float],
    tone_powers: Sequence[float],
    f_q: float,
    gamma1: float,
    gamma2: float,
    attenuation_db: float,
    background: complex = 1.0 + 0j,
    delay: float = 0.0,
    noise: float = 0.0,
    seed: Optional[int] = None,
    convention: float = DEFAULT_RABI_CONVENTION,
) -> QubitDataset:
    """
    Forward model of a transmittance map. gamma1/gamma2 are in Hz (rate / 2 pi);
    noise is the rms of the additive complex noise relative to |background|.
    """
    f = np.asarray(tone_freqs, dtype=float)
    p = np.asarray(tone_powers, dtype=float)
    t = _model(f, p, f_q, gamma1, gamma2, attenuation_db, background, delay, float(np.mean(f)), convention)
    if noise > 0:
        rng = np.random.default_rng(seed)
        sigma = noise * abs(background) / math.sqrt(2.0)
        t = t + sigma * (rng.standard_normal(t.shape) + 1j * rng.standard_normal(t.shape))
    return QubitDataset(tone_freqs=f, tone_powers=p, t_complex=t)


def _model(f, p_dbm, f_q, gamma1_hz, gamma2_hz, attenuation_db, background, delay, f_ref, convention):
    g1 = TWO_PI * gamma1_hz
    g2 = TWO_PI * gamma2_hz
    p_qubit = dbm_to_watts(p_dbm + attenuation_db)
    rabi_sq = rabi_rate_squared(p_qubit, f_q, g1, convention)
    delta = TWO_PI * (f - f_q)
    t = _lineshape(delta[:, None], rabi_sq[None, :], g1, g2)
    bg = background * np.exp(-1j * TWO_PI * (f - f_ref) * delay)
    return bg[:, None] * t


def _model_jacobian(f, p_dbm, f_q, gamma1_hz, gamma_phi_hz, attenuation_db, bg_amp, bg_phase, delay, f_ref, convention):
    """
    d(model)/d(f_q, gamma1, gamma_phi, attenuation_db, bg_amp, bg_phase, delay)
    in Hz, Hz, Hz, dB, 1, rad, s; shape (7, n_f, n_p).
    """
    g1 = TWO_PI * gamma1_hz
    g2 = TWO_PI * (gamma1_hz / 2.0 + gamma_phi_hz)
    rabi_sq = rabi_rate_squared(dbm_to_watts(p_dbm + attenuation_db), f_q, g1, convention)[None, :]
    delta = TWO_PI * (f - f_q)[:, None]
    t = _lineshape(delta, rabi_sq, g1, g2)
    d_delta, d_g1, d_g2, d_rabi = lineshape_jacobian(delta, rabi_sq, g1, g2)

    # rabi_sq is proportional to G1 and P, inversely to f_q
    unit = (np.exp(1j * bg_phase) * np.exp(-1j * TWO_PI * (f - f_ref) * delay))[:, None]
    bg = bg_amp * unit
    return np.stack(
        [
            bg * (-TWO_PI * d_delta - d_rabi * rabi_sq / f_q),
            bg * (TWO_PI * d_g1 + math.pi * d_g2 + d_rabi * rabi_sq / gamma1_hz),
            bg * TWO_PI * d_g2,
            bg * d_rabi * rabi_sq * (math.log(10.0) / 10.0),
            unit * t,
            1j * bg * t,
            -1j * TWO_PI * (f - f_ref)[:, None] * bg * t,
        ]
    )


# ---------------------------------------------------------------------------
# Global fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QubitFitResult:
    omega_q: float  # Hz
    gamma1: float  # Hz (rate / 2 pi)
    gamma2: float  # Hz (rate / 2 pi)
    attenuation_db: float
    covariance: Dict[str, float]  # 1-sigma uncertainty per parameter
    background: complex = 1.0 + 0j
    delay: float = 0.0  # s
    residual_rms: float = 0.0
    at_bound: Tuple[str, ...] = field(default=())
    convention: float = DEFAULT_RABI_CONVENTION

    def as_dict(self) -> dict:
        return {
            "f_q_hz": self.omega_q,
            "gamma1_hz": self.gamma1,
            "gamma2_hz": self.gamma2,
            "attenuation_db": self.attenuation_db,
            "background_re": self.background.real,
            "background_im": self.background.imag,
            "delay_s": self.delay,
            "residual_rms": self.residual_rms,
            "at_bound": list(self.at_bound),
            "uncertainty": dict(self.covariance),
            "rabi_convention": self.convention,
        }


# internal parameter vector, scaled to O(1):
#   f_q [GHz], gamma1 [MHz], gamma_phi [MHz], attenuation [dB], bg_amp, bg_phase [rad], delay [ns]
_SCALE = np.array([1e9, 1e6, 1e6, 1.0, 1.0, 1.0, 1e-9])


def _unpack(x: np.ndarray):
    f_q, g1, g_phi, att, amp, phase, delay = x * _SCALE
    return f_q, g1, g1 / 2.0 + g_phi, att, amp * np.exp(1j * phase), delay


def _initial_guess(data: QubitDataset) -> np.ndarray:
    f = data.tone_freqs
    f_ref = float(np.mean(f))
    # the highest power is closest to saturated: t ~ background there
    bg_trace = data.t_complex[:, -1]
    phase = np.unwrap(np.angle(bg_trace))
    slope = np.polyfit(f - f_ref, phase, 1)[0] if f.size > 1 else 0.0
    delay = -slope / TWO_PI
    bg_corr = bg_trace * np.exp(1j * TWO_PI * (f - f_ref) * delay)
    bg = complex(np.median(bg_corr.real) + 1j * np.median(bg_corr.imag))

    norm = data.t_complex * np.exp(1j * TWO_PI * (f - f_ref) * delay)[:, None] / bg
    dip = np.abs(1.0 - norm[:, 0])
    i0 = int(np.argmax(dip))
    f_q = float(f[i0])
    depth = float(np.clip(dip[i0], 0.05, 1.0))

    # |1 - t| falls to half its peak at |d| = sqrt(3) G2 when unsaturated
    half = dip >= depth / 2.0
    lo, hi = i0, i0
    while lo > 0 and half[lo - 1]:
        lo -= 1
    while hi < f.size - 1 and half[hi + 1]:
        hi += 1
    width = max(float(f[hi] - f[lo]), float(np.min(np.diff(f))) if f.size > 1 else 1e6)
    g2 = width / (2.0 * math.sqrt(3.0))
    g1 = min(2.0 * g2 * depth, 2.0 * g2)
    g_phi = max(g2 - g1 / 2.0, 0.0)

    # on resonance the dip shrinks by 1 / (1 + s); s = 1 at the saturation power
    depth_vs_p = np.abs(1.0 - norm[i0, :])
    target = depth_vs_p[0] / 2.0
    p = data.tone_powers
    crossing = np.flatnonzero(depth_vs_p < target)
    p_sat_instr = float(p[crossing[0]]) if crossing.size else float(p[-1])
    p_sat_qubit_w = TWO_PI * g2 * CONSTANTS.reduced_planck * TWO_PI * f_q / DEFAULT_RABI_CONVENTION
    att = 10.0 * math.log10(p_sat_qubit_w) + 30.0 - p_sat_instr

    return np.array([f_q, g1, g_phi, att, abs(bg), np.angle(bg), delay]) / _SCALE


def fit_qubit_dataset(
    data: QubitDataset,
    power_to_rabi_convention: float = DEFAULT_RABI_CONVENTION,
    restarts: int = FIT_RESTARTS,
    seed: int = 0,
    max_nfev: int = FIT_MAX_NFEV,
) -> QubitFitResult:
    """
    Global complex fit of f_q, gamma1, gamma2 = gamma1/2 + gamma_phi, the
    attenuation and a background (amplitude, phase, electrical delay).
    Damped least squares over stacked real/imag residuals, multi-started from
    seeded perturbations of a data-driven initial guess.
    """
    if data.tone_freqs.size < 5 or data.tone_powers.size < 3:
        raise DomainError("qubit dataset needs at least 5 frequencies and 3 powers")
    if data.power_span_db < 20.0:
        logger.warning("[WARN] power span %.1f dB is below 20 dB; saturation may be unresolved", data.power_span_db)

    f = data.tone_freqs
    p = data.tone_powers
    f_ref = float(np.mean(f))
    y = data.t_complex

    def residuals(x: np.ndarray) -> np.ndarray:
        f_q, g1, g2, att, bg, delay = _unpack(x)
        r = _model(f, p, f_q, g1, g2, att, bg, delay, f_ref, power_to_rabi_convention) - y
        return np.concatenate([r.real.ravel(), r.imag.ravel()])

    def jacobian(x: np.ndarray) -> np.ndarray:
        f_q, g1, g_phi, att, amp, phase, delay = x * _SCALE
        cols = _model_jacobian(f, p, f_q, g1, g_phi, att, amp, phase, delay, f_ref, power_to_rabi_convention)
        cols = cols.reshape(cols.shape[0], -1) * _SCALE[:, None]
        return np.concatenate([cols.real, cols.imag], axis=1).T

    lower = np.array([f.min() / 1e9, 1e-9, 0.0, -np.inf, 0.0, -np.inf, -np.inf])
    upper = np.array([f.max() / 1e9, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf])
    x0 = np.clip(_initial_guess(data), lower + 1e-12, upper - 1e-12)

    rng = np.random.default_rng(seed)
    starts = [x0]
    for _ in range(max(restarts - 1, 0)):
        jitter = np.array([0.0, rng.uniform(-0.3, 0.3), rng.uniform(0.0, 1.0), rng.uniform(-6.0, 6.0), 0.0, 0.0, 0.0])
        x = x0.copy()
        x[1] *= 1.0 + jitter[1]
        x[2] = x[2] * jitter[2] + 1e-3 * x0[1]
        x[3] += jitter[3]
        starts.append(np.clip(x, lower + 1e-12, upper - 1e-12))

    best = None
    for i, start in enumerate(starts):
        sol = least_squares(
            residuals, start, jac=jacobian, bounds=(lower, upper), method="trf",
            x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=max_nfev,
        )
        logger.debug("fit start %d: cost=%.3e status=%d nfev=%d", i, sol.cost, sol.status, sol.nfev)
        if sol.status > 0 and (best is None or sol.cost < best.cost):
            best = sol

    if best is None:
        r0 = residuals(x0)
        rms = float(np.sqrt(np.mean(r0**2)))
        raise FitError(f"qubit fit did not converge from {len(starts)} starts (max_nfev={max_nfev})", residual_rms=rms)

    f_q, g1, g2, att, bg, delay = _unpack(best.x)
    n_res = best.fun.size
    rms = float(np.sqrt(np.mean(best.fun**2)))
    dof = max(n_res - best.x.size, 1)
    try:
        cov = np.linalg.pinv(best.jac.T @ best.jac) * (2.0 * best.cost / dof)
        sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None)) * _SCALE
    except np.linalg.LinAlgError:
        sigma = np.full(best.x.size, np.nan)

    at_bound = tuple(
        name for name, xv, lo, hi in zip(FIT_PARAMS, best.x, lower, upper)
        if (np.isfinite(lo) and abs(xv - lo) <= 1e-9 * max(1.0, abs(lo)))
        or (np.isfinite(hi) and abs(xv - hi) <= 1e-9 * max(1.0, abs(hi)))
    )
    if at_bound:
        logger.warning("[WARN] fit parameters at bound: %s", ", ".join(at_bound))

    return QubitFitResult(
        omega_q=float(f_q),
        gamma1=float(g1),
        gamma2=float(g2),
        attenuation_db=float(att),
        covariance=dict(zip(FIT_PARAMS, (float(s) for s in sigma))),
        background=complex(bg),
        delay=float(delay),
        residual_rms=rms,
        at_bound=at_bound,
        convention=power_to_rabi_convention,
    )


# ---------------------------------------------------------------------------
# Attenuation across frequency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttenuationModel:
    slope: float  # dB/GHz
    intercept: float  # dB at 0 Hz
    rms_residual: float  # dB

    def predict(self, freqs_hz) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(freqs_hz, dtype=float) / 1e9

    def as_dict(self) -> dict:
        return {"slope_db_per_ghz": self.slope, "intercept_db": self.intercept, "rms_residual_db": self.rms_residual}


def fit_attenuation_linear(freqs_hz: Sequence[float], attenuation_db: Sequence[float]) -> AttenuationModel:
    """Ordinary least squares line in (GHz, dB)."""
    x = np.asarray(freqs_hz, dtype=float) / 1e9
    y = np.asarray(attenuation_db, dtype=float)
    if x.shape != y.shape:
        raise DomainError(f"frequency and attenuation lists differ in length: {x.size} vs {y.size}")
    if np.unique(x).size < 2:
        raise DomainError(f"attenuation fit needs >= 2 distinct frequencies, got {np.unique(x).size}")

    model = LinearRegression().fit(x.reshape(-1, 1), y)
    resid = y - model.predict(x.reshape(-1, 1))
    return AttenuationModel(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
    )
