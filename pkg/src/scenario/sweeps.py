"""
One runner per sweep kind. Each takes a validated ScenarioConfig and returns
the tables and summary the CLI writes; nothing here touches the output
directory.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.config import DEFAULT_RABI_CONVENTION, STOPBAND_IMAG_K
from src.device.circuit import DeviceLine, DisorderSpec, UnitCellParams, line_impedance
from src.device.reference import reference_cell, reference_targets
from src.errors import ConfigurationError, DomainError, RegimeError
from src.gain.fwm import PumpSettings
from src.gain.profile import contiguous_band_above, flagged_window, gain_gap_window, gain_profile
from src.network.abcd import dispersion_frame, power_db, ripple_db, transmission_spectrum
from src.network.stopband import ensemble_transmission, nominal_centre, sample_ensemble, stopband_from_ensemble
from src.network.touchstone import cascade_networks, network_from_spectrum, read_touchstone, resample_network, serialize_touchstone
from src.noise.added_noise import ChainGains, average_excess_noise, noise_frame, read_noise_csv
from src.noise.transmon import fit_attenuation_linear, fit_qubit_dataset, read_qubit_csv
from src.power.compression import (
    band_average,
    compression_result,
    gain_vs_input_power,
    optimal_pump_powers,
    power_handling_summary,
    pump_sweep,
)
from src.power.intermod import REGIME_DECADE_DB, imd_sweep, ip3_from_two_tone, signal_to_imd_margin
from src.scenario.schema import ScenarioConfig, SweepKind
from src.utils.io import read_commented_csv
from src.utils.rng import derive_seed
from src.utils.units import db_to_ratio

logger = logging.getLogger(__name__)


@dataclass
class ScenarioResult:
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)  # file name -> table
    texts: Dict[str, str] = field(default_factory=dict)  # file name -> raw text (.s2p)
    summary: Dict[str, object] = field(default_factory=dict)


def resolve_device(cfg: ScenarioConfig) -> Tuple[UnitCellParams, int]:
    if cfg.device.preset == "reference":
        cell = reference_cell()
        return cell, cfg.device.cell_count or reference_targets().cell_count
    return cfg.device.cell, int(cfg.device.cell_count)


def _require_pump(cfg: ScenarioConfig) -> PumpSettings:
    if cfg.pump is None:
        raise ConfigurationError(f"sweep kind '{cfg.sweep.kind.value}' needs a pump section")
    return cfg.pump


def _json_float(x) -> object:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# Linear network
# ---------------------------------------------------------------------------

def run_dispersion(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, _ = resolve_device(cfg)
    df = dispersion_frame(cell, cfg.sweep.grid.values())
    evanescent = df["k_im"].fillna(np.inf) > STOPBAND_IMAG_K
    f_stop = df.loc[evanescent, "freq_hz"]
    summary = {
        "n_points": int(len(df)),
        "evanescent_points": int(evanescent.sum()),
        "evanescent_low_hz": _json_float(f_stop.min()) if not f_stop.empty else None,
        "evanescent_high_hz": _json_float(f_stop.max()) if not f_stop.empty else None,
        "line_impedance_ohm": line_impedance(cell),
    }
    return ScenarioResult(tables={"dispersion.csv": df}, summary=summary)


def run_sparams(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, n_cells = resolve_device(cfg)
    freqs = cfg.sweep.grid.values()
    spectrum = transmission_spectrum(DeviceLine.uniform(cell, n_cells), freqs, z_ref=cfg.chain.z_ref)
    net = network_from_spectrum(spectrum)
    if cfg.io.touchstone is not None:
        package = resample_network(read_touchstone(cfg.io.touchstone), freqs)
        net = cascade_networks([package, net])
        logger.info("cascaded package network %s on the input side", cfg.io.touchstone.name)

    df = net.frame()
    s21_db = power_db(net.s21)
    finite = np.isfinite(s21_db)
    summary = {
        "n_points": int(freqs.size),
        "gap_points": int(spectrum.gaps.sum()),
        "min_s21_db": _json_float(s21_db[finite].min()) if finite.any() else None,
        "ripple_db": ripple_db(net.s21),
        "package": str(cfg.io.touchstone.name) if cfg.io.touchstone else None,
    }
    # pole points stay in the CSV as NaN but cannot be written to Touchstone
    ok = np.all(np.isfinite(net.s), axis=(1, 2))
    s2p = replace(net, frequencies=net.frequencies[ok], s=net.s[ok])
    return ScenarioResult(
        tables={"sparams.csv": df},
        texts={"device.s2p": serialize_touchstone(s2p, comments=[f"{n_cells}-cell line"])},
        summary=summary,
    )


def run_stopband_mc(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, n_cells = resolve_device(cfg)
    d = cfg.disorder
    spec = DisorderSpec(sigma_rel=d.sigma_rel, target=d.target, seed=derive_seed(cfg.seed, "disorder"))
    lines = sample_ensemble(cell, n_cells, spec, d.ensemble_size)
    ens = ensemble_transmission(lines, cfg.sweep.grid.values(), z_ref=cfg.chain.z_ref, workers=workers)
    threshold = cfg.sweep.options["threshold_db"]
    result = stopband_from_ensemble(ens, threshold, centre_hz=nominal_centre(DeviceLine.uniform(cell, 1)))

    df = pd.DataFrame({"freq_hz": ens.freqs, "mean_s21_db": ens.mean_db})
    summary = {"sigma_rel": d.sigma_rel, "target": d.target.value, "ensemble_size": d.ensemble_size}
    summary.update({k: _json_float(v) for k, v in result.as_dict().items()})
    return ScenarioResult(tables={"stopband.csv": df}, summary=summary)


# ---------------------------------------------------------------------------
# Gain and noise
# ---------------------------------------------------------------------------

def run_gain(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, n_cells = resolve_device(cfg)
    pump = _require_pump(cfg)
    curve = gain_profile(cell, n_cells, pump, cfg.sweep.grid.values(), workers=workers)

    window = gain_gap_window(curve)
    flagged = flagged_window(curve)
    g = curve.gain_db[np.isfinite(curve.gain_db)]
    summary = {
        "pump_frequency_hz": pump.frequency,
        "pump_power_dbm": pump.input_power,
        "peak_gain_db": _json_float(g.max()) if g.size else None,
        "flagged_low_hz": flagged[0] if flagged else None,
        "flagged_high_hz": flagged[1] if flagged else None,
        "gap_window_hz": (window[1] - window[0]) if window else None,
        "band_above_10db_hz": contiguous_band_above(curve, 10.0, exclude=window),
    }
    return ScenarioResult(tables={"gain.csv": curve.frame()}, summary=summary)


def run_noise(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    spectra = read_noise_csv(cfg.io.noise_csv)
    df_raw, _ = read_commented_csv(cfg.io.noise_csv)
    exclude = None
    if "g_twpa_db" in df_raw.columns:
        g_twpa = db_to_ratio(df_raw.sort_values("freq_hz")["g_twpa_db"].astype(float).to_numpy())
    else:
        cell, n_cells = resolve_device(cfg)
        pump = _require_pump(cfg)
        curve = gain_profile(cell, n_cells, pump, spectra.freqs, workers=workers)
        g_twpa = db_to_ratio(curve.gain_db)
        exclude = curve.stopband_flag | curve.gaps

    gains = ChainGains(g_sys=np.full(spectra.freqs.shape, db_to_ratio(cfg.chain.g_sys_db)), g_twpa=g_twpa)
    df = noise_frame(spectra, gains)
    band = cfg.sweep.options.get("band", (4e9, 8e9))
    try:
        excess = average_excess_noise(spectra.freqs, df["n_add"].to_numpy(), g_twpa, band=band, exclude=exclude)
    except DomainError as exc:
        logger.warning("[WARN] no band average: %s", exc)
        excess = None
    summary = {
        "n_points": int(spectra.freqs.size),
        "band_hz": list(band),
        "mean_excess_noise_quanta": _json_float(excess),
        "violations": int(spectra.violations.sum()),
    }
    return ScenarioResult(tables={"noise.csv": df}, summary=summary)


def run_calibrate(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    convention = cfg.sweep.options.get("rabi_convention") or DEFAULT_RABI_CONVENTION
    rows = []
    for path in cfg.io.qubit_csvs:
        fit = fit_qubit_dataset(read_qubit_csv(path), power_to_rabi_convention=convention)
        logger.info("%s: f_q=%.6g Hz, attenuation=%.2f dB", path.name, fit.omega_q, fit.attenuation_db)
        rows.append(
            {
                "source": path.name,
                "f_q_hz": fit.omega_q,
                "gamma1_hz": fit.gamma1,
                "gamma2_hz": fit.gamma2,
                "attenuation_db": fit.attenuation_db,
                "attenuation_err_db": fit.covariance.get("attenuation_db", math.nan),
                "residual_rms": fit.residual_rms,
            }
        )
    df = pd.DataFrame(rows).sort_values("f_q_hz").reset_index(drop=True)
    summary: Dict[str, object] = {"n_qubits": len(rows), "rabi_convention": convention}
    if df["f_q_hz"].nunique() >= 2:
        summary["attenuation_line"] = fit_attenuation_linear(df["f_q_hz"], df["attenuation_db"]).as_dict()
    return ScenarioResult(tables={"calibration.csv": df}, summary=summary)


# ---------------------------------------------------------------------------
# Power handling
# ---------------------------------------------------------------------------

def _two_tone_ip3(cell, n_cells, pump, centre, spacing, input_powers, workers) -> Optional[float]:
    df = imd_sweep(cell, n_cells, pump, centre, spacing, input_powers, workers=workers)
    try:
        return ip3_from_two_tone(df["pin_dbm"], df["p_fund_dbm"], df["p_imd3_dbm"])
    except RegimeError as exc:
        logger.warning("[WARN] IP3 not extracted at %.4g Hz: %s", centre, exc)
        return None


def run_power_sweep(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, n_cells = resolve_device(cfg)
    pump = _require_pump(cfg)
    opts = cfg.sweep.options
    signal_powers = cfg.sweep.grid.values()
    two_tone_powers = signal_powers[signal_powers <= signal_powers.min() + REGIME_DECADE_DB]
    tables: Dict[str, pd.DataFrame] = {}

    results = []
    ip3: Dict[float, Optional[float]] = {}
    for f in opts["signal_frequencies"]:
        curve = gain_vs_input_power(cell, n_cells, pump, f, signal_powers, workers=workers)
        tables[f"compression_{f / 1e9:.4f}GHz.csv"] = curve.frame()
        results.append(compression_result(curve, opts["phase_threshold_deg"]))
        ip3[f] = _two_tone_ip3(cell, n_cells, pump, f, opts["tone_spacing"], two_tone_powers, workers)

    summary: Dict[str, object] = {
        "per_frequency": [{k: _json_float(v) for k, v in row.items()} for row in power_handling_summary(results, ip3=ip3)],
        "mean_ip3": band_average(list(ip3.values())),
        "mean_p_1db": band_average([r.p_1db for r in results]),
        "mean_p_5deg": band_average([r.p_5deg for r in results]),
    }

    if "pump_powers" in opts:
        sweep = pump_sweep(
            cell, n_cells, pump.frequency, opts["pump_powers"].values(), opts["signal_frequencies"][0],
            opts["signal_power"], cfg.chain.system_noise_quanta, cfg.chain.g_sys_db, workers=workers,
        )
        tables["pump_sweep.csv"] = sweep
        summary["optimal_pump_dbm"] = {k: _json_float(v) for k, v in optimal_pump_powers(sweep).items()}
    return ScenarioResult(tables=tables, summary=summary)


def run_imd(cfg: ScenarioConfig, workers: int) -> ScenarioResult:
    cell, n_cells = resolve_device(cfg)
    pump = _require_pump(cfg)
    opts = cfg.sweep.options
    df = imd_sweep(
        cell, n_cells, pump, opts["center_frequency"], opts["tone_spacing"], cfg.sweep.grid.values(),
        max_order=opts["max_order"], workers=workers,
    )
    margin = signal_to_imd_margin(df["p_fund_dbm"], df["p_imd3_dbm"])
    try:
        ip3 = ip3_from_two_tone(df["pin_dbm"], df["p_fund_dbm"], df["p_imd3_dbm"])
    except RegimeError as exc:
        logger.warning("[WARN] IP3 not extracted: %s", exc)
        ip3 = None
    summary = {
        "center_frequency_hz": opts["center_frequency"],
        "tone_spacing_hz": opts["tone_spacing"],
        "ip3_dbm": _json_float(ip3),
        "margin_low_power_db": _json_float(margin[0]),
        "margin_high_power_db": _json_float(margin[-1]),
    }
    return ScenarioResult(tables={"imd.csv": df}, summary=summary)


RUNNERS: Dict[SweepKind, Callable[[ScenarioConfig, int], ScenarioResult]] = {
    SweepKind.DISPERSION: run_dispersion,
    SweepKind.SPARAMS: run_sparams,
    SweepKind.STOPBAND_MC: run_stopband_mc,
    SweepKind.GAIN: run_gain,
    SweepKind.NOISE: run_noise,
    SweepKind.CALIBRATE: run_calibrate,
    SweepKind.POWER_SWEEP: run_power_sweep,
    SweepKind.IMD: run_imd,
}


def run_sweep(cfg: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    return RUNNERS[cfg.sweep.kind](cfg, workers)
