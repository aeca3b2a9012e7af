"""
Scenario documents: strict validation and the typed config built from them.

A scenario is one JSON object. Validation walks the whole document and
collects every problem with a dotted field path before anything is computed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.config import (
    DEFAULT_ENSEMBLE_SIZE,
    DEFAULT_G_SYS_DB,
    DEFAULT_IMD_ORDER,
    DEFAULT_PHASE_THRESHOLD_DEG,
    DEFAULT_SYSTEM_NOISE_QUANTA,
    DEFAULT_THRESHOLD_DB,
    DEFAULT_TONE_SPACING,
    DEFAULT_Z_REF,
    MAX_DISORDER_SIGMA,
    RANDOM_SEED,
)
from src.device.circuit import DisorderTarget, UnitCellParams, cell_from_dict
from src.errors import ConfigIssue, ConfigValidationError, ToolkitError
from src.gain.fwm import PumpSettings

MAX_GRID_POINTS = 200_001


class SweepKind(str, Enum):
    DISPERSION = "dispersion"
    SPARAMS = "sparams"
    STOPBAND_MC = "stopband_mc"
    GAIN = "gain"
    NOISE = "noise"
    CALIBRATE = "calibrate"
    POWER_SWEEP = "power_sweep"
    IMD = "imd"


# kinds whose start/stop/step is a frequency grid (Hz) rather than a power grid (dBm)
FREQUENCY_GRID_KINDS = {SweepKind.DISPERSION, SweepKind.SPARAMS, SweepKind.STOPBAND_MC, SweepKind.GAIN}
POWER_GRID_KINDS = {SweepKind.POWER_SWEEP, SweepKind.IMD}
PUMP_KINDS = {SweepKind.GAIN, SweepKind.POWER_SWEEP, SweepKind.IMD}

SWEEP_OPTIONS: Dict[SweepKind, Tuple[str, ...]] = {
    SweepKind.DISPERSION: (),
    SweepKind.SPARAMS: (),
    SweepKind.STOPBAND_MC: ("threshold_db",),
    SweepKind.GAIN: (),
    SweepKind.NOISE: ("band",),
    SweepKind.CALIBRATE: ("rabi_convention",),
    SweepKind.POWER_SWEEP: (
        "signal_power", "signal_frequencies", "pump_powers", "phase_threshold_deg", "tone_spacing",
    ),
    SweepKind.IMD: ("center_frequency", "tone_spacing", "max_order"),
}

TOP_KEYS = ("seed", "device", "disorder", "pump", "sweep", "io", "chain")


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    step: float

    @property
    def count(self) -> int:
        return int(round((self.stop - self.start) / self.step)) + 1

    def values(self) -> np.ndarray:
        # linspace keeps the end point exact and the grid identical run to run
        return np.linspace(self.start, self.start + (self.count - 1) * self.step, self.count)


@dataclass(frozen=True)
class DeviceSpec:
    cell_count: Optional[int]  # None: the preset's own cell count
    cell: Optional[UnitCellParams] = None
    preset: Optional[str] = None


@dataclass(frozen=True)
class DisorderConfig:
    sigma_rel: float
    target: DisorderTarget = DisorderTarget.RESONATOR_C_RES
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE


@dataclass(frozen=True)
class SweepSpec:
    kind: SweepKind
    grid: Optional[Grid] = None
    options: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class IoSpec:
    output_dir: Optional[Path] = None
    touchstone: Optional[Path] = None
    qubit_csvs: Tuple[Path, ...] = ()
    noise_csv: Optional[Path] = None


@dataclass(frozen=True)
class ChainSpec:
    z_ref: float = DEFAULT_Z_REF
    system_noise_quanta: float = DEFAULT_SYSTEM_NOISE_QUANTA
    g_sys_db: float = DEFAULT_G_SYS_DB


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    device: DeviceSpec
    sweep: SweepSpec
    disorder: Optional[DisorderConfig] = None
    pump: Optional[PumpSettings] = None
    io: IoSpec = IoSpec()
    chain: ChainSpec = ChainSpec()
    document: Dict[str, Any] = field(default_factory=dict)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed, document={**self.document, "seed": seed})


@dataclass(frozen=True)
class ValidationReport:
    issues: List[ConfigIssue]
    config: Optional[ScenarioConfig] = None

    @property
    def ok(self) -> bool:
        return not self.issues

    def as_dict(self) -> dict:
        return {"valid": self.ok, "errors": [i.as_dict() for i in self.issues]}


# ---------------------------------------------------------------------------
# Field checks
# ---------------------------------------------------------------------------

class _Checker:
    def __init__(self) -> None:
        self.issues: List[ConfigIssue] = []

    def add(self, path: str, message: str, kind: str = "invalid") -> None:
        self.issues.append(ConfigIssue(path=path, message=message, kind=kind))

    def section(self, doc: Dict[str, Any], key: str, path: str, required: bool) -> Optional[Dict[str, Any]]:
        if key not in doc or doc[key] is None:
            if required:
                self.add(_join(path, key), "required section is missing", "missing")
            return None
        value = doc[key]
        if not isinstance(value, dict):
            self.add(_join(path, key), f"expected an object, got {type(value).__name__}", "type")
            return None
        return value

    def unknown(self, doc: Dict[str, Any], allowed: Tuple[str, ...], path: str) -> None:
        for key in sorted(set(doc) - set(allowed)):
            self.add(_join(path, key), f"unknown key. Allowed: {sorted(allowed)}", "unknown")

    def number(
        self,
        doc: Dict[str, Any],
        key: str,
        path: str,
        required: bool = True,
        minimum: Optional[float] = None,
        exclusive: bool = False,
        maximum: Optional[float] = None,
        default: Optional[float] = None,
    ) -> Optional[float]:
        p = _join(path, key)
        if key not in doc:
            if required:
                self.add(p, "required field is missing", "missing")
            return default
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.add(p, f"expected a finite number, got {value!r}", "type")
            return None
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            self.add(p, f"must be {'>' if exclusive else '>='} {minimum:g}, got {value!r}", "invariant")
            return None
        if maximum is not None and value >= maximum:
            self.add(p, f"must be < {maximum:g}, got {value!r}", "invariant")
            return None
        return float(value)

    def integer(
        self, doc: Dict[str, Any], key: str, path: str, required: bool = True, minimum: int = 0, default=None
    ) -> Optional[int]:
        p = _join(path, key)
        if key not in doc:
            if required:
                self.add(p, "required field is missing", "missing")
            return default
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(p, f"expected an integer, got {value!r}", "type")
            return None
        if value < minimum:
            self.add(p, f"must be >= {minimum}, got {value!r}", "type" if minimum > 0 and value < 0 else "invariant")
            return None
        return value

    def path(self, doc: Dict[str, Any], key: str, where: str, base_dir: Path) -> Optional[Path]:
        if key not in doc:
            return None
        value = doc[key]
        if not isinstance(value, str) or not value:
            self.add(_join(where, key), f"expected a path string, got {value!r}", "type")
            return None
        return _resolve(value, base_dir)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _resolve(value: str, base_dir: Path) -> Path:
    p = Path(value)
    return p if p.is_absolute() else (base_dir / p)


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _check_cell(c: _Checker, doc: Dict[str, Any], path: str) -> Optional[UnitCellParams]:
    c.unknown(doc, ("junctions", "resonator", "c_ground", "series_resistance"), path)
    n_before = len(c.issues)
    j = c.section(doc, "junctions", path, required=True)
    if j is not None:
        jp = _join(path, "junctions")
        c.unknown(j, ("critical_current", "self_capacitance", "count_per_cell"), jp)
        c.number(j, "critical_current", jp, minimum=0.0, exclusive=True)
        c.number(j, "self_capacitance", jp, minimum=0.0)
        c.integer(j, "count_per_cell", jp, required=False, minimum=1)
    r = c.section(doc, "resonator", path, required=True)
    if r is not None:
        rp = _join(path, "resonator")
        c.unknown(r, ("c_res", "l_res", "c_coupling"), rp)
        for key in ("c_res", "l_res", "c_coupling"):
            c.number(r, key, rp, minimum=0.0)
    c.number(doc, "c_ground", path, minimum=0.0, exclusive=True)
    c.number(doc, "series_resistance", path, required=False, minimum=0.0)
    if len(c.issues) > n_before:
        return None
    try:
        return cell_from_dict(doc)
    except ToolkitError as exc:
        c.add(path, str(exc), "invariant")
        return None


def _check_device(c: _Checker, doc: Dict[str, Any]) -> Optional[DeviceSpec]:
    dev = c.section(doc, "device", "", required=True)
    if dev is None:
        return None
    c.unknown(dev, ("preset", "cell", "cell_count"), "device")
    has_preset, has_cell = "preset" in dev, "cell" in dev
    if has_preset == has_cell:
        c.add("device", "exactly one of 'preset' or 'cell' is required", "missing" if not has_preset else "invalid")
        return None

    if has_preset:
        if dev["preset"] != "reference":
            c.add("device.preset", f"unknown preset {dev['preset']!r}. Allowed: ['reference']", "invariant")
            return None
        count = c.integer(dev, "cell_count", "device", required=False, minimum=1)
        return DeviceSpec(cell_count=count, preset="reference")

    cell_doc = c.section(dev, "cell", "device", required=True)
    count = c.integer(dev, "cell_count", "device", required=True, minimum=1)
    cell = _check_cell(c, cell_doc, "device.cell") if cell_doc is not None else None
    if cell is None or count is None:
        return None
    return DeviceSpec(cell_count=count, cell=cell)


def _check_disorder(c: _Checker, doc: Dict[str, Any]) -> Optional[DisorderConfig]:
    d = c.section(doc, "disorder", "", required=False)
    if d is None:
        return None
    c.unknown(d, ("sigma_rel", "target", "ensemble_size"), "disorder")
    sigma = c.number(d, "sigma_rel", "disorder", minimum=0.0, maximum=MAX_DISORDER_SIGMA)
    target = DisorderTarget.RESONATOR_C_RES
    if "target" in d:
        try:
            target = DisorderTarget(d["target"])
        except ValueError:
            c.add("disorder.target", f"unknown target {d['target']!r}. Allowed: {[t.value for t in DisorderTarget]}", "invariant")
            return None
    size = c.integer(d, "ensemble_size", "disorder", required=False, minimum=1, default=DEFAULT_ENSEMBLE_SIZE)
    if sigma is None or size is None:
        return None
    return DisorderConfig(sigma_rel=sigma, target=target, ensemble_size=size)


def _check_pump(c: _Checker, doc: Dict[str, Any]) -> Optional[PumpSettings]:
    p = c.section(doc, "pump", "", required=False)
    if p is None:
        return None
    c.unknown(p, ("frequency", "input_power"), "pump")
    f = c.number(p, "frequency", "pump", minimum=0.0, exclusive=True)
    power = c.number(p, "input_power", "pump")
    if f is None or power is None:
        return None
    return PumpSettings(frequency=f, input_power=power)


def _check_grid(c: _Checker, s: Dict[str, Any], kind: SweepKind) -> Optional[Grid]:
    positive = kind in FREQUENCY_GRID_KINDS
    start = c.number(s, "start", "sweep", minimum=0.0 if positive else None, exclusive=positive)
    stop = c.number(s, "stop", "sweep", minimum=0.0 if positive else None, exclusive=positive)
    step = c.number(s, "step", "sweep", minimum=0.0, exclusive=True)
    if start is None or stop is None or step is None:
        return None
    if stop < start:
        c.add("sweep.stop", f"must be >= sweep.start ({start:g}), got {stop:g}", "invariant")
        return None
    grid = Grid(start, stop, step)
    if grid.count > MAX_GRID_POINTS:
        c.add("sweep.step", f"grid of {grid.count} points exceeds {MAX_GRID_POINTS}", "invariant")
        return None
    return grid


def _check_sweep_options(c: _Checker, s: Dict[str, Any], kind: SweepKind) -> Dict[str, Any]:
    opts: Dict[str, Any] = {}
    if kind is SweepKind.STOPBAND_MC:
        v = c.number(s, "threshold_db", "sweep", required=False, default=DEFAULT_THRESHOLD_DB)
        if v is not None and v >= 0:
            c.add("sweep.threshold_db", f"must be < 0, got {v!r}", "invariant")
        opts["threshold_db"] = v
    elif kind is SweepKind.NOISE:
        band = s.get("band", [4e9, 8e9])
        if (not isinstance(band, list) or len(band) != 2
                or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in band) or band[0] >= band[1]):
            c.add("sweep.band", f"expected [low_hz, high_hz] with low < high, got {band!r}", "type")
        else:
            opts["band"] = (float(band[0]), float(band[1]))
    elif kind is SweepKind.CALIBRATE:
        opts["rabi_convention"] = c.number(s, "rabi_convention", "sweep", required=False, minimum=0.0, exclusive=True)
    elif kind is SweepKind.POWER_SWEEP:
        opts["signal_power"] = c.number(s, "signal_power", "sweep", required=True)
        freqs = s.get("signal_frequencies")
        if freqs is None:
            c.add("sweep.signal_frequencies", "required field is missing", "missing")
        elif (not isinstance(freqs, list) or not freqs
              or not all(isinstance(f, (int, float)) and not isinstance(f, bool) and f > 0 for f in freqs)):
            c.add("sweep.signal_frequencies", f"expected a non-empty list of positive Hz values, got {freqs!r}", "type")
        else:
            opts["signal_frequencies"] = tuple(float(f) for f in freqs)
        pp = c.section(s, "pump_powers", "sweep", required=False)
        if pp is not None:
            c.unknown(pp, ("start", "stop", "step"), "sweep.pump_powers")
            vals = [c.number(pp, k, "sweep.pump_powers", minimum=0.0 if k == "step" else None, exclusive=k == "step")
                    for k in ("start", "stop", "step")]
            if None not in vals:
                if vals[1] < vals[0]:
                    c.add("sweep.pump_powers.stop", "must be >= sweep.pump_powers.start", "invariant")
                else:
                    opts["pump_powers"] = Grid(*vals)
        opts["phase_threshold_deg"] = c.number(
            s, "phase_threshold_deg", "sweep", required=False, minimum=0.0, exclusive=True, default=DEFAULT_PHASE_THRESHOLD_DEG
        )
        opts["tone_spacing"] = c.number(
            s, "tone_spacing", "sweep", required=False, minimum=0.0, exclusive=True, default=DEFAULT_TONE_SPACING
        )
    elif kind is SweepKind.IMD:
        opts["center_frequency"] = c.number(s, "center_frequency", "sweep", minimum=0.0, exclusive=True)
        opts["tone_spacing"] = c.number(s, "tone_spacing", "sweep", minimum=0.0, exclusive=True)
        order = c.integer(s, "max_order", "sweep", required=False, minimum=3, default=DEFAULT_IMD_ORDER)
        if order is not None and order not in (3, 5, 7):
            c.add("sweep.max_order", f"must be one of [3, 5, 7], got {order!r}", "invariant")
        opts["max_order"] = order
    return opts


def _check_sweep(c: _Checker, doc: Dict[str, Any]) -> Optional[SweepSpec]:
    s = c.section(doc, "sweep", "", required=True)
    if s is None:
        return None
    raw_kind = s.get("kind")
    if raw_kind is None:
        c.add("sweep.kind", "required field is missing", "missing")
        return None
    try:
        kind = SweepKind(raw_kind)
    except ValueError:
        c.add("sweep.kind", f"unknown kind {raw_kind!r}. Allowed: {[k.value for k in SweepKind]}", "invariant")
        return None

    uses_grid = kind in FREQUENCY_GRID_KINDS or kind in POWER_GRID_KINDS
    allowed = ("kind",) + (("start", "stop", "step") if uses_grid else ()) + SWEEP_OPTIONS[kind]
    c.unknown(s, allowed, "sweep")
    grid = _check_grid(c, s, kind) if uses_grid else None
    opts = _check_sweep_options(c, s, kind)
    return SweepSpec(kind=kind, grid=grid, options=opts)


def _check_io(c: _Checker, doc: Dict[str, Any], base_dir: Path) -> IoSpec:
    io_doc = c.section(doc, "io", "", required=False)
    if io_doc is None:
        return IoSpec()
    c.unknown(io_doc, ("output_dir", "touchstone", "qubit_csvs", "noise_csv"), "io")
    qubits: List[Path] = []
    raw = io_doc.get("qubit_csvs", [])
    if not isinstance(raw, list) or not all(isinstance(q, str) and q for q in raw):
        c.add("io.qubit_csvs", f"expected a list of path strings, got {raw!r}", "type")
    else:
        qubits = [_resolve(q, base_dir) for q in raw]
    return IoSpec(
        output_dir=c.path(io_doc, "output_dir", "io", base_dir),
        touchstone=c.path(io_doc, "touchstone", "io", base_dir),
        qubit_csvs=tuple(qubits),
        noise_csv=c.path(io_doc, "noise_csv", "io", base_dir),
    )


def _check_chain(c: _Checker, doc: Dict[str, Any]) -> ChainSpec:
    ch = c.section(doc, "chain", "", required=False)
    if ch is None:
        return ChainSpec()
    c.unknown(ch, ("z_ref", "system_noise_quanta", "g_sys_db"), "chain")
    z = c.number(ch, "z_ref", "chain", required=False, minimum=0.0, exclusive=True, default=DEFAULT_Z_REF)
    n = c.number(ch, "system_noise_quanta", "chain", required=False, minimum=0.0, default=DEFAULT_SYSTEM_NOISE_QUANTA)
    g = c.number(ch, "g_sys_db", "chain", required=False, default=DEFAULT_G_SYS_DB)
    return ChainSpec(
        z_ref=DEFAULT_Z_REF if z is None else z,
        system_noise_quanta=DEFAULT_SYSTEM_NOISE_QUANTA if n is None else n,
        g_sys_db=DEFAULT_G_SYS_DB if g is None else g,
    )


def _check_requirements(c: _Checker, sweep: SweepSpec, doc: Dict[str, Any], disorder, io: IoSpec) -> None:
    kind = sweep.kind
    if kind in PUMP_KINDS and "pump" not in doc:
        c.add("pump", f"required for sweep kind '{kind.value}'", "missing")
    if kind is SweepKind.STOPBAND_MC and disorder is None and "disorder" not in doc:
        c.add("disorder", "required for sweep kind 'stopband_mc'", "missing")
    if kind is SweepKind.NOISE and io.noise_csv is None:
        c.add("io.noise_csv", "required for sweep kind 'noise'", "missing")
    if kind is SweepKind.CALIBRATE and not io.qubit_csvs:
        c.add("io.qubit_csvs", "required (non-empty) for sweep kind 'calibrate'", "missing")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def validate_document(doc: Any, base_dir: Path = Path(".")) -> ValidationReport:
    c = _Checker()
    if not isinstance(doc, dict):
        c.add("", f"scenario must be a JSON object, got {type(doc).__name__}", "type")
        return ValidationReport(issues=c.issues)

    c.unknown(doc, TOP_KEYS, "")
    seed = c.integer(doc, "seed", "", required=False, minimum=0, default=RANDOM_SEED)
    if seed is not None and seed >= 2**64:
        c.add("seed", f"must fit in an unsigned 64-bit integer, got {seed!r}", "invariant")
    device = _check_device(c, doc)
    disorder = _check_disorder(c, doc)
    pump = _check_pump(c, doc)
    sweep = _check_sweep(c, doc)
    io = _check_io(c, doc, base_dir)
    chain = _check_chain(c, doc)
    if sweep is not None:
        _check_requirements(c, sweep, doc, disorder, io)

    if c.issues:
        return ValidationReport(issues=c.issues)
    cfg = ScenarioConfig(
        seed=int(seed), device=device, sweep=sweep, disorder=disorder, pump=pump, io=io, chain=chain, document=doc
    )
    return ValidationReport(issues=[], config=cfg)


def validate_config(text: str, base_dir: Path = Path(".")) -> ValidationReport:
    """Validate scenario text; every problem lands in the report, nothing raises."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        return ValidationReport(issues=[ConfigIssue(path="", message=f"invalid JSON: {exc}", kind="syntax")])
    return validate_document(doc, base_dir)


def load_scenario(path: Path) -> ScenarioConfig:
    if not path.exists():
        raise FileNotFoundError(f"Scenario config not found: {path}")
    text = path.read_text(encoding="utf-8-sig")
    report = validate_config(text, base_dir=path.resolve().parent)
    if not report.ok:
        raise ConfigValidationError(report.issues)
    return report.config
