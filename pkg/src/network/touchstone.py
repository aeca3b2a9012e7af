"""
Touchstone v1 two-port (.s2p) read/write, resampling and cascading.

Option line: "# <Hz|kHz|MHz|GHz> S <MA|DB|RI> R <z>", case-insensitive, missing
fields take the v1 defaults (GHz, S, MA, R 50). Data rows are
freq S11 S21 S12 S22, each parameter a pair in the declared format.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import skrf as rf

from src.config import DEFAULT_Z_REF
from src.errors import DomainError, GridMismatchError, TouchstoneParseError
from src.network.abcd import SPECTRUM_COLUMNS, SMatrix, TransmissionSpectrum

logger = logging.getLogger(__name__)

UNIT_MULTIPLIERS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}
VALUES_PER_ROW = 9


class TouchstoneFormat(str, Enum):
    MA = "MA"
    DB = "DB"
    RI = "RI"


@dataclass(frozen=True)
class TouchstoneNetwork:
    frequencies: np.ndarray  # Hz, strictly increasing
    s: np.ndarray  # (n_f, 2, 2) complex
    format: TouchstoneFormat = TouchstoneFormat.MA
    z_ref: float = DEFAULT_Z_REF
    unit: str = "GHZ"
    comments: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if s.shape != (f.size, 2, 2):
            raise DomainError(f"S data must have shape ({f.size}, 2, 2), got {s.shape}")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise DomainError("Touchstone frequencies must be strictly increasing")
        if self.unit.upper() not in UNIT_MULTIPLIERS:
            raise DomainError(f"unit must be one of {sorted(UNIT_NAMES.values())}, got {self.unit!r}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "format", TouchstoneFormat(self.format))
        object.__setattr__(self, "unit", self.unit.upper())

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]

    @property
    def s12(self) -> np.ndarray:
        return self.s[:, 0, 1]

    @property
    def s22(self) -> np.ndarray:
        return self.s[:, 1, 1]

    def to_skrf(self) -> rf.Network:
        return rf.Network(frequency=rf.Frequency.from_f(self.frequencies, unit="hz"), s=self.s, z0=self.z_ref)

    def smatrices(self) -> List[SMatrix]:
        return [SMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1], self.z_ref) for m in self.s]

    def frame(self) -> pd.DataFrame:
        s = self.s
        return pd.DataFrame(
            {
                "freq_hz": self.frequencies,
                "s11_re": s[:, 0, 0].real, "s11_im": s[:, 0, 0].imag,
                "s21_re": s[:, 1, 0].real, "s21_im": s[:, 1, 0].imag,
                "s12_re": s[:, 0, 1].real, "s12_im": s[:, 0, 1].imag,
                "s22_re": s[:, 1, 1].real, "s22_im": s[:, 1, 1].imag,
            },
            columns=SPECTRUM_COLUMNS,
        )


def network_from_spectrum(spectrum: TransmissionSpectrum) -> TouchstoneNetwork:
    return TouchstoneNetwork(frequencies=spectrum.freqs, s=spectrum.s, format=TouchstoneFormat.RI, z_ref=spectrum.z_ref)


def identity_network(freqs: Sequence[float], z_ref: float = DEFAULT_Z_REF) -> TouchstoneNetwork:
    f = np.asarray(freqs, dtype=float)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 0, 1] = 1.0
    s[:, 1, 0] = 1.0
    return TouchstoneNetwork(frequencies=f, s=s, format=TouchstoneFormat.RI, z_ref=z_ref)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _pair_to_complex(fmt: TouchstoneFormat, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if fmt is TouchstoneFormat.RI:
        return x + 1j * y
    mag = 10.0 ** (x / 20.0) if fmt is TouchstoneFormat.DB else x
    return mag * np.exp(1j * np.radians(y))


def _complex_to_pair(fmt: TouchstoneFormat, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if fmt is TouchstoneFormat.RI:
        return z.real, z.imag
    mag = np.abs(z)
    if fmt is TouchstoneFormat.DB:
        with np.errstate(divide="ignore"):
            mag = 20.0 * np.log10(mag)
    return mag, np.degrees(np.angle(z))


def _parse_option_line(tokens: List[str], line_no: int) -> Tuple[str, TouchstoneFormat, float]:
    unit, fmt, z_ref = "GHZ", TouchstoneFormat.MA, 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in UNIT_MULTIPLIERS:
            unit = tok
        elif tok in TouchstoneFormat.__members__:
            fmt = TouchstoneFormat(tok)
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise TouchstoneParseError(f"only S parameters are supported, got '{tokens[i]}'", line_no)
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneParseError("option 'R' needs a reference impedance", line_no)
            try:
                z_ref = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneParseError(f"invalid reference impedance '{tokens[i + 1]}'", line_no) from None
            if not z_ref > 0:
                raise TouchstoneParseError(f"reference impedance must be > 0, got {z_ref}", line_no)
            i += 1
        else:
            raise TouchstoneParseError(f"unknown option '{tokens[i]}'", line_no)
        i += 1
    return unit, fmt, z_ref


def parse_touchstone(text: str | Iterable[str]) -> TouchstoneNetwork:
    """Parse Touchstone v1 two-port content; errors carry the 1-based line number."""
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]

    unit, fmt, z_ref = "GHZ", TouchstoneFormat.MA, 50.0
    seen_options = False
    comments: List[str] = []
    rows: List[List[float]] = []

    for line_no, raw in enumerate(lines, start=1):
        body, _, comment = raw.partition("!")
        if comment.strip() and not body.strip():
            comments.append(comment.strip())
        body = body.strip()
        if not body:
            continue

        if body.startswith("["):
            raise TouchstoneParseError("Touchstone v2 keywords are not supported (v1 two-port only)", line_no)

        if body.startswith("#"):
            if seen_options:
                logger.debug("line %d: extra option line ignored", line_no)
                continue
            if rows:
                raise TouchstoneParseError("option line must precede the data", line_no)
            unit, fmt, z_ref = _parse_option_line(body[1:].split(), line_no)
            seen_options = True
            continue

        tokens = body.split()
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise TouchstoneParseError(f"non-numeric value '{bad}'", line_no) from None
        if len(values) != VALUES_PER_ROW:
            raise TouchstoneParseError(
                f"expected {VALUES_PER_ROW} values (freq + 4 complex pairs, two-port), got {len(values)}",
                line_no,
            )
        if rows and values[0] <= rows[-1][0]:
            raise TouchstoneParseError(
                f"frequency {values[0]:g} is not above the previous {rows[-1][0]:g}", line_no
            )
        rows.append(values)

    if not rows:
        raise TouchstoneParseError("no data rows found")

    data = np.array(rows, dtype=float)
    freqs = data[:, 0] * UNIT_MULTIPLIERS[unit]
    s = np.empty((len(rows), 2, 2), dtype=complex)
    # two-port v1 column order: S11 S21 S12 S22
    s[:, 0, 0] = _pair_to_complex(fmt, data[:, 1], data[:, 2])
    s[:, 1, 0] = _pair_to_complex(fmt, data[:, 3], data[:, 4])
    s[:, 0, 1] = _pair_to_complex(fmt, data[:, 5], data[:, 6])
    s[:, 1, 1] = _pair_to_complex(fmt, data[:, 7], data[:, 8])

    return TouchstoneNetwork(frequencies=freqs, s=s, format=fmt, z_ref=z_ref, unit=unit, comments=tuple(comments))


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_touchstone(path: Path) -> TouchstoneNetwork:
    if not path.exists():
        raise FileNotFoundError(f"Touchstone file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ts":
        raise TouchstoneParseError(f"Touchstone v2 files are not supported, got '{path.name}'")
    ports = re.fullmatch(r"\.s(\d+)p", suffix)
    if ports and ports.group(1) != "2":
        raise TouchstoneParseError(f"only two-port .s2p files are supported, got '{path.name}'")
    return parse_touchstone(path.read_text(encoding="utf-8-sig"))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize_touchstone(
    net: TouchstoneNetwork,
    fmt: Optional[TouchstoneFormat] = None,
    unit: Optional[str] = None,
    comments: Optional[Sequence[str]] = None,
) -> str:
    """Touchstone v1 text; values are written with 17 significant digits."""
    fmt = TouchstoneFormat(fmt or net.format)
    unit = (unit or net.unit).upper()
    if unit not in UNIT_MULTIPLIERS:
        raise DomainError(f"unit must be one of {sorted(UNIT_NAMES.values())}, got {unit!r}")

    out: List[str] = [f"! {c}" for c in (net.comments if comments is None else comments)]
    out.append(f"# {UNIT_NAMES[unit]} S {fmt.value} R {net.z_ref:.17g}")

    cols = [net.frequencies / UNIT_MULTIPLIERS[unit]]
    for z in (net.s11, net.s21, net.s12, net.s22):
        x, y = _complex_to_pair(fmt, z)
        cols.extend([x, y])
    for row in np.column_stack(cols):
        out.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(out) + "\n"


def write_touchstone(net: TouchstoneNetwork, path: Path, fmt: Optional[TouchstoneFormat] = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_touchstone(net, fmt=fmt), encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# Grid operations
# ---------------------------------------------------------------------------

def resample_network(net: TouchstoneNetwork, freqs: Sequence[float]) -> TouchstoneNetwork:
    """Linear interpolation of real and imaginary parts; no extrapolation."""
    f_new = np.asarray(freqs, dtype=float)
    f = net.frequencies
    if f_new.size == 0:
        raise DomainError("resample grid is empty")
    if f_new.min() < f[0] or f_new.max() > f[-1]:
        raise DomainError(
            f"resample grid [{f_new.min():.6g}, {f_new.max():.6g}] Hz lies outside the data "
            f"[{f[0]:.6g}, {f[-1]:.6g}] Hz"
        )
    if f.size < 2:
        return replace(net, frequencies=f_new, s=np.repeat(net.s, f_new.size, axis=0))
    resampled = net.to_skrf().interpolate(rf.Frequency.from_f(f_new, unit="hz"), kind="linear", coords="cart")
    return replace(net, frequencies=f_new, s=resampled.s)


def _check_same_grid(first: TouchstoneNetwork, other: TouchstoneNetwork, position: int) -> None:
    fa, fb = first.frequencies, other.frequencies
    if fa.size != fb.size:
        raise GridMismatchError(f"network {position} has {fb.size} frequencies, network 0 has {fa.size}")
    diff = np.flatnonzero(fa != fb)
    if diff.size:
        i = int(diff[0])
        raise GridMismatchError(
            f"network {position} differs from network 0 at point {i}: {fb[i]:.12g} Hz vs {fa[i]:.12g} Hz"
        )
    if not math.isclose(first.z_ref, other.z_ref):
        raise GridMismatchError(f"network {position} has z_ref={other.z_ref} ohm, network 0 has {first.z_ref} ohm")


def cascade_networks(nets: Sequence[TouchstoneNetwork]) -> TouchstoneNetwork:
    """Input side first; port 2 of each network drives port 1 of the next."""
    if len(nets) == 0:
        raise DomainError("cascade_networks needs at least one network")
    first = nets[0]
    for pos, other in enumerate(nets[1:], start=1):
        _check_same_grid(first, other, pos)

    total = first.to_skrf()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for other in nets[1:]:
            total = total ** other.to_skrf()
    return replace(first, s=total.s, comments=())
