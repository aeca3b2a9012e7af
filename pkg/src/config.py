from dataclasses import dataclass
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parents[1]
DATA_DIR = BASE_DIR / "data"
RAW_DIR = DATA_DIR / "raw"
SCENARIO_DIR = RAW_DIR / "scenarios"
PROCESSED_DIR = DATA_DIR / "processed"

TOOLKIT_NAME = "jtwpa-toolkit"
TOOLKIT_VERSION = "0.3.0"


@dataclass(frozen=True)
class SeedFiles:
    reference_device_json: Path = RAW_DIR / "reference_device.json"


SEEDS = SeedFiles()

RANDOM_SEED = 42

# Network defaults
DEFAULT_Z_REF = 50.0  # ohm
DEFAULT_THRESHOLD_DB = -3.0
DEFAULT_ENSEMBLE_SIZE = 100

# Junction defaults (thin-film aluminium)
DEFAULT_GAP_ENERGY_EV = 180e-6
JUNCTIONS_PER_CELL = 8
NOMINAL_CELL_COUNT = 256
MAX_DISORDER_SIGMA = 0.2
MAX_DISORDER_REJECTIONS = 100

# Coupled-mode integration
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
STOPBAND_IMAG_K = 1e-6  # rad/cell, above this a mode counts as evanescent
MAX_IMD_MODES = 25
DEFAULT_IMD_ORDER = 3

# Noise / calibration
DEFAULT_SYSTEM_NOISE_QUANTA = 15.0
DEFAULT_G_SYS_DB = 60.0
DEFAULT_RABI_CONVENTION = 4.0
FIT_RESTARTS = 5
FIT_MAX_NFEV = 4000

# Power handling
DEFAULT_PHASE_THRESHOLD_DEG = 5.0
MIN_PUMP_TO_SIGNAL_DB = 40.0
IP3_SLOPE_TOLERANCE = 0.20
DEFAULT_TONE_SPACING = 5.0e6  # Hz, two-tone IP3 in power_sweep
