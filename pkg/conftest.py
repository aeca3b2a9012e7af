import os

import hypothesis
import numpy as np
import pytest

from src.device.circuit import JunctionParams, ResonatorParams, UnitCellParams

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="Skip reference-device physics tests.")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    skip = pytest.mark.skip(reason="--skip-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def toy_cell() -> UnitCellParams:
    """Hand-sized cell close to the reference device: ~58 ohm, resonator pole near 6.9 GHz."""
    return UnitCellParams(
        junctions=JunctionParams(critical_current=3.3e-6, self_capacitance=101.6e-15, count_per_cell=8),
        resonator=ResonatorParams(c_res=182.0e-15, l_res=2.67e-9, c_coupling=18.2e-15),
        c_ground=236.0e-15,
    )


@pytest.fixture
def bare_cell() -> UnitCellParams:
    """Same line without the phase-matching resonator."""
    return UnitCellParams(
        junctions=JunctionParams(critical_current=3.3e-6, self_capacitance=101.6e-15, count_per_cell=8),
        resonator=ResonatorParams(c_res=0.0, l_res=0.0, c_coupling=0.0),
        c_ground=236.0e-15,
    )
