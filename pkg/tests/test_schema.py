import copy
import json
from pathlib import Path

import numpy as np
import pytest

from src.config import SCENARIO_DIR
from src.errors import ConfigValidationError
from src.scenario.schema import (
    Grid,
    SweepKind,
    load_scenario,
    validate_config,
    validate_document,
)

TOY_CELL = {
    "junctions": {"critical_current": 3.3e-6, "self_capacitance": 101.6e-15, "count_per_cell": 8},
    "resonator": {"c_res": 182.0e-15, "l_res": 2.67e-9, "c_coupling": 18.2e-15},
    "c_ground": 236.0e-15,
}

BASE = {
    "seed": 1,
    "device": {"cell": TOY_CELL, "cell_count": 64},
    "sweep": {"kind": "dispersion", "start": 1.0e9, "stop": 2.0e9, "step": 0.5e9},
}


def _with(path, value):
    doc = copy.deepcopy(BASE)
    node = doc
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    if value is _DELETE:
        del node[keys[-1]]
    else:
        node[keys[-1]] = value
    return doc


_DELETE = object()


def _issues(doc):
    report = validate_document(doc)
    assert not report.ok
    return {(i.path, i.kind) for i in report.issues}


@pytest.mark.parametrize("path", sorted(p.name for p in SCENARIO_DIR.glob("*.json")))
def test_shipped_scenarios_are_valid(path):
    cfg = load_scenario(SCENARIO_DIR / path)
    assert cfg.sweep.kind in SweepKind


def test_base_document_builds_a_config():
    report = validate_document(BASE)
    assert report.ok
    cfg = report.config
    assert cfg.device.cell_count == 64
    assert cfg.device.cell.resonator.l_res == 2.67e-9
    np.testing.assert_allclose(cfg.sweep.grid.values(), [1.0e9, 1.5e9, 2.0e9])
    assert cfg.with_seed(9).document["seed"] == 9
    assert report.as_dict() == {"valid": True, "errors": []}


@pytest.mark.parametrize(
    "doc, expected",
    [
        (_with("disorder", {"sigma_rel": 0.5}), ("disorder.sigma_rel", "invariant")),
        (_with("device.cell_count", -5), ("device.cell_count", "type")),
        (_with("device.cell_count", 0), ("device.cell_count", "invariant")),
        (_with("sweep.kind", "gain"), ("pump", "missing")),
        (_with("sweep.kind", "warp"), ("sweep.kind", "invariant")),
        (_with("sweep.step", 0), ("sweep.step", "invariant")),
        (_with("sweep.stop", 0.5e9), ("sweep.stop", "invariant")),
        (_with("sweep.start", "1 GHz"), ("sweep.start", "type")),
        (_with("device.cell.c_ground", _DELETE), ("device.cell.c_ground", "missing")),
        (_with("device.cell.junctions.critical_current", -1e-6), ("device.cell.junctions.critical_current", "invariant")),
        (_with("device.colour", "blue"), ("device.colour", "unknown")),
        (_with("pump", {"frequency": 6e9}), ("pump.input_power", "missing")),
        (_with("sweep", _DELETE), ("sweep", "missing")),
        (_with("seed", True), ("seed", "type")),
    ],
)
def test_malformed_documents_name_the_field(doc, expected):
    assert expected in _issues(doc)


def test_every_problem_is_reported_at_once():
    doc = _with("disorder", {"sigma_rel": 0.5, "ensemble_size": 0})
    doc["sweep"]["step"] = -1
    doc["extra"] = 1
    paths = {p for p, _ in _issues(doc)}
    assert {"disorder.sigma_rel", "disorder.ensemble_size", "sweep.step", "extra"} <= paths


def test_device_needs_exactly_one_source():
    doc = _with("device.preset", "reference")
    assert ("device", "invalid") in _issues(doc)
    assert ("device", "missing") in _issues({**BASE, "device": {"cell_count": 3}})
    assert ("device.preset", "invariant") in _issues({**BASE, "device": {"preset": "mine"}})


def test_kind_specific_requirements():
    stop = {**BASE, "sweep": {"kind": "stopband_mc", "start": 6e9, "stop": 7e9, "step": 1e6}}
    assert ("disorder", "missing") in _issues(stop)
    assert ("io.noise_csv", "missing") in _issues({**BASE, "sweep": {"kind": "noise"}})
    assert ("io.qubit_csvs", "missing") in _issues({**BASE, "sweep": {"kind": "calibrate"}})
    imd = {**BASE, "pump": {"frequency": 6.688e9, "input_power": -73.0},
           "sweep": {"kind": "imd", "start": -140, "stop": -120, "step": 2, "center_frequency": 6e9,
                     "tone_spacing": 1e6, "max_order": 4}}
    assert ("sweep.max_order", "invariant") in _issues(imd)


def test_power_sweep_options():
    doc = {**BASE, "pump": {"frequency": 6.688e9, "input_power": -73.0},
           "sweep": {"kind": "power_sweep", "start": -140, "stop": -80, "step": 1, "signal_power": -140,
                     "signal_frequencies": [6e9, 6.2e9], "pump_powers": {"start": -80, "stop": -70, "step": 1}}}
    cfg = validate_document(doc).config
    assert cfg.sweep.options["signal_frequencies"] == (6e9, 6.2e9)
    assert cfg.sweep.options["pump_powers"].count == 11
    assert cfg.sweep.options["phase_threshold_deg"] == 5.0
    assert cfg.sweep.options["tone_spacing"] == 5.0e6
    doc["sweep"]["signal_frequencies"] = []
    assert ("sweep.signal_frequencies", "type") in _issues(doc)


def test_options_of_another_kind_are_unknown():
    assert ("sweep.max_order", "unknown") in _issues(_with("sweep.max_order", 3))


def test_gain_sweep_takes_no_signal_power():
    doc = {**BASE, "pump": {"frequency": 6.688e9, "input_power": -73.0},
           "sweep": {"kind": "gain", "start": 3e9, "stop": 10e9, "step": 10e6, "signal_power": -130}}
    assert ("sweep.signal_power", "unknown") in _issues(doc)


def test_io_paths_resolve_against_the_config_directory(tmp_path):
    doc = {**BASE, "io": {"noise_csv": "floors.csv", "output_dir": "/abs/out"}, "sweep": {"kind": "noise"}}
    cfg = validate_document(doc, base_dir=tmp_path).config
    assert cfg.io.noise_csv == tmp_path / "floors.csv"
    assert cfg.io.output_dir == Path("/abs/out")


def test_invalid_json_is_a_syntax_issue():
    report = validate_config("{not json")
    assert not report.ok
    assert report.issues[0].kind == "syntax"
    assert validate_config("[1, 2]").issues[0].kind == "type"


def test_load_scenario_raises_with_every_issue(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(_with("disorder", {"sigma_rel": 0.5})))
    with pytest.raises(ConfigValidationError) as info:
        load_scenario(path)
    assert [i.path for i in info.value.issues] == ["disorder.sigma_rel"]
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")


def test_grid_counts_include_the_end_point():
    assert Grid(0.0, 1.0, 0.25).count == 5
    assert Grid(3e9, 10.4e9, 20e6).values()[-1] == 10.4e9
