import json

import numpy as np
import pytest

from adhesion1d.scenario import (FAMILIES, ReportRecord, ScenarioError, family_state, load_scenario,
                                 make_rng, parse_scenario)

BASE = {"version": 1, "id": "s1", "initial": {"atoms": [[0.5, 0, 1], [0.5, 1, -1]]}}


def test_philox_stream_is_reproducible():
    a = make_rng(123).uniform(size=5)
    b = make_rng(123).uniform(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, make_rng(124).uniform(size=5))
    assert type(make_rng(1).bit_generator).__name__ == "Philox"


def test_parse_valid_scenario():
    sc = parse_scenario({**BASE, "times": [0, 1, 1, 2], "suites": ["cone"],
                         "tolerances": {"hopf": 1e-8}, "seed": 9})
    assert sc.times == [0.0, 1.0, 1.0, 2.0]
    assert sc.tol("hopf") == 1e-8 and sc.tol("hopf", 0.5) == 0.5 and sc.tol("evi") == 1e-6
    st = sc.state()
    assert st.positions.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("patch", [
    {"extra": 1},
    {"version": 2},
    {"id": ""},
    {"id": "../escape"},
    {"times": [1, 0]},
    {"times": [-1]},
    {"suites": ["nope"]},
    {"tolerances": {"nope": 1}},
    {"seed": 1.5},
    {"initial": {"atoms": [[1, 0, 0]], "csv": "x.csv"}},
    {"initial": {"family": "sine"}},
    {"initial": {"family": "sine", "N": 4, "extra": 1}},
    {"initial": {"atoms": [[1, 0, 0]], "N": 3}},
])
def test_strict_parsing_rejects(patch):
    with pytest.raises(ScenarioError):
        parse_scenario({**BASE, **patch})


def test_missing_keys_rejected():
    with pytest.raises(ScenarioError, match="initial"):
        parse_scenario({"version": 1, "id": "x"})


def test_state_errors_are_scenario_errors(tmp_path):
    sc = parse_scenario({**BASE, "initial": {"atoms": [[0.5, 0, 1], [0.4, 1, -1]]}})
    with pytest.raises(ScenarioError, match="sum"):
        sc.state()
    assert sc.state(renormalize=True).masses.sum() == pytest.approx(1.0)
    sc = parse_scenario({**BASE, "initial": {"csv": "missing.csv"}}, base_dir=tmp_path)
    with pytest.raises(ScenarioError):
        sc.state()
    with pytest.raises(ScenarioError):
        parse_scenario({**BASE, "initial": {"family": "nope", "N": 3}}).state()


def test_load_scenario_rejects_nonstandard_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"version": 1, "id": "a", "initial": {"atoms": [[1, 0, NaN]]}}')
    with pytest.raises(ScenarioError, match="NaN"):
        load_scenario(p)
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(p)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")


def test_csv_initial_relative_to_scenario(tmp_path):
    (tmp_path / "a.csv").write_text("m,x,v\n0.25,0,1\n0.75,1,0\n")
    p = tmp_path / "s.json"
    p.write_text(json.dumps({**BASE, "initial": {"csv": "a.csv"}}))
    assert load_scenario(p).state().masses.tolist() == [0.25, 0.75]


def test_families():
    for name in FAMILIES:
        st = family_state(name, 8)
        assert len(st) == 8 and st.masses.sum() == pytest.approx(1.0)
    a = family_state("random", 20, seed=5)
    b = family_state("random", 20, seed=5)
    np.testing.assert_array_equal(a.velocities, b.velocities)
    assert family_state("head_on", 4, {"speed": 2.0}).velocities.tolist() == [2, 2, -2, -2]
    with pytest.raises(ScenarioError):
        family_state("sine", 4, {"speed": 1})


def test_config_hash_tracks_content():
    a = parse_scenario(BASE)
    b = parse_scenario({**BASE, "seed": 1})
    assert a.config_hash() == parse_scenario(BASE).config_hash()
    assert a.config_hash() != b.config_hash()
    assert a.config_hash({"tol": 1}) != a.config_hash()


def test_report_record_status():
    assert ReportRecord("s", "c", 1.0, 1.0).status == "pass"
    assert ReportRecord("s", "c", 1.1, 1.0).status == "fail"
    assert ReportRecord("s", "c", float("nan"), 1.0).status == "fail"
    assert ReportRecord("s", "c", 0.0, 1.0).as_dict()["status"] == "pass"
