"""Shipped fixture configs against their golden summaries and oracles."""

import json
import math

import pytest

from conftest import FIXTURE_DIR, FIXTURE_NAMES, read_summary

pytestmark = pytest.mark.slow


def _golden(name):
    return json.loads((FIXTURE_DIR / f"{name}.golden.json").read_text())


CASES = [(name, cmd) for name in FIXTURE_NAMES for cmd in _golden(name)["commands"]]


def _same(expected: str, got: str) -> bool:
    try:
        a, b = float(expected), float(got)
    except ValueError:
        return expected == got
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-300)


@pytest.mark.parametrize("name,command", CASES)
def test_summary_matches_golden(fixture_runs, name, command):
    want = _golden(name)["commands"][command]
    code, out = fixture_runs(name, command)
    assert code == want["exit_code"]
    got = read_summary(out / f"{command}_summary.csv")
    assert set(got) == set(want["summary"])
    bad = {k: (v, got[k]) for k, v in want["summary"].items() if not _same(v, got[k])}
    assert not bad


ORACLE_CASES = [(name, cmd) for name in FIXTURE_NAMES for cmd in _golden(name)["oracles"]]


@pytest.mark.parametrize("name,command", ORACLE_CASES)
def test_oracle_values(fixture_runs, name, command):
    code, out = fixture_runs(name, command)
    got = read_summary(out / f"{command}_summary.csv")
    for key, (value, tol) in _golden(name)["oracles"][command].items():
        assert abs(float(got[key]) - value) <= tol, (key, got[key], value, tol)


def test_every_fixture_has_golden_file():
    assert sorted(p.name.split(".")[0] for p in FIXTURE_DIR.glob("*.golden.json")) == sorted(FIXTURE_NAMES)
    assert sorted(p.stem for p in FIXTURE_DIR.glob("*.yaml")) == sorted(FIXTURE_NAMES)


def test_cantor_measure_mean_within_tolerance(fixture_runs):
    code, out = fixture_runs("cantor", "measure")
    got = read_summary(out / "measure_summary.csv")
    assert abs(float(got["mean[0]"]) - 0.5) <= float(got["tol"])


def test_halving_chaos_all_pass(fixture_runs):
    code, out = fixture_runs("halving", "chaos")
    assert code == 0
    assert read_summary(out / "chaos_summary.csv")["pass_fraction"] == "1.0"


def test_support_and_seed_checks_within_bounds(fixture_runs):
    for name in FIXTURE_NAMES:
        if "measure" not in _golden(name)["commands"]:
            continue
        got = read_summary(fixture_runs(name, "measure")[1] / "measure_summary.csv")
        if "support_distance" in got:
            assert float(got["support_distance"]) <= float(got["support_bound"]), name
        if got.get("seed_gap"):
            assert float(got["seed_gap"]) < float(got["seed_gap_bound"]), name
