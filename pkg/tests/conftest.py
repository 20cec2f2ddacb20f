import csv
import re
from importlib.resources import files
from pathlib import Path

import pytest

from ifs_lab.cli import main

FIXTURE_DIR = Path(str(files("ifs_lab") / "fixtures"))
FIXTURE_NAMES = ["cantor", "sierpinski", "halving", "edalat", "blend", "identity"]


def read_summary(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["key", "value"]
    return {k: v for k, v in rows[1:]}


def run_cli(command, config, out, *extra):
    return main([command, "--config", str(config), "--out", str(out), *map(str, extra)])


@pytest.fixture(scope="session")
def fixture_runs(tmp_path_factory):
    """Runs ``(fixture, command)`` once per session; returns (exit code, out dir)."""
    cache = {}

    def get(name, command):
        key = (name, command)
        if key not in cache:
            out = tmp_path_factory.mktemp(f"{name}-{command}")
            cache[key] = (run_cli(command, FIXTURE_DIR / f"{name}.yaml", out, "--no-figures"), out)
        return cache[key]

    return get


_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    # parametrized cases of one criterion fold into a single line
    rows: dict = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m and (rep.when == "call" or outcome != "passed"):
                row = rows.setdefault(int(m.group(1)), [m.group(2).replace("_", " "), True, 0.0, 0])
                row[1] = row[1] and outcome == "passed"
                row[2] += rep.duration
                row[3] += 1
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num, (title, ok, secs, cases) in sorted(rows.items()):
        extra = f", {cases} cases" if cases > 1 else ""
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f} s{extra})")
