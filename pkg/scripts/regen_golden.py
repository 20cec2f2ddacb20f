"""Regenerate the golden summaries shipped next to the fixture configs.

Runs every command a fixture configures and stores the resulting summary
tables plus exit codes.  Oracle checks (closed-form values with physical
tolerances) are kept from the existing golden file.  Review the diff before
committing a regenerated file.
"""

import csv
import json
import sys
import tempfile
from pathlib import Path

from ifs_lab.cli import main

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "ifs_lab" / "fixtures"
COMMANDS = ("attractor", "measure", "ergodic", "chaos", "diagnose")


def read_summary(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {k: v for k, v in rows[1:]}


def run(config, command, out):
    code = main([command, "--config", str(config), "--out", str(out), "--no-figures"])
    summary = out / f"{command}_summary.csv"
    return code, (read_summary(summary) if summary.exists() else {})


def regenerate(name):
    config = FIXTURES / f"{name}.yaml"
    golden_path = FIXTURES / f"{name}.golden.json"
    old = json.loads(golden_path.read_text()) if golden_path.exists() else {}
    import yaml

    sections = yaml.safe_load(config.read_text())
    commands = {}
    with tempfile.TemporaryDirectory() as tmp:
        for command in COMMANDS:
            if command not in sections:
                continue
            code, summary = run(config, command, Path(tmp) / command)
            commands[command] = {"exit_code": code, "summary": summary}
    golden = {"fixture": name, "commands": commands, "oracles": old.get("oracles", {})}
    golden_path.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(f"wrote {golden_path}")


if __name__ == "__main__":
    for name in sys.argv[1:] or ["cantor", "sierpinski", "halving", "edalat", "blend", "identity"]:
        regenerate(name)
